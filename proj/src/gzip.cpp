#include "ccseg/gzip.hpp"

#include <zlib.h>

#include "ccseg/error.hpp"

namespace ccseg {

std::string gunzip_member(std::string_view bytes) {
  z_stream zs{};
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK)
    throw Error(Errc::BadGzipMember, "inflateInit2 failed");

  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(bytes.data()));
  zs.avail_in = static_cast<uInt>(bytes.size());

  std::string out;
  char buf[64 * 1024];
  int rc = Z_OK;
  while (rc == Z_OK) {
    zs.next_out = reinterpret_cast<Bytef*>(buf);
    zs.avail_out = sizeof buf;
    rc = inflate(&zs, Z_NO_FLUSH);
    out.append(buf, sizeof buf - zs.avail_out);
    if (rc == Z_BUF_ERROR && zs.avail_in == 0) break;
  }
  std::size_t leftover = zs.avail_in;
  inflateEnd(&zs);

  if (rc != Z_STREAM_END)
    throw Error(Errc::BadGzipMember, rc == Z_BUF_ERROR ? "truncated member" : "corrupt member");
  if (leftover != 0)
    throw Error(Errc::BadGzipMember, std::to_string(leftover) + " bytes after member end");
  return out;
}

std::string gzip_member(std::string_view data, int level) {
  z_stream zs{};
  if (deflateInit2(&zs, level, Z_DEFLATED, 16 + MAX_WBITS, 8, Z_DEFAULT_STRATEGY) != Z_OK)
    throw Error(Errc::Io, "deflateInit2 failed");
  gz_header header{};
  header.os = 3;  // unix; fixed so output is platform-independent
  deflateSetHeader(&zs, &header);

  std::string out;
  out.resize(deflateBound(&zs, static_cast<uLong>(data.size())) + 32);
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
  zs.avail_in = static_cast<uInt>(data.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  int rc = deflate(&zs, Z_FINISH);
  out.resize(zs.total_out);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw Error(Errc::Io, "deflate did not finish");
  return out;
}

}  // namespace ccseg
