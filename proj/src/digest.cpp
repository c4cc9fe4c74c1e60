#include "ccseg/digest.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <memory>

#include "ccseg/error.hpp"

namespace ccseg {

namespace {

struct MdCtx {
  MdCtx() : ctx(EVP_MD_CTX_new()) {
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1)
      throw Error(Errc::Io, "sha256 init failed");
  }
  ~MdCtx() { EVP_MD_CTX_free(ctx); }
  MdCtx(const MdCtx&) = delete;
  MdCtx& operator=(const MdCtx&) = delete;

  void update(const void* data, std::size_t n) { EVP_DigestUpdate(ctx, data, n); }

  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
      out.push_back(kHex[md[i] >> 4]);
      out.push_back(kHex[md[i] & 0xF]);
    }
    return out;
  }

  EVP_MD_CTX* ctx;
};

}  // namespace

std::string sha256_hex(std::string_view data) {
  MdCtx md;
  md.update(data.data(), data.size());
  return md.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  MdCtx md;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    md.update(buf, static_cast<std::size_t>(in.gcount()));
  }
  return md.hex();
}

}  // namespace ccseg
