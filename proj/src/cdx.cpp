#include "ccseg/cdx.hpp"

#include <algorithm>
#include <charconv>

#include "ccseg/error.hpp"
#include "ccseg/timeutil.hpp"

namespace ccseg {

using nlohmann::ordered_json;

namespace {

[[noreturn]] void malformed(const std::string& why) { throw Error(Errc::MalformedLine, why); }

std::optional<std::uint64_t> parse_u64(std::string_view s) {
  std::uint64_t v = 0;
  if (s.empty()) return std::nullopt;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string text_field(const ordered_json& v, std::string_view key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
  malformed("field '" + std::string(key) + "' is not text");
}

std::uint64_t numeric_field(const ordered_json& v, std::string_view key) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_string()) {
    if (auto n = parse_u64(v.get_ref<const std::string&>())) return *n;
  }
  malformed("field '" + std::string(key) + "' is not a non-negative integer");
}

bool is_base32(std::string_view s) {
  return std::all_of(s.begin(), s.end(),
                     [](char c) { return (c >= 'A' && c <= 'Z') || (c >= '2' && c <= '7'); });
}

std::vector<std::string> split_languages(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size() && !s.empty()) {
    std::size_t comma = s.find(',', start);
    if (comma == std::string_view::npos) comma = s.size();
    out.emplace_back(s.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

void append_hex4(std::string& out, unsigned v) {
  static constexpr char kHex[] = "0123456789abcdef";
  out += "\\u";
  for (int shift = 12; shift >= 0; shift -= 4) out.push_back(kHex[(v >> shift) & 0xF]);
}

// Escapes like Python's json.dumps with ensure_ascii=True.
void append_py_string(std::string& out, std::string_view s) {
  out.push_back('"');
  for (std::size_t i = 0; i < s.size();) {
    auto c = static_cast<unsigned char>(s[i]);
    if (c < 0x80) {
      switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\r': out += "\\r"; break;
        case '\t': out += "\\t"; break;
        case '\b': out += "\\b"; break;
        case '\f': out += "\\f"; break;
        default:
          if (c < 0x20) append_hex4(out, c);
          else out.push_back(static_cast<char>(c));
      }
      ++i;
      continue;
    }
    unsigned cp = 0;
    std::size_t len = 0;
    if ((c & 0xE0) == 0xC0) { cp = c & 0x1F; len = 2; }
    else if ((c & 0xF0) == 0xE0) { cp = c & 0x0F; len = 3; }
    else { cp = c & 0x07; len = 4; }
    for (std::size_t k = 1; k < len && i + k < s.size(); ++k)
      cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
    if (cp >= 0x10000) {
      cp -= 0x10000;
      append_hex4(out, 0xD800 + (cp >> 10));
      append_hex4(out, 0xDC00 + (cp & 0x3FF));
    } else {
      append_hex4(out, cp);
    }
    i += len;
  }
  out.push_back('"');
}

void append_py_json(std::string& out, const nlohmann::json& v) {
  if (v.is_string()) {
    append_py_string(out, v.get_ref<const std::string&>());
  } else if (v.is_array()) {
    out.push_back('[');
    bool first = true;
    for (const auto& item : v) {
      if (!first) out += ", ";
      first = false;
      append_py_json(out, item);
    }
    out.push_back(']');
  } else if (v.is_object()) {
    out.push_back('{');
    bool first = true;
    for (const auto& [k, item] : v.items()) {
      if (!first) out += ", ";
      first = false;
      append_py_string(out, k);
      out += ": ";
      append_py_json(out, item);
    }
    out.push_back('}');
  } else if (v.is_boolean()) {
    out += v.get<bool>() ? "true" : "false";
  } else {
    out += v.dump();
  }
}

std::string join_languages(const std::vector<std::string>& langs) {
  std::string out;
  for (std::size_t i = 0; i < langs.size(); ++i) {
    if (i) out.push_back(',');
    out += langs[i];
  }
  return out;
}

const std::vector<std::string>& canonical_order() {
  static const std::vector<std::string> order = {
      "url",    "mime",   "mime-detected", "status",  "digest",    "length",
      "offset", "filename", "charset",     "languages", "redirect"};
  return order;
}

}  // namespace

std::string_view subset_name(Subset s) noexcept {
  switch (s) {
    case Subset::Warc: return "warc";
    case Subset::CrawlDiagnostics: return "crawldiagnostics";
    case Subset::RobotsTxt: return "robotstxt";
  }
  return "warc";
}

std::string_view urlkey_of_line(std::string_view line) noexcept {
  auto end = line.find_first_of(" \t");
  return end == std::string_view::npos ? line : line.substr(0, end);
}

IndexEntry parse_index_line(std::string_view line) {
  if (line.size() > kMaxLineBytes) malformed("line exceeds 1 MiB");
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

  auto sp1 = line.find(' ');
  if (sp1 == std::string_view::npos || sp1 == 0) malformed("missing urlkey separator");
  auto sp2 = line.find(' ', sp1 + 1);
  if (sp2 == std::string_view::npos) malformed("missing timestamp separator");

  IndexEntry e;
  e.urlkey = UrlKey(std::string(line.substr(0, sp1)));
  e.timestamp14 = std::string(line.substr(sp1 + 1, sp2 - sp1 - 1));
  parse_timestamp14(e.timestamp14);

  ordered_json record;
  try {
    record = ordered_json::parse(line.substr(sp2 + 1));
  } catch (const nlohmann::json::exception& ex) {
    malformed(std::string("metadata record: ") + ex.what());
  }
  if (!record.is_object()) malformed("metadata record is not an object");

  bool have_url = false, have_status = false, have_digest = false, have_length = false,
       have_offset = false, have_filename = false;
  for (const auto& [key, value] : record.items()) {
    e.field_order.push_back(key);
    if (key == "url") {
      e.url = text_field(value, key);
      have_url = true;
    } else if (key == "mime") {
      e.mime = text_field(value, key);
    } else if (key == "mime-detected") {
      e.mime_detected = text_field(value, key);
    } else if (key == "status") {
      std::string s = text_field(value, key);
      auto n = parse_u64(s);
      if (s.size() != 3 || !n || *n < 100) malformed("status '" + s + "' is not a 3-digit code");
      e.status = static_cast<int>(*n);
      have_status = true;
    } else if (key == "digest") {
      e.digest = text_field(value, key);
      if (e.digest.size() != 32 || !is_base32(e.digest)) malformed("digest is not 32 Base32 chars");
      have_digest = true;
    } else if (key == "length") {
      e.length = numeric_field(value, key);
      have_length = true;
    } else if (key == "offset") {
      e.offset = numeric_field(value, key);
      have_offset = true;
    } else if (key == "filename") {
      e.filename = text_field(value, key);
      have_filename = true;
    } else if (key == "charset") {
      e.charset = text_field(value, key);
    } else if (key == "languages") {
      e.languages = split_languages(text_field(value, key));
      if (e.languages.size() > 3) malformed("more than 3 languages");
      for (const auto& l : e.languages)
        if (l.empty()) malformed("empty language code");
    } else if (key == "redirect") {
      e.redirect = text_field(value, key);
    } else {
      e.extras.emplace_back(key, nlohmann::json(value));
    }
  }
  if (!(have_url && have_status && have_digest && have_length && have_offset && have_filename))
    malformed("metadata record lacks a mandatory field");
  if (e.length == 0) malformed("length must be positive");
  return e;
}

std::string to_line(const IndexEntry& e) {
  std::string out;
  out.reserve(256 + e.url.size() + e.filename.size());
  out += e.urlkey.str();
  out.push_back(' ');
  out += e.timestamp14;
  out += " {";

  const auto& order = e.field_order.empty() ? canonical_order() : e.field_order;
  bool first = true;
  auto emit = [&](std::string_view key, std::string_view value) {
    if (!first) out += ", ";
    first = false;
    append_py_string(out, key);
    out += ": ";
    append_py_string(out, value);
  };
  for (const auto& key : order) {
    if (key == "url") emit(key, e.url);
    else if (key == "mime") emit(key, e.mime);
    else if (key == "mime-detected") { if (e.mime_detected) emit(key, *e.mime_detected); }
    else if (key == "status") {
      char buf[8];
      std::snprintf(buf, sizeof buf, "%03d", e.status);
      emit(key, buf);
    }
    else if (key == "digest") emit(key, e.digest);
    else if (key == "length") emit(key, std::to_string(e.length));
    else if (key == "offset") emit(key, std::to_string(e.offset));
    else if (key == "filename") emit(key, e.filename);
    else if (key == "charset") { if (e.charset) emit(key, *e.charset); }
    else if (key == "languages") {
      if (!e.field_order.empty() || !e.languages.empty()) emit(key, join_languages(e.languages));
    }
    else if (key == "redirect") { if (e.redirect) emit(key, *e.redirect); }
    else {
      auto it = std::find_if(e.extras.begin(), e.extras.end(),
                             [&](const auto& kv) { return kv.first == key; });
      if (it != e.extras.end()) {
        if (!first) out += ", ";
        first = false;
        append_py_string(out, key);
        out += ": ";
        append_py_json(out, it->second);
      }
    }
  }
  if (e.field_order.empty()) {
    for (const auto& [key, value] : e.extras) {
      if (!first) out += ", ";
      first = false;
      append_py_string(out, key);
      out += ": ";
      append_py_json(out, value);
    }
  }
  out.push_back('}');
  return out;
}

bool is_shard_name(std::string_view name) noexcept {
  if (name.size() != 12 || !name.starts_with("cdx-") || !name.ends_with(".gz")) return false;
  unsigned n = 0;
  for (char c : name.substr(4, 5)) {
    if (c < '0' || c > '9') return false;
    n = n * 10 + static_cast<unsigned>(c - '0');
  }
  return n <= 299;
}

MasterIndexLine parse_master_line(std::string_view line) {
  if (line.size() > kMaxLineBytes) malformed("line exceeds 1 MiB");
  std::vector<std::string_view> f;
  std::size_t pos = 0;
  while (pos < line.size()) {
    pos = line.find_first_not_of(" \t\r\n", pos);
    if (pos == std::string_view::npos) break;
    auto end = line.find_first_of(" \t\r\n", pos);
    if (end == std::string_view::npos) end = line.size();
    f.push_back(line.substr(pos, end - pos));
    pos = end;
  }

  MasterIndexLine m;
  std::size_t i = 0;
  if (f.size() < 4 || f.size() > 6) malformed("master line needs 4-6 fields");
  m.first_urlkey = UrlKey(std::string(f[i++]));
  bool has_ts = is_timestamp14(f[1]);
  if (f.size() == 6 || (f.size() == 5 && has_ts)) {
    if (!has_ts) malformed("bad master timestamp");
    m.timestamp14 = std::string(f[i++]);
    parse_timestamp14(m.timestamp14);
  }
  m.shard_name = std::string(f[i++]);
  if (!is_shard_name(m.shard_name)) malformed("bad shard name '" + m.shard_name + "'");
  auto off = parse_u64(f[i++]);
  auto len = parse_u64(f[i++]);
  if (!off || !len) malformed("offset/length not integral");
  if (*len == 0) malformed("block length must be positive");
  m.block_offset = *off;
  m.block_length = *len;
  if (i < f.size()) {
    auto seq = parse_u64(f[i]);
    if (!seq) malformed("bad block sequence number");
    m.sequence = *seq;
  }
  return m;
}

std::string to_line(const MasterIndexLine& m) {
  std::string out = m.first_urlkey.str();
  if (!m.timestamp14.empty()) out += ' ' + m.timestamp14;
  out += ' ' + m.shard_name + ' ' + std::to_string(m.block_offset) + ' ' +
         std::to_string(m.block_length);
  if (m.sequence) out += ' ' + std::to_string(*m.sequence);
  return out;
}

std::optional<std::size_t> first_unsorted(std::span<const std::string> lines) {
  for (std::size_t i = 1; i < lines.size(); ++i)
    if (urlkey_of_line(lines[i]) < urlkey_of_line(lines[i - 1])) return i;
  return std::nullopt;
}

std::optional<std::size_t> first_unsorted(std::span<const MasterIndexLine> lines) {
  for (std::size_t i = 1; i < lines.size(); ++i)
    if (lines[i].first_urlkey < lines[i - 1].first_urlkey) return i;
  return std::nullopt;
}

SegmentRef segment_of(std::string_view filename) {
  constexpr std::string_view marker = "segments/";
  std::size_t pos = 0;
  while ((pos = filename.find(marker, pos)) != std::string_view::npos) {
    if (pos != 0 && filename[pos - 1] != '/') {
      pos += marker.size();
      continue;
    }
    std::size_t comp_start = pos + marker.size();
    std::size_t comp_end = filename.find('/', comp_start);
    if (comp_end == std::string_view::npos) break;
    std::string_view comp = filename.substr(comp_start, comp_end - comp_start);
    auto dot = comp.rfind('.');
    std::size_t sub_start = comp_end + 1;
    std::size_t sub_end = filename.find('/', sub_start);
    if (dot != std::string_view::npos && dot > 0 && comp.size() - dot == 3 &&
        sub_end != std::string_view::npos) {
      auto id = parse_u64(comp.substr(dot + 1));
      bool digits_before = std::all_of(comp.begin(), comp.begin() + static_cast<long>(dot),
                                       [](char c) { return c >= '0' && c <= '9'; });
      std::string_view sub = filename.substr(sub_start, sub_end - sub_start);
      if (id && digits_before && *id <= 99) {
        SegmentRef ref;
        ref.segment_id = static_cast<int>(*id);
        if (sub == "warc") ref.subset = Subset::Warc;
        else if (sub == "crawldiagnostics") ref.subset = Subset::CrawlDiagnostics;
        else if (sub == "robotstxt") ref.subset = Subset::RobotsTxt;
        else throw Error(Errc::NoSegmentPath, "unknown subset '" + std::string(sub) + "'");
        return ref;
      }
    }
    pos = comp_start;
  }
  throw Error(Errc::NoSegmentPath, "no segments/<id>.<nn>/ component in '" +
                                       std::string(filename) + "'");
}

}  // namespace ccseg
