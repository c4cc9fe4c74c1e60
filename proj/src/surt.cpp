#include "ccseg/surt.hpp"

#include <algorithm>
#include <vector>

#include "ccseg/error.hpp"

namespace ccseg {

namespace {

char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i)
    if (ascii_lower(s[i]) != prefix[i]) return false;
  return true;
}

}  // namespace

UrlKey canonicalize(std::string_view uri) {
  std::string_view rest;
  if (starts_with_ci(uri, "https://")) {
    rest = uri.substr(8);
  } else if (starts_with_ci(uri, "http://")) {
    rest = uri.substr(7);
  } else {
    throw Error(Errc::MissingScheme, "no http(s):// prefix in '" + std::string(uri) + "'");
  }

  if (auto hash = rest.find('#'); hash != std::string_view::npos) rest = rest.substr(0, hash);

  std::string s(rest);
  std::transform(s.begin(), s.end(), s.begin(), ascii_lower);

  std::size_t auth_end = s.find_first_of("/?");
  if (auth_end == std::string::npos) auth_end = s.size();
  std::string_view authority(s.data(), auth_end);
  std::string_view tail(s.data() + auth_end, s.size() - auth_end);

  if (auto at = authority.rfind('@'); at != std::string_view::npos) authority.remove_prefix(at + 1);

  std::string_view host = authority;
  std::string_view port;
  if (!host.empty() && host.front() != '[') {
    if (auto colon = host.rfind(':'); colon != std::string_view::npos) {
      port = host.substr(colon);
      host = host.substr(0, colon);
    }
  } else if (auto close = host.find(']'); close != std::string_view::npos) {
    port = host.substr(close + 1);
    host = host.substr(0, close + 1);
  }

  if (host.starts_with("www.")) host.remove_prefix(4);

  std::vector<std::string_view> labels;
  std::size_t start = 0;
  while (start <= host.size()) {
    std::size_t dot = host.find('.', start);
    if (dot == std::string_view::npos) dot = host.size();
    if (dot > start) labels.push_back(host.substr(start, dot - start));
    start = dot + 1;
  }
  if (labels.empty())
    throw Error(Errc::EmptyAuthority, "no host in '" + std::string(uri) + "'");

  std::string key;
  key.reserve(s.size() + 2);
  for (auto it = labels.rbegin(); it != labels.rend(); ++it) {
    if (it != labels.rbegin()) key.push_back(',');
    key.append(*it);
  }
  key.append(port);
  key.push_back(')');

  std::string_view path = tail;
  std::string_view query;
  if (auto q = tail.find('?'); q != std::string_view::npos) {
    path = tail.substr(0, q);
    query = tail.substr(q);
  }
  while (path.ends_with('/')) path.remove_suffix(1);
  key.append(path);
  key.append(query);
  return UrlKey(std::move(key));
}

}  // namespace ccseg
