#include <doctest.h>

#include "ccseg/error.hpp"
#include "ccseg/surt.hpp"
#include "support.hpp"

using ccseg::canonicalize;
using ccseg::Errc;

TEST_CASE("published example") {
  CHECK(canonicalize("https://www.w3.org/TR/xml/").str() == "org,w3)/tr/xml");
}

TEST_CASE("rules applied in order") {
  CHECK(canonicalize("http://example.com/").str() == "com,example)");
  CHECK(canonicalize("HTTPS://WWW.Sub.Example.COM/A/B?Q=1").str() == "com,example,sub)/a/b?q=1");
  CHECK(canonicalize("http://example.com").str() == "com,example)");
  CHECK(canonicalize("https://www.w3.org/TR/tr.xml").str() == "org,w3)/tr/tr.xml");
}

TEST_CASE("www is stripped once, only as a leading label") {
  CHECK(canonicalize("http://www.www.example.com/").str() == "com,example,www)");
  CHECK(canonicalize("http://wwwexample.com/").str() == "com,wwwexample)");
  CHECK(canonicalize("http://sub.www.example.com/").str() == "com,example,www,sub)");
}

TEST_CASE("port, userinfo and fragment") {
  CHECK(canonicalize("http://example.com:8080/a").str() == "com,example:8080)/a");
  CHECK(canonicalize("http://user:pw@example.com/a").str() == "com,example)/a");
  CHECK(canonicalize("http://example.com/a#frag").str() == "com,example)/a");
}

TEST_CASE("only a path-final slash is removed") {
  CHECK(canonicalize("http://example.com/a/").str() == "com,example)/a");
  CHECK(canonicalize("http://example.com/a/?x=/").str() == "com,example)/a?x=/");
  CHECK(canonicalize("http://example.com/a//").str() == "com,example)/a");
  CHECK(canonicalize("http://example.com/?q=1").str() == "com,example)?q=1");
}

TEST_CASE("errors") {
  CHECK_ERRC(canonicalize("notaurl"), Errc::MissingScheme);
  CHECK_ERRC(canonicalize("ftp://example.com/"), Errc::MissingScheme);
  CHECK_ERRC(canonicalize("http:///path"), Errc::EmptyAuthority);
  CHECK_ERRC(canonicalize("https://"), Errc::EmptyAuthority);
}

namespace {

std::string random_label(std::mt19937_64& rng) {
  static const std::string chars = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789-";
  std::string s;
  std::size_t n = 1 + rng() % 8;
  for (std::size_t i = 0; i < n; ++i) s.push_back(chars[rng() % (chars.size() - 1)]);
  return s;
}

std::string random_uri(std::mt19937_64& rng, const std::string& host) {
  static const std::string chars = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789-._~%/";
  std::string uri = (rng() % 2 ? "https://" : "http://") + std::string(rng() % 3 == 0 ? "www." : "") + host;
  std::size_t n = rng() % 20;
  if (n) uri += "/";
  for (std::size_t i = 0; i < n; ++i) uri.push_back(chars[rng() % chars.size()]);
  if (rng() % 4 == 0) uri += "?k=" + random_label(rng);
  if (rng() % 5 == 0) uri += "/";
  return uri;
}

}  // namespace

TEST_CASE("urlkey invariants over random URIs") {
  std::mt19937_64 rng(42);
  for (int i = 0; i < 2000; ++i) {
    std::string host = random_label(rng);
    for (std::size_t k = rng() % 3; k > 0; --k) host += "." + random_label(rng);
    std::string uri = random_uri(rng, host);
    std::string key = canonicalize(uri).str();
    INFO(uri << " -> " << key);
    CHECK(key.rfind("http://", 0) != 0);
    CHECK(key.rfind("https://", 0) != 0);
    CHECK(std::none_of(key.begin(), key.end(), [](char c) { return c >= 'A' && c <= 'Z'; }));
    std::string authority = key.substr(0, key.find('/'));
    CHECK(std::count(authority.begin(), authority.end(), ')') == 1);
    CHECK(authority.find('.') == std::string::npos);
    bool query = key.find('?') != std::string::npos;
    if (!query) CHECK(key.back() != '/');

    // same host -> same prefix through ")"
    std::string other = canonicalize(random_uri(rng, host)).str();
    CHECK(other.substr(0, other.find(')') + 1) == key.substr(0, key.find(')') + 1));
  }
}

TEST_CASE("byte order") {
  CHECK(ccseg::UrlKey("org,w3)/tr/tr.xml") < ccseg::UrlKey("org,w3)/tr/xml"));
  CHECK(ccseg::UrlKey("com,a)") < ccseg::UrlKey("com,a)/"));
}
