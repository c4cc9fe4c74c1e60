#pragma once

#include <compare>
#include <ostream>
#include <string>
#include <string_view>

namespace ccseg {

/// Sort key of every index file: a host-reversed, lowercased URI.
/// Ordering is plain byte order, the same order the shards are sorted in.
class UrlKey {
 public:
  UrlKey() = default;
  explicit UrlKey(std::string value) : value_(std::move(value)) {}

  const std::string& str() const noexcept { return value_; }
  bool empty() const noexcept { return value_.empty(); }

  friend bool operator==(const UrlKey&, const UrlKey&) = default;
  friend std::strong_ordering operator<=>(const UrlKey& a, const UrlKey& b) noexcept {
    return a.value_.compare(b.value_) <=> 0;
  }
  friend std::ostream& operator<<(std::ostream& os, const UrlKey& k) { return os << k.value_; }

 private:
  std::string value_;
};

/// Canonicalizes an http(s) URI into a urlkey:
///   1. drop the scheme and "://"
///   2. lowercase A-Z everywhere (query included)
///   3. drop one leading "www." label
///   4. reverse the host labels, join with ',' and close with ')'
///   5. drop a path-final '/'
/// Userinfo and fragments are discarded; a port stays attached after the
/// reversed host ("com,example:8080)"). Throws Error{MissingScheme} or
/// Error{EmptyAuthority}.
UrlKey canonicalize(std::string_view uri);

}  // namespace ccseg
