#pragma once

#include <string>
#include <string_view>

namespace ccseg {

/// Inflates exactly one gzip member. Throws Error{BadGzipMember} when the
/// bytes are not a complete member or carry trailing bytes after it.
std::string gunzip_member(std::string_view bytes);

/// Compresses `data` into a single self-contained gzip member. The header
/// mtime is zero so output depends only on the input.
std::string gzip_member(std::string_view data, int level = 6);

}  // namespace ccseg
