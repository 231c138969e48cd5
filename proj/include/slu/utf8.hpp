#pragma once

#include <string>
#include <vector>

namespace slu::utf8 {

// Splits a UTF-8 string into one std::string per code point.
// Malformed bytes are kept as single-byte units rather than rejected;
// dataset files are validated elsewhere.
std::vector<std::string> split(const std::string& text);

// Number of code points in a UTF-8 string.
std::size_t length(const std::string& text);

}  // namespace slu::utf8
