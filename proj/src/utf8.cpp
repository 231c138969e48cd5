#include "slu/utf8.hpp"

namespace slu::utf8 {

namespace {

// Length of the UTF-8 sequence starting at byte b (1 for continuation/invalid
// bytes so that broken input degrades to byte-sized units).
inline int seq_len(unsigned char b) {
    if (b < 0x80) return 1;
    if ((b & 0xE0) == 0xC0) return 2;
    if ((b & 0xF0) == 0xE0) return 3;
    if ((b & 0xF8) == 0xF0) return 4;
    return 1;
}

}  // namespace

std::vector<std::string> split(const std::string& text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        std::size_t n = static_cast<std::size_t>(seq_len(static_cast<unsigned char>(text[i])));
        if (i + n > text.size()) n = 1;
        out.emplace_back(text, i, n);
        i += n;
    }
    return out;
}

std::size_t length(const std::string& text) {
    std::size_t count = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        std::size_t n = static_cast<std::size_t>(seq_len(static_cast<unsigned char>(text[i])));
        if (i + n > text.size()) n = 1;
        i += n;
        ++count;
    }
    return count;
}

}  // namespace slu::utf8
