#pragma once

#include <string>
#include <unordered_set>
#include <vector>

#include "slu/errors.hpp"

namespace slu {

struct SegmentationDictionary {
    std::unordered_set<std::string> words;
    int max_word_len = 0;  // in code points

    bool empty() const { return words.empty(); }
};

enum class SegmenterBackend { kDictionary, kRemote, kIdentity };

SegmenterBackend segmenter_backend_from_string(const std::string& name);
std::string to_string(SegmenterBackend backend);

struct SegmenterConfig {
    SegmenterBackend backend = SegmenterBackend::kDictionary;
    std::string dictionary_path;  // dictionary backend
    std::string endpoint_url;     // remote backend, e.g. http://host:port/segment
    int timeout_ms = 5000;        // remote backend
};

// Loads a one-word-per-line UTF-8 dictionary. Blank lines are skipped,
// duplicates collapse. An empty file yields an empty dictionary (greedy
// matching then degrades to one word per character).
SegmentationDictionary load_dictionary(const std::string& path);

SegmentationDictionary dictionary_from_words(const std::vector<std::string>& words);

// Forward greedy longest match with single-character fallback.
std::vector<std::string> segment_with_dictionary(const std::vector<std::string>& chars,
                                                 const SegmentationDictionary& dict);

// Stateless segmenter interface over the configured backend. The dictionary
// is loaded once at construction; remote calls happen per request.
class Segmenter {
  public:
    explicit Segmenter(SegmenterConfig config);
    Segmenter(SegmenterConfig config, SegmentationDictionary dict);

    // Splits text into words. Every backend's output is validated to
    // concatenate back to the input before it is returned.
    std::vector<std::string> segment(const std::string& text) const;
    std::vector<std::string> segment(const std::vector<std::string>& chars) const;

    const SegmenterConfig& config() const { return config_; }
    const SegmentationDictionary& dictionary() const { return dict_; }

  private:
    std::vector<std::string> segment_remote(const std::string& text) const;

    SegmenterConfig config_;
    SegmentationDictionary dict_;
};

}  // namespace slu
