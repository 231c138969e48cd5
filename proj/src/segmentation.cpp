#include "slu/segmentation.hpp"

#include <algorithm>
#include <fstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "slu/utf8.hpp"

namespace slu {

SegmenterBackend segmenter_backend_from_string(const std::string& name) {
    if (name == "dictionary") return SegmenterBackend::kDictionary;
    if (name == "remote") return SegmenterBackend::kRemote;
    if (name == "identity") return SegmenterBackend::kIdentity;
    throw ConfigError("unknown segmenter backend: \"" + name +
                      "\" (expected dictionary, remote or identity)");
}

std::string to_string(SegmenterBackend backend) {
    switch (backend) {
        case SegmenterBackend::kDictionary: return "dictionary";
        case SegmenterBackend::kRemote: return "remote";
        case SegmenterBackend::kIdentity: return "identity";
    }
    return "dictionary";
}

SegmentationDictionary load_dictionary(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dictionary file: " + path);
    SegmentationDictionary dict;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        dict.max_word_len = std::max(dict.max_word_len, static_cast<int>(utf8::length(line)));
        dict.words.insert(std::move(line));
    }
    return dict;
}

SegmentationDictionary dictionary_from_words(const std::vector<std::string>& words) {
    SegmentationDictionary dict;
    for (const auto& w : words) {
        if (w.empty()) continue;
        dict.max_word_len = std::max(dict.max_word_len, static_cast<int>(utf8::length(w)));
        dict.words.insert(w);
    }
    return dict;
}

std::vector<std::string> segment_with_dictionary(const std::vector<std::string>& chars,
                                                 const SegmentationDictionary& dict) {
    std::vector<std::string> words;
    std::size_t n = chars.size();
    std::size_t i = 0;
    while (i < n) {
        std::size_t best = 1;
        std::size_t cap = std::min<std::size_t>(static_cast<std::size_t>(std::max(dict.max_word_len, 1)),
                                                n - i);
        std::string candidate;
        for (std::size_t len = cap; len >= 2; --len) {
            candidate.clear();
            for (std::size_t k = 0; k < len; ++k) candidate += chars[i + k];
            if (dict.words.count(candidate)) {
                best = len;
                break;
            }
        }
        std::string word;
        for (std::size_t k = 0; k < best; ++k) word += chars[i + k];
        words.push_back(std::move(word));
        i += best;
    }
    return words;
}

Segmenter::Segmenter(SegmenterConfig config) : config_(std::move(config)) {
    if (config_.backend == SegmenterBackend::kDictionary && !config_.dictionary_path.empty())
        dict_ = load_dictionary(config_.dictionary_path);
    if (config_.backend == SegmenterBackend::kRemote && config_.endpoint_url.empty())
        throw ConfigError("remote segmenter backend requires an endpoint_url");
}

Segmenter::Segmenter(SegmenterConfig config, SegmentationDictionary dict)
    : config_(std::move(config)), dict_(std::move(dict)) {}

std::vector<std::string> Segmenter::segment(const std::string& text) const {
    return segment(utf8::split(text));
}

std::vector<std::string> Segmenter::segment(const std::vector<std::string>& chars) const {
    if (chars.empty()) throw ContractError("segment: empty input text");
    std::vector<std::string> words;
    switch (config_.backend) {
        case SegmenterBackend::kIdentity:
            words.assign(chars.begin(), chars.end());
            break;
        case SegmenterBackend::kDictionary:
            words = segment_with_dictionary(chars, dict_);
            break;
        case SegmenterBackend::kRemote: {
            std::string text;
            for (const auto& c : chars) text += c;
            words = segment_remote(text);
            break;
        }
    }
    // Lossless-cover check before anything downstream sees the words.
    std::size_t t = 0;
    for (const auto& w : words) {
        if (w.empty())
            throw SegmentationError("segmenter produced an empty word");
        for (const auto& wc : utf8::split(w)) {
            if (t >= chars.size() || chars[t] != wc)
                throw SegmentationError(
                    "segmenter output does not concatenate back to the input (mismatch at character " +
                    std::to_string(t + 1) + ")");
            ++t;
        }
    }
    if (t != chars.size())
        throw SegmentationError("segmenter output covers only " + std::to_string(t) + " of " +
                                std::to_string(chars.size()) + " characters");
    return words;
}

std::vector<std::string> Segmenter::segment_remote(const std::string& text) const {
    // Protocol: POST {"text": ...} -> 200 with {"words": [...]}.
    std::string url = config_.endpoint_url;
    std::string scheme_host;
    std::string path = "/";
    auto scheme_end = url.find("://");
    std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    auto path_start = url.find('/', host_start);
    if (path_start == std::string::npos) {
        scheme_host = url;
    } else {
        scheme_host = url.substr(0, path_start);
        path = url.substr(path_start);
    }

    httplib::Client client(scheme_host);
    client.set_connection_timeout(0, config_.timeout_ms * 1000);
    client.set_read_timeout(0, config_.timeout_ms * 1000);

    nlohmann::json body;
    body["text"] = text;
    auto res = client.Post(path, body.dump(), "application/json");
    if (!res)
        throw SegmentationError("remote segmenter unreachable: " + config_.endpoint_url + " (" +
                                httplib::to_string(res.error()) + ")");
    if (res->status != 200)
        throw SegmentationError("remote segmenter returned HTTP " + std::to_string(res->status));
    nlohmann::json parsed;
    try {
        parsed = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
        throw SegmentationError(std::string("remote segmenter returned invalid JSON: ") + e.what());
    }
    if (!parsed.contains("words") || !parsed["words"].is_array())
        throw SegmentationError("remote segmenter response is missing the \"words\" array");
    std::vector<std::string> words;
    for (const auto& w : parsed["words"]) {
        if (!w.is_string())
            throw SegmentationError("remote segmenter response contains a non-string word");
        words.push_back(w.get<std::string>());
    }
    return words;
}

}  // namespace slu
