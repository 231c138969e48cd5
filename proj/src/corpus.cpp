#include "slu/corpus.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "slu/utf8.hpp"

namespace slu {

bool is_valid_bio_tag(const std::string& tag) {
    if (tag == "O") return true;
    if (tag.size() < 3) return false;
    if (tag[0] != 'B' && tag[0] != 'I') return false;
    return tag[1] == '-';
}

Vocab::Vocab(bool has_specials) : has_specials_(has_specials) {
    if (has_specials_) {
        add("<pad>");
        add("<unk>");
    }
}

int Vocab::add(const std::string& symbol) {
    auto it = index_.find(symbol);
    if (it != index_.end()) return it->second;
    int id = static_cast<int>(symbols_.size());
    symbols_.push_back(symbol);
    index_.emplace(symbol, id);
    return id;
}

int Vocab::index(const std::string& symbol) const {
    auto it = index_.find(symbol);
    if (it != index_.end()) return it->second;
    return has_specials_ ? kUnk : -1;
}

bool Vocab::contains(const std::string& symbol) const {
    return index_.find(symbol) != index_.end();
}

const std::string& Vocab::symbol(int index) const {
    if (index < 0 || index >= size())
        throw ContractError("vocab index out of range: " + std::to_string(index));
    return symbols_[static_cast<std::size_t>(index)];
}

namespace {

void finish_block(std::vector<Utterance>& out, Utterance& utt, bool& intent_seen,
                  int block_start_line) {
    if (utt.chars.empty() && !intent_seen) return;  // nothing accumulated
    if (!intent_seen)
        throw ParseError("missing intent line for block starting at line " +
                         std::to_string(block_start_line));
    if (utt.chars.empty())
        throw ParseError("block at line " + std::to_string(block_start_line) +
                         " has an intent but no characters");
    out.push_back(std::move(utt));
    utt = Utterance{};
    intent_seen = false;
}

}  // namespace

std::vector<Utterance> parse_dataset_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset file: " + path);

    std::vector<Utterance> out;
    Utterance current;
    bool intent_seen = false;
    int block_start = 1;
    int line_no = 0;
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            finish_block(out, current, intent_seen, block_start);
            block_start = line_no + 1;
            continue;
        }
        if (intent_seen)
            throw ParseError("line " + std::to_string(line_no) +
                             ": content after intent line without blank separator");
        if (line.rfind("=> ", 0) == 0) {
            std::string intent = line.substr(3);
            if (intent.empty())
                throw ParseError("line " + std::to_string(line_no) + ": empty intent label");
            current.intent = intent;
            intent_seen = true;
            continue;
        }
        auto space = line.find(' ');
        if (space == std::string::npos || space == 0 || space + 1 >= line.size())
            throw ParseError("line " + std::to_string(line_no) +
                             ": expected \"<char> <tag>\", got \"" + line + "\"");
        std::string ch = line.substr(0, space);
        std::string tag = line.substr(space + 1);
        if (utf8::length(ch) != 1)
            throw ParseError("line " + std::to_string(line_no) +
                             ": character field must be a single code point, got \"" + ch + "\"");
        if (!is_valid_bio_tag(tag))
            throw ParseError("line " + std::to_string(line_no) + ": unknown tag shape \"" + tag +
                             "\" (expected O, B-<type> or I-<type>)");
        current.chars.push_back(ch);
        current.slot_tags.push_back(tag);
    }
    finish_block(out, current, intent_seen, block_start);
    return out;
}

std::vector<JsonlSample> parse_dataset_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset file: " + path);

    std::vector<JsonlSample> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
        }
        JsonlSample sample;
        if (!j.contains("chars") || !j["chars"].is_array())
            throw ParseError("line " + std::to_string(line_no) + ": missing \"chars\" array");
        for (const auto& c : j["chars"]) sample.utterance.chars.push_back(c.get<std::string>());
        if (sample.utterance.chars.empty())
            throw ParseError("line " + std::to_string(line_no) + ": empty \"chars\" array");
        if (j.contains("slots")) {
            for (const auto& t : j["slots"]) {
                std::string tag = t.get<std::string>();
                if (!is_valid_bio_tag(tag))
                    throw ParseError("line " + std::to_string(line_no) + ": unknown tag shape \"" +
                                     tag + "\"");
                sample.utterance.slot_tags.push_back(tag);
            }
            if (sample.utterance.slot_tags.size() != sample.utterance.chars.size())
                throw ParseError("line " + std::to_string(line_no) + ": " +
                                 std::to_string(sample.utterance.chars.size()) + " chars but " +
                                 std::to_string(sample.utterance.slot_tags.size()) + " slot tags");
        }
        if (j.contains("intent")) sample.utterance.intent = j["intent"].get<std::string>();
        if (j.contains("words")) {
            for (const auto& w : j["words"]) sample.words.push_back(w.get<std::string>());
            try {
                align_chars_to_words(sample.utterance.chars, sample.words);
            } catch (const AlignmentError& e) {
                throw ParseError("line " + std::to_string(line_no) +
                                 ": \"words\" do not cover \"chars\": " + e.what());
            }
        }
        out.push_back(std::move(sample));
    }
    return out;
}

std::vector<JsonlSample> parse_dataset(const std::string& path) {
    auto ends_with = [&](const char* suffix) {
        std::string s(suffix);
        return path.size() >= s.size() && path.compare(path.size() - s.size(), s.size(), s) == 0;
    };
    if (ends_with(".jsonl") || ends_with(".json")) return parse_dataset_jsonl(path);
    std::vector<JsonlSample> out;
    for (auto& utt : parse_dataset_text(path)) out.push_back(JsonlSample{std::move(utt), {}});
    return out;
}

std::vector<int> align_chars_to_words(const std::vector<std::string>& chars,
                                      const std::vector<std::string>& words) {
    std::vector<int> alignment;
    alignment.reserve(chars.size());
    std::size_t t = 0;
    for (std::size_t w = 0; w < words.size(); ++w) {
        for (const auto& wc : utf8::split(words[w])) {
            if (t >= chars.size())
                throw AlignmentError("words are longer than the character sequence (diverges at character " +
                                     std::to_string(chars.size() + 1) + ")");
            if (chars[t] != wc)
                throw AlignmentError("word/character mismatch at character " + std::to_string(t + 1) +
                                     ": \"" + chars[t] + "\" vs \"" + wc + "\"");
            alignment.push_back(static_cast<int>(w) + 1);
            ++t;
        }
    }
    if (t != chars.size())
        throw AlignmentError("words cover only " + std::to_string(t) + " of " +
                             std::to_string(chars.size()) + " characters (diverges at character " +
                             std::to_string(t + 1) + ")");
    return alignment;
}

Vocabularies build_vocabularies(const std::vector<AlignedSample>& train) {
    if (train.empty()) throw ContractError("build_vocabularies: empty training set");
    Vocabularies v;
    for (const auto& s : train) {
        if (!s.utterance.has_gold())
            throw ContractError("build_vocabularies: training sample without gold labels");
        for (const auto& c : s.utterance.chars) v.char_vocab.add(c);
        for (const auto& w : s.words) v.word_vocab.add(w);
        for (const auto& t : s.utterance.slot_tags) v.slot_vocab.add(t);
        v.intent_vocab.add(*s.utterance.intent);
    }
    return v;
}

EncodedSample encode_sample(const AlignedSample& sample, const Vocabularies& vocabs) {
    EncodedSample enc;
    enc.char_ids.reserve(sample.utterance.chars.size());
    for (const auto& c : sample.utterance.chars) enc.char_ids.push_back(vocabs.char_vocab.index(c));
    enc.word_ids.reserve(sample.words.size());
    for (const auto& w : sample.words) enc.word_ids.push_back(vocabs.word_vocab.index(w));
    enc.alignment = sample.alignment;
    if (!sample.utterance.slot_tags.empty()) {
        for (const auto& t : sample.utterance.slot_tags) {
            if (!vocabs.slot_vocab.contains(t))
                throw EncodingError("slot label not in training vocabulary: \"" + t + "\"");
            enc.slot_ids.push_back(vocabs.slot_vocab.index(t));
        }
    }
    if (sample.utterance.intent) {
        if (!vocabs.intent_vocab.contains(*sample.utterance.intent))
            throw EncodingError("intent label not in training vocabulary: \"" +
                                *sample.utterance.intent + "\"");
        enc.intent_id = vocabs.intent_vocab.index(*sample.utterance.intent);
    }
    return enc;
}

}  // namespace slu
