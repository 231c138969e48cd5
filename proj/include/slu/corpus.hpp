#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "slu/errors.hpp"

namespace slu {

// One utterance: characters (code points), optional gold BIO tags, optional
// gold intent. Tags, when present, pair 1:1 with characters.
struct Utterance {
    std::vector<std::string> chars;
    std::vector<std::string> slot_tags;  // empty when prediction-only
    std::optional<std::string> intent;

    bool has_gold() const { return !slot_tags.empty() && intent.has_value(); }
};

// An utterance plus its word segmentation and char->word alignment.
// alignment is 1-based: alignment[t] is the index of the word containing
// character t (weights and graphs convert to 0-based internally).
struct AlignedSample {
    Utterance utterance;
    std::vector<std::string> words;
    std::vector<int> alignment;
};

// Returns true if tag is O, B-<type> or I-<type> with a non-empty type.
bool is_valid_bio_tag(const std::string& tag);

// Symbol <-> dense index table. When has_specials is set, index 0 is <pad>
// and index 1 is <unk>, and lookups of unseen symbols return unk.
class Vocab {
  public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;

    explicit Vocab(bool has_specials);

    // Adds symbol if absent; returns its index.
    int add(const std::string& symbol);
    // Index lookup. Unseen symbols: <unk> when specials exist, -1 otherwise.
    int index(const std::string& symbol) const;
    bool contains(const std::string& symbol) const;
    const std::string& symbol(int index) const;
    int size() const { return static_cast<int>(symbols_.size()); }
    bool has_specials() const { return has_specials_; }
    const std::vector<std::string>& symbols() const { return symbols_; }

  private:
    bool has_specials_;
    std::vector<std::string> symbols_;
    std::unordered_map<std::string, int> index_;
};

struct Vocabularies {
    Vocab char_vocab{true};
    Vocab word_vocab{true};
    Vocab slot_vocab{false};
    Vocab intent_vocab{false};
};

// Integer-encoded sample ready for the model.
struct EncodedSample {
    std::vector<int> char_ids;
    std::vector<int> word_ids;
    std::vector<int> alignment;            // 1-based, as in AlignedSample
    std::vector<int> slot_ids;             // empty when no gold
    std::optional<int> intent_id;
};

// Parses the block text format: lines "<char> <tag>", a line "=> <intent>",
// blank line between samples. Errors carry 1-based line numbers.
std::vector<Utterance> parse_dataset_text(const std::string& path);

// Parses the JSON-lines format:
//   {"chars": [...], "slots": [...], "intent": "...", "words": [...]}
// "words" is optional; when present it is validated against chars and kept
// so a corpus can carry gold segmentations.
struct JsonlSample {
    Utterance utterance;
    std::vector<std::string> words;  // empty when absent
};
std::vector<JsonlSample> parse_dataset_jsonl(const std::string& path);

// Dispatches on extension: .jsonl/.json -> JSON lines, anything else -> text.
std::vector<JsonlSample> parse_dataset(const std::string& path);

// alignment[t] = 1-based index of the word containing character t.
// Validates that concatenating words reproduces chars.
std::vector<int> align_chars_to_words(const std::vector<std::string>& chars,
                                      const std::vector<std::string>& words);

// First-seen-order vocabularies over a training set. All samples must carry
// gold tags and intents.
Vocabularies build_vocabularies(const std::vector<AlignedSample>& train);

// Encodes one sample. Unseen chars/words map to <unk>; an unseen gold slot
// or intent label is an error naming the label.
EncodedSample encode_sample(const AlignedSample& sample, const Vocabularies& vocabs);

}  // namespace slu
