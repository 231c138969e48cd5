#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <functional>

#include "slu/corpus.hpp"
#include "slu/utf8.hpp"
#include "support/oracles.hpp"

using namespace slu;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    std::string path = std::string("corpus_") + name;
    std::ofstream out(path, std::ios::binary);
    out << content;
    return path;
}

std::vector<std::string> chars_of(const std::string& text) { return utf8::split(text); }

// All segmentations of n characters = compositions of n.
void for_each_composition(int n, const std::function<void(const std::vector<int>&)>& fn) {
    std::vector<int> parts;
    std::function<void(int)> rec = [&](int remaining) {
        if (remaining == 0) {
            fn(parts);
            return;
        }
        for (int len = 1; len <= remaining; ++len) {
            parts.push_back(len);
            rec(remaining - len);
            parts.pop_back();
        }
    };
    rec(n);
}

}  // namespace

TEST_CASE("utf8 split handles CJK and ascii") {
    auto chars = chars_of("周冬雨ab");
    REQUIRE(chars.size() == 5);
    CHECK(chars[0] == "周");
    CHECK(chars[2] == "雨");
    CHECK(chars[3] == "a");
    CHECK(utf8::length("周冬雨有哪些电影") == 8);
}

TEST_CASE("parse_dataset_text reads blocks") {
    std::string content =
        "周 B-Artist\n冬 I-Artist\n雨 I-Artist\n有 O\n哪 O\n些 O\n电 O\n影 O\n=> QUERY\n";
    auto path = write_temp("basic.txt", content);
    auto utts = parse_dataset_text(path);
    REQUIRE(utts.size() == 1);
    CHECK(utts[0].chars.size() == 8);
    CHECK(utts[0].slot_tags.size() == 8);
    CHECK(utts[0].chars[0] == "周");
    CHECK(utts[0].slot_tags[0] == "B-Artist");
    CHECK(utts[0].slot_tags[3] == "O");
    CHECK(*utts[0].intent == "QUERY");
    std::remove(path.c_str());
}

TEST_CASE("parse_dataset_text: empty file, final blank line optional") {
    auto empty = write_temp("empty.txt", "");
    CHECK(parse_dataset_text(empty).empty());
    std::remove(empty.c_str());

    auto two = write_temp("two.txt", "a O\n=> X\n\nb O\n=> Y");
    auto utts = parse_dataset_text(two);
    REQUIRE(utts.size() == 2);
    CHECK(*utts[1].intent == "Y");
    std::remove(two.c_str());
}

TEST_CASE("parse_dataset_text errors name the line") {
    // 3 chars but one line has no tag
    auto path = write_temp("short.txt", "a O\nb O\nc\n=> X\n");
    CHECK_THROWS_WITH_AS(parse_dataset_text(path), doctest::Contains("line 3"), ParseError);
    std::remove(path.c_str());

    auto missing = write_temp("missing_intent.txt", "a O\nb O\n\n");
    CHECK_THROWS_AS(parse_dataset_text(missing), ParseError);
    std::remove(missing.c_str());

    auto badtag = write_temp("badtag.txt", "a Q-X\n=> X\n");
    CHECK_THROWS_WITH_AS(parse_dataset_text(badtag), doctest::Contains("line 1"), ParseError);
    std::remove(badtag.c_str());

    // BIOES-style tags are rejected at parse time
    auto bioes = write_temp("bioes.txt", "a S-X\n=> X\n");
    CHECK_THROWS_AS(parse_dataset_text(bioes), ParseError);
    std::remove(bioes.c_str());
}

TEST_CASE("parse_dataset_jsonl with optional gold words") {
    std::string content =
        R"({"chars": ["周", "冬", "雨"], "slots": ["B-A", "I-A", "I-A"], "intent": "Q", "words": ["周冬雨"]})"
        "\n"
        R"({"chars": ["有"], "slots": ["O"], "intent": "Q"})"
        "\n";
    auto path = write_temp("basic.jsonl", content);
    auto samples = parse_dataset_jsonl(path);
    REQUIRE(samples.size() == 2);
    CHECK(samples[0].words == std::vector<std::string>{"周冬雨"});
    CHECK(samples[1].words.empty());
    std::remove(path.c_str());

    auto bad = write_temp("bad.jsonl",
                          R"({"chars": ["a", "b"], "slots": ["O", "O"], "intent": "Q", "words": ["ax"]})"
                          "\n");
    CHECK_THROWS_AS(parse_dataset_jsonl(bad), ParseError);
    std::remove(bad.c_str());
}

TEST_CASE("align_chars_to_words reproduces the worked example") {
    auto chars = chars_of("周冬雨有哪些电影");
    std::vector<std::string> words = {"周冬雨", "有", "哪些", "电影"};
    auto alignment = align_chars_to_words(chars, words);
    CHECK(alignment == std::vector<int>{1, 1, 1, 2, 3, 3, 4, 4});
    // f_align(3) = 1, f_align(4) = 2, f_align(6) = 3 with 1-based positions
    CHECK(alignment[2] == 1);
    CHECK(alignment[3] == 2);
    CHECK(alignment[5] == 3);
}

TEST_CASE("align_chars_to_words trivial covers") {
    auto chars = chars_of("电影院");
    CHECK(align_chars_to_words(chars, {"电影院"}) == std::vector<int>{1, 1, 1});
    CHECK(align_chars_to_words(chars, {"电", "影", "院"}) == std::vector<int>{1, 2, 3});
}

TEST_CASE("align_chars_to_words rejects mismatches with position") {
    auto chars = chars_of("ab");
    CHECK_THROWS_WITH_AS(align_chars_to_words(chars, {"a", "c"}),
                         doctest::Contains("character 2"), AlignmentError);
    CHECK_THROWS_AS(align_chars_to_words(chars, {"a"}), AlignmentError);
    CHECK_THROWS_AS(align_chars_to_words(chars, {"a", "b", "c"}), AlignmentError);
}

TEST_CASE("alignment agrees with the cumulative-length oracle, exhaustive to length 8") {
    // Alphabet of multi-byte characters to keep UTF-8 honest.
    std::vector<std::string> alphabet = chars_of("零一二三四五六七");
    for (int n = 1; n <= 8; ++n) {
        std::vector<std::string> chars(alphabet.begin(), alphabet.begin() + n);
        for_each_composition(n, [&](const std::vector<int>& parts) {
            std::vector<std::string> words;
            int pos = 0;
            for (int len : parts) {
                std::string w;
                for (int k = 0; k < len; ++k) w += chars[static_cast<std::size_t>(pos + k)];
                words.push_back(w);
                pos += len;
            }
            auto expected = slu::testing::align_oracle(words);
            auto actual = align_chars_to_words(chars, words);
            REQUIRE(actual == expected);
            // Round-trip: chars[t] sits at the right offset of its word.
            std::vector<int> seen_of_word(words.size(), 0);
            for (int t = 0; t < n; ++t) {
                int w = actual[static_cast<std::size_t>(t)] - 1;
                auto wchars = utf8::split(words[static_cast<std::size_t>(w)]);
                REQUIRE(chars[static_cast<std::size_t>(t)] ==
                        wchars[static_cast<std::size_t>(seen_of_word[static_cast<std::size_t>(w)]++)]);
            }
        });
    }
}

TEST_CASE("build_vocabularies first-seen order and duplicates") {
    AlignedSample s;
    s.utterance.chars = {"a", "b"};
    s.utterance.slot_tags = {"B-X", "O"};
    s.utterance.intent = "Q";
    s.words = {"ab"};
    s.alignment = {1, 1};

    auto v1 = build_vocabularies({s});
    CHECK(v1.char_vocab.size() == 4);  // pad, unk, a, b
    CHECK(v1.char_vocab.index("a") == 2);
    CHECK(v1.char_vocab.index("b") == 3);
    CHECK(v1.word_vocab.size() == 3);
    CHECK(v1.slot_vocab.size() == 2);
    CHECK(v1.intent_vocab.size() == 1);

    auto v2 = build_vocabularies({s, s});  // duplicates change nothing
    CHECK(v2.char_vocab.size() == v1.char_vocab.size());
    CHECK(v2.word_vocab.size() == v1.word_vocab.size());
    CHECK(v2.slot_vocab.size() == v1.slot_vocab.size());
    CHECK(v2.intent_vocab.size() == v1.intent_vocab.size());

    CHECK_THROWS_AS(build_vocabularies({}), ContractError);
}

TEST_CASE("encode_sample: lookups, oov, unseen labels") {
    AlignedSample train;
    train.utterance.chars = {"a", "b"};
    train.utterance.slot_tags = {"B-X", "O"};
    train.utterance.intent = "Q";
    train.words = {"a", "b"};
    train.alignment = {1, 2};
    auto vocabs = build_vocabularies({train});

    auto enc = encode_sample(train, vocabs);
    CHECK(enc.char_ids == std::vector<int>{2, 3});
    CHECK(enc.word_ids == std::vector<int>{2, 3});
    CHECK(enc.slot_ids == std::vector<int>{0, 1});
    CHECK(*enc.intent_id == 0);

    AlignedSample oov = train;
    oov.utterance.chars = {"a", "z"};
    oov.words = {"a", "z"};
    auto enc_oov = encode_sample(oov, vocabs);
    CHECK(enc_oov.char_ids == std::vector<int>{2, Vocab::kUnk});
    CHECK(enc_oov.word_ids == std::vector<int>{2, Vocab::kUnk});

    AlignedSample bad_slot = train;
    bad_slot.utterance.slot_tags = {"B-Y", "O"};
    CHECK_THROWS_WITH_AS(encode_sample(bad_slot, vocabs), doctest::Contains("B-Y"), EncodingError);

    AlignedSample bad_intent = train;
    bad_intent.utterance.intent = "UNSEEN";
    CHECK_THROWS_WITH_AS(encode_sample(bad_intent, vocabs), doctest::Contains("UNSEEN"),
                         EncodingError);
}

TEST_CASE("parse -> encode -> decode reproduces non-OOV samples") {
    std::string content = "周 B-Artist\n冬 I-Artist\n有 O\n=> QUERY\n\n电 B-Film\n影 I-Film\n=> PLAY\n";
    auto path = write_temp("roundtrip.txt", content);
    auto utts = parse_dataset_text(path);
    std::remove(path.c_str());

    std::vector<AlignedSample> samples;
    for (auto& u : utts) {
        AlignedSample s;
        s.utterance = u;
        s.words = u.chars;  // identity segmentation
        s.alignment = align_chars_to_words(u.chars, s.words);
        samples.push_back(std::move(s));
    }
    auto vocabs = build_vocabularies(samples);
    for (const auto& s : samples) {
        auto enc = encode_sample(s, vocabs);
        for (std::size_t t = 0; t < enc.char_ids.size(); ++t)
            CHECK(vocabs.char_vocab.symbol(enc.char_ids[t]) == s.utterance.chars[t]);
        for (std::size_t t = 0; t < enc.word_ids.size(); ++t)
            CHECK(vocabs.word_vocab.symbol(enc.word_ids[t]) == s.words[t]);
        for (std::size_t t = 0; t < enc.slot_ids.size(); ++t)
            CHECK(vocabs.slot_vocab.symbol(enc.slot_ids[t]) == s.utterance.slot_tags[t]);
        CHECK(vocabs.intent_vocab.symbol(*enc.intent_id) == *s.utterance.intent);
    }
}
