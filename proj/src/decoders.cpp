#include "slu/decoders.hpp"

namespace slu {

AblationMode ablation_from_string(const std::string& name) {
    if (name == "full") return AblationMode::kFull;
    if (name == "no_sentence_wa") return AblationMode::kNoSentenceWa;
    if (name == "no_char_wa") return AblationMode::kNoCharWa;
    if (name == "no_multi_level") return AblationMode::kNoMultiLevel;
    throw ConfigError("unknown ablation mode: \"" + name +
                      "\" (expected full, no_sentence_wa, no_char_wa or no_multi_level)");
}

std::string to_string(AblationMode mode) {
    switch (mode) {
        case AblationMode::kFull: return "full";
        case AblationMode::kNoSentenceWa: return "no_sentence_wa";
        case AblationMode::kNoCharWa: return "no_char_wa";
        case AblationMode::kNoMultiLevel: return "no_multi_level";
    }
    return "full";
}

IntentFeed intent_feed_from_string(const std::string& name) {
    if (name == "gold") return IntentFeed::kGold;
    if (name == "predicted") return IntentFeed::kPredicted;
    throw ConfigError("unknown intent_feed: \"" + name + "\" (expected gold or predicted)");
}

std::string to_string(IntentFeed feed) {
    return feed == IntentFeed::kGold ? "gold" : "predicted";
}

SharedWordInfo shared_word_info_from_string(const std::string& name) {
    if (name == "summary") return SharedWordInfo::kSummary;
    if (name == "pooled_states") return SharedWordInfo::kPooledStates;
    throw ConfigError("unknown shared_word_info: \"" + name +
                      "\" (expected summary or pooled_states)");
}

std::string to_string(SharedWordInfo which) {
    return which == SharedWordInfo::kSummary ? "summary" : "pooled_states";
}

}  // namespace slu
