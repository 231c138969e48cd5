#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slu/adapters.hpp"
#include "slu/corpus.hpp"
#include "slu/encoder.hpp"
#include "slu/graph.hpp"
#include "slu/model.hpp"

namespace slu {

enum class AblationMode { kFull, kNoSentenceWa, kNoCharWa, kNoMultiLevel };
enum class Phase { kTrain, kInfer };
enum class IntentFeed { kGold, kPredicted };
enum class SharedWordInfo { kSummary, kPooledStates };

AblationMode ablation_from_string(const std::string& name);
std::string to_string(AblationMode mode);
IntentFeed intent_feed_from_string(const std::string& name);
std::string to_string(IntentFeed feed);
SharedWordInfo shared_word_info_from_string(const std::string& name);
std::string to_string(SharedWordInfo which);

struct ForwardOptions {
    AblationMode mode = AblationMode::kFull;
    Phase phase = Phase::kInfer;
    IntentFeed intent_feed = IntentFeed::kGold;      // training only
    SharedWordInfo shared_word_info = SharedWordInfo::kSummary;
    bool attention_on_lstm_output = false;
    double dropout = 0.0;
    Rng* dropout_rng = nullptr;
};

// First maximum wins on exact ties.
template <typename S>
int argmax_index(std::span<const S> values) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(values.size()); ++i)
        if (values[static_cast<std::size_t>(i)] > values[static_cast<std::size_t>(best)]) best = i;
    return best;
}

template <typename S>
struct ForwardResult {
    std::vector<S> intent_dist;
    int intent_index = -1;
    std::vector<std::vector<S>> slot_dists;
    std::vector<int> slot_indices;
    std::optional<S> lambda_sentence;
    std::vector<S> lambda_chars;  // empty when character-level fusion is off
    Var loss;                     // invalid when no gold labels
    double loss_value = 0.0;
    double intent_loss_value = 0.0;
    double slot_loss_value = 0.0;
};

// Softmax head; returns distribution and the loss node when gold is given.
template <typename S>
std::pair<std::vector<S>, Var> softmax_head(Graph<S>& g, ParamBinder<S>& bind, Parameter<S>* w,
                                            Parameter<S>* b, Var features,
                                            std::optional<int> gold) {
    Var logits = g.add(g.matvec(bind(w), features), bind(b));
    if (gold) {
        auto [loss, probs] = g.softmax_cross_entropy(logits, *gold);
        return {std::move(probs), loss};
    }
    auto probs = g.value(g.softmax_rows(logits));
    return {std::vector<S>(probs.begin(), probs.end()), Var{}};
}

// The whole pipeline for one sample: encode both channels, fuse summaries
// for intent, decode slots left to right with per-character fusion. Loss is
// the unweighted sum of the intent term and all slot terms.
template <typename S>
ForwardResult<S> forward(Graph<S>& g, ParamBinder<S>& bind, const Model<S>& model,
                         const EncodedSample& sample, const ForwardOptions& opts) {
    const int n = static_cast<int>(sample.char_ids.size());
    const int m = static_cast<int>(sample.word_ids.size());
    if (n == 0) throw ContractError("forward: empty character sequence");
    if (m == 0) throw ContractError("forward: empty word sequence");
    if (static_cast<int>(sample.alignment.size()) != n)
        throw ContractError("forward: alignment length does not match characters");
    bool has_gold = sample.intent_id.has_value() && !sample.slot_ids.empty();
    if (opts.phase == Phase::kTrain && !has_gold)
        throw ContractError("forward: train phase requires gold labels");

    EncoderOptions enc_opts;
    enc_opts.attention_on_lstm_output = opts.attention_on_lstm_output;
    if (opts.phase == Phase::kTrain) {
        enc_opts.dropout = opts.dropout;
        enc_opts.dropout_rng = opts.dropout_rng;
    }

    Var char_enc = encode_channel(g, bind, model.char_channel, sample.char_ids, model.dims.attn_heads,
                                  enc_opts);
    Var word_enc = encode_channel(g, bind, model.word_channel, sample.word_ids, model.dims.attn_heads,
                                  enc_opts);

    ForwardResult<S> result;

    // Intent: fused summary unless the sentence-level adapter is ablated.
    Var summary_c = attention_pool(g, bind, model.char_channel.pool, char_enc);
    Var intent_features;
    Var summary_w;
    bool need_word_summary = opts.mode != AblationMode::kNoSentenceWa ||
                             (opts.mode == AblationMode::kNoMultiLevel &&
                              opts.shared_word_info == SharedWordInfo::kSummary);
    if (need_word_summary) summary_w = attention_pool(g, bind, model.word_channel.pool, word_enc);
    if (opts.mode == AblationMode::kNoSentenceWa) {
        intent_features = summary_c;
    } else {
        auto fused = sentence_level_fuse(g, summary_c, summary_w, bind(model.gate_sentence));
        intent_features = fused.fused;
        result.lambda_sentence = g.value(fused.lambda)[0];
    }

    Var intent_loss;
    {
        auto [dist, loss] = softmax_head(g, bind, model.intent_head_W, model.intent_head_b,
                                         intent_features,
                                         has_gold ? sample.intent_id : std::nullopt);
        result.intent_dist = std::move(dist);
        result.intent_index = argmax_index(std::span<const S>(result.intent_dist));
        intent_loss = loss;
    }

    // Intent fed to the slot side: gold during training (when configured),
    // the prediction otherwise.
    int fed_intent = result.intent_index;
    if (opts.phase == Phase::kTrain && opts.intent_feed == IntentFeed::kGold)
        fed_intent = *sample.intent_id;
    Var intent_emb = g.row(bind(model.intent_embedding), fed_intent);

    // Word-side slot information, depending on the ablation mode.
    Var word_states;  // M x dec_hidden
    Var shared_word_vec;
    if (opts.mode == AblationMode::kFull || opts.mode == AblationMode::kNoSentenceWa ||
        (opts.mode == AblationMode::kNoMultiLevel &&
         opts.shared_word_info == SharedWordInfo::kPooledStates)) {
        word_states = slot_aware_word_states(g, bind, model.word_slot_lstm, word_enc, intent_emb);
    }
    if (opts.mode == AblationMode::kNoMultiLevel) {
        shared_word_vec = opts.shared_word_info == SharedWordInfo::kSummary
                              ? g.matvec(bind(model.word_summary_proj), summary_w)
                              : g.mean_rows(word_states);
    }

    // Slot decoding, left to right, teacher forcing in train phase.
    LstmWeightVars dec{bind(model.slot_decoder.W_ih), bind(model.slot_decoder.W_hh),
                       bind(model.slot_decoder.b)};
    LstmStateVars state{g.zeros(Shape{model.dims.dec_hidden}), g.zeros(Shape{model.dims.dec_hidden})};
    Var prev_label_emb = bind(model.slot_sos);
    Var gate_char;
    if (opts.mode != AblationMode::kNoCharWa) gate_char = bind(model.gate_char);

    std::vector<Var> slot_losses;
    result.slot_dists.reserve(static_cast<std::size_t>(n));
    result.slot_indices.reserve(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) {
        Var x = g.concat({g.row(char_enc, t), intent_emb, prev_label_emb});
        state = lstm_cell_step(g, x, state, dec);

        Var slot_features;
        switch (opts.mode) {
            case AblationMode::kFull:
            case AblationMode::kNoSentenceWa: {
                auto fused = char_level_fuse(g, state.h, word_states, sample.alignment, t + 1,
                                             gate_char);
                slot_features = fused.fused;
                result.lambda_chars.push_back(g.value(fused.lambda)[0]);
                break;
            }
            case AblationMode::kNoCharWa:
                slot_features = state.h;
                break;
            case AblationMode::kNoMultiLevel: {
                auto fused = word_adapter(g, state.h, shared_word_vec, gate_char);
                slot_features = fused.fused;
                result.lambda_chars.push_back(g.value(fused.lambda)[0]);
                break;
            }
        }

        std::optional<int> gold_slot;
        if (has_gold) gold_slot = sample.slot_ids[static_cast<std::size_t>(t)];
        auto [dist, loss] = softmax_head(g, bind, model.slot_head_W, model.slot_head_b,
                                         slot_features, gold_slot);
        int predicted = argmax_index(std::span<const S>(dist));
        result.slot_dists.push_back(std::move(dist));
        result.slot_indices.push_back(predicted);
        if (has_gold) slot_losses.push_back(loss);

        int next_label = opts.phase == Phase::kTrain ? sample.slot_ids[static_cast<std::size_t>(t)]
                                                     : predicted;
        prev_label_emb = g.row(bind(model.slot_embedding), next_label);
    }

    if (has_gold) {
        std::vector<Var> terms;
        terms.reserve(slot_losses.size() + 1);
        terms.push_back(intent_loss);
        terms.insert(terms.end(), slot_losses.begin(), slot_losses.end());
        result.loss = g.add_scalars(std::span<const Var>(terms.data(), terms.size()));
        result.loss_value = static_cast<double>(g.value(result.loss)[0]);
        result.intent_loss_value = static_cast<double>(g.value(intent_loss)[0]);
        for (Var sl : slot_losses)
            result.slot_loss_value += static_cast<double>(g.value(sl)[0]);
    }
    return result;
}

}  // namespace slu
