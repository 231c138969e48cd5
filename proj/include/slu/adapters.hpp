#pragma once

#include <span>

#include "slu/encoder.hpp"
#include "slu/graph.hpp"
#include "slu/model.hpp"

namespace slu {

template <typename S>
struct FusedVec {
    Var fused;
    Var lambda;  // scalar in (0, 1)
};

// Gated fusion of a character-side and a word-side vector:
//   lambda = sigmoid(v_c^T W_f v_w)
//   fused  = (1 - lambda) * v_c + lambda * v_w
template <typename S>
FusedVec<S> word_adapter(Graph<S>& g, Var v_c, Var v_w, Var gate_w) {
    if (g.shape(v_c) != g.shape(v_w))
        throw ShapeError("word_adapter: input dimensions differ, " + shape_str(g.shape(v_c)) +
                         " vs " + shape_str(g.shape(v_w)));
    Var lambda = g.sigmoid(g.bilinear(v_c, gate_w, v_w));
    Var one_minus = g.sub(g.scalar(S(1)), lambda);
    Var fused = g.add(g.scale_by(v_c, one_minus), g.scale_by(v_w, lambda));
    return {fused, lambda};
}

// Sentence-level fusion of the two channel summaries; the result feeds the
// intent head.
template <typename S>
FusedVec<S> sentence_level_fuse(Graph<S>& g, Var summary_c, Var summary_w, Var gate_w) {
    return word_adapter(g, summary_c, summary_w, gate_w);
}

// Slot-aware word states: BiLSTM over [e_w_i (+) intent embedding], one row
// per word, row size dec_hidden.
template <typename S>
Var slot_aware_word_states(Graph<S>& g, ParamBinder<S>& bind, const BiLstmParamRefs<S>& w,
                           Var word_enc, Var intent_emb) {
    int m = g.shape(word_enc)[0];
    std::vector<Var> inputs(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i)
        inputs[static_cast<std::size_t>(i)] = g.concat({g.row(word_enc, i), intent_emb});
    Var stacked = g.stack_rows(std::span<const Var>(inputs.data(), inputs.size()));
    return bilstm_over_rows(g, bind, w, stacked);
}

// Character-level fusion for position t (1-based, as is alignment): the
// decoder state fuses with the state of the word containing character t.
// This is the boundary where 1-based alignment turns into 0-based rows.
template <typename S>
FusedVec<S> char_level_fuse(Graph<S>& g, Var decoder_state, Var word_states,
                            std::span<const int> alignment, int t, Var gate_w) {
    int n = static_cast<int>(alignment.size());
    int m = g.shape(word_states)[0];
    if (t < 1 || t > n)
        throw ContractError("char_level_fuse: position " + std::to_string(t) + " out of [1, " +
                            std::to_string(n) + "]");
    int word_index = alignment[static_cast<std::size_t>(t - 1)];
    if (word_index < 1 || word_index > m)
        throw ContractError("char_level_fuse: alignment value " + std::to_string(word_index) +
                            " out of [1, " + std::to_string(m) + "]");
    return word_adapter(g, decoder_state, g.row(word_states, word_index - 1), gate_w);
}

}  // namespace slu
