#pragma once

#include <span>

#include "slu/graph.hpp"
#include "slu/model.hpp"

namespace slu {

struct EncoderOptions {
    bool attention_on_lstm_output = false;  // default: attention over embeddings
    double dropout = 0.0;                   // applied to the encoding rows when training
    Rng* dropout_rng = nullptr;
};

// Runs a bidirectional LSTM over the rows of a (L x emb) matrix and returns
// the per-position concatenation of forward and backward states, L x hidden.
template <typename S>
Var bilstm_over_rows(Graph<S>& g, ParamBinder<S>& bind, const BiLstmParamRefs<S>& w, Var x_rows) {
    int len = g.shape(x_rows)[0];
    int half = w.fw.b->value.shape[0] / 4;
    LstmWeightVars fw{bind(w.fw.W_ih), bind(w.fw.W_hh), bind(w.fw.b)};
    LstmWeightVars bw{bind(w.bw.W_ih), bind(w.bw.W_hh), bind(w.bw.b)};

    std::vector<Var> fw_h(static_cast<std::size_t>(len));
    LstmStateVars state{g.zeros(Shape{half}), g.zeros(Shape{half})};
    for (int t = 0; t < len; ++t) {
        state = lstm_cell_step(g, g.row(x_rows, t), state, fw);
        fw_h[static_cast<std::size_t>(t)] = state.h;
    }
    std::vector<Var> bw_h(static_cast<std::size_t>(len));
    state = {g.zeros(Shape{half}), g.zeros(Shape{half})};
    for (int t = len - 1; t >= 0; --t) {
        state = lstm_cell_step(g, g.row(x_rows, t), state, bw);
        bw_h[static_cast<std::size_t>(t)] = state.h;
    }
    std::vector<Var> rows(static_cast<std::size_t>(len));
    for (int t = 0; t < len; ++t)
        rows[static_cast<std::size_t>(t)] =
            g.concat({fw_h[static_cast<std::size_t>(t)], bw_h[static_cast<std::size_t>(t)]});
    return g.stack_rows(std::span<const Var>(rows.data(), rows.size()));
}

// Shared self-attentive encoder: embed, then BiLSTM and self-attention in
// parallel, concatenated per position into L x (enc_hidden + attn_dim).
template <typename S>
Var encode_channel(Graph<S>& g, ParamBinder<S>& bind, const ChannelParamRefs<S>& ch,
                   std::span<const int> ids, int attn_heads, const EncoderOptions& opts = {}) {
    if (ids.empty()) throw ContractError("encode_channel: empty id sequence");
    Var x = g.rows(bind(ch.embedding), ids);
    Var lstm_out = bilstm_over_rows(g, bind, ch.lstm, x);
    Var attn_in = opts.attention_on_lstm_output ? lstm_out : x;
    Var attn_out = self_attention(g, attn_in, bind(ch.attn.Wq), bind(ch.attn.Wk), bind(ch.attn.Wv),
                                  attn_heads);
    Var enc = g.concat_cols({lstm_out, attn_out});
    if (opts.dropout > 0.0 && opts.dropout_rng) enc = g.dropout(enc, opts.dropout, *opts.dropout_rng);
    return enc;
}

// MLP attention pooling: score_t = u^T tanh(W e_t + b), weights softmax over
// positions, summary = weighted sum of rows. The output stays in the convex
// hull of the rows.
template <typename S>
Var attention_pool(Graph<S>& g, ParamBinder<S>& bind, const PoolParamRefs<S>& pool, Var enc) {
    Var hidden = g.tanh_(g.add_rows(g.matmul(enc, bind(pool.W), false, true), bind(pool.b)));
    Var scores = g.matvec(hidden, bind(pool.u));
    Var weights = g.softmax_rows(scores);
    return g.weighted_row_sum(enc, weights);
}

}  // namespace slu
