#pragma once

#include <cstdint>
#include <string>

#include "slu/corpus.hpp"
#include "slu/graph.hpp"
#include "slu/tensor.hpp"

namespace slu {

struct ModelDims {
    int emb = 64;         // char/word/intent/slot embedding size
    int enc_hidden = 128; // BiLSTM output per channel (both directions together)
    int attn_dim = 64;    // self-attention output size
    int attn_heads = 1;
    int dec_hidden = 128; // slot decoder state size = adapter dimension

    int enc_out() const { return enc_hidden + attn_dim; }

    void validate() const {
        if (emb <= 0 || enc_hidden <= 0 || attn_dim <= 0 || dec_hidden <= 0 || attn_heads <= 0)
            throw ConfigError("model dimensions must be positive");
        if (enc_hidden % 2 != 0)
            throw ConfigError("enc_hidden must be even (bidirectional halves)");
        if (dec_hidden % 2 != 0)
            throw ConfigError("dec_hidden must be even (bidirectional halves)");
        if (attn_dim % attn_heads != 0)
            throw ConfigError("attn_dim must be divisible by attn_heads");
    }
};

struct VocabSizes {
    int chars = 0, words = 0, slots = 0, intents = 0;

    static VocabSizes of(const Vocabularies& v) {
        return {v.char_vocab.size(), v.word_vocab.size(), v.slot_vocab.size(),
                v.intent_vocab.size()};
    }
};

template <typename S>
struct LstmParamRefs {
    Parameter<S>*W_ih = nullptr, *W_hh = nullptr, *b = nullptr;
};

template <typename S>
struct BiLstmParamRefs {
    LstmParamRefs<S> fw, bw;
};

template <typename S>
struct AttentionParamRefs {
    Parameter<S>*Wq = nullptr, *Wk = nullptr, *Wv = nullptr;
};

template <typename S>
struct PoolParamRefs {
    Parameter<S>*W = nullptr, *b = nullptr, *u = nullptr;
};

template <typename S>
struct ChannelParamRefs {
    Parameter<S>* embedding = nullptr;
    BiLstmParamRefs<S> lstm;
    AttentionParamRefs<S> attn;
    PoolParamRefs<S> pool;
};

// The joint model: two independent channel encoders, a sentence-level and a
// character-level fusion gate, intent/slot heads and the two task decoders.
template <typename S>
struct Model {
    ModelDims dims;
    VocabSizes vocab;
    ParamStore<S> params;

    ChannelParamRefs<S> char_channel;
    ChannelParamRefs<S> word_channel;
    Parameter<S>* intent_embedding = nullptr;  // intents x emb
    Parameter<S>* slot_embedding = nullptr;    // slots x emb
    Parameter<S>* slot_sos = nullptr;          // learned y_0 label embedding
    LstmParamRefs<S> slot_decoder;             // unidirectional
    BiLstmParamRefs<S> word_slot_lstm;         // slot-aware word states
    Parameter<S>* gate_sentence = nullptr;     // enc_out x enc_out
    Parameter<S>* gate_char = nullptr;         // dec_hidden x dec_hidden
    Parameter<S>* word_summary_proj = nullptr; // dec_hidden x enc_out
    Parameter<S>* intent_head_W = nullptr;
    Parameter<S>* intent_head_b = nullptr;
    Parameter<S>* slot_head_W = nullptr;
    Parameter<S>* slot_head_b = nullptr;

    static Model build(const ModelDims& dims, const VocabSizes& vocab, std::uint64_t seed) {
        dims.validate();
        if (vocab.chars < 2 || vocab.words < 2 || vocab.slots < 1 || vocab.intents < 1)
            throw ConfigError("vocabulary sizes too small to build a model");
        Model m;
        m.dims = dims;
        m.vocab = vocab;
        Rng rng(seed);

        auto matrix = [&](const std::string& name, int r, int c) {
            Parameter<S>& p = m.params.create(name, Shape{r, c});
            double bound = std::sqrt(1.0 / c);
            for (auto& x : p.value.data) x = static_cast<S>(rng.uniform(-bound, bound));
            return &p;
        };
        auto vec_uniform = [&](const std::string& name, int n) {
            Parameter<S>& p = m.params.create(name, Shape{n});
            double bound = std::sqrt(1.0 / n);
            for (auto& x : p.value.data) x = static_cast<S>(rng.uniform(-bound, bound));
            return &p;
        };
        auto bias = [&](const std::string& name, int n) { return &m.params.create(name, Shape{n}); };
        auto embedding = [&](const std::string& name, int r, int c) {
            Parameter<S>& p = m.params.create(name, Shape{r, c});
            for (auto& x : p.value.data) x = static_cast<S>(rng.normal(0.0, 0.1));
            return &p;
        };
        auto lstm = [&](const std::string& prefix, int input, int hidden) {
            LstmParamRefs<S> l;
            l.W_ih = matrix(prefix + ".W_ih", 4 * hidden, input);
            l.W_hh = matrix(prefix + ".W_hh", 4 * hidden, hidden);
            l.b = bias(prefix + ".b", 4 * hidden);
            return l;
        };
        auto channel = [&](const std::string& prefix, int vocab_size) {
            ChannelParamRefs<S> ch;
            ch.embedding = embedding(prefix + ".embedding", vocab_size, dims.emb);
            int half = dims.enc_hidden / 2;
            ch.lstm.fw = lstm(prefix + ".lstm.fw", dims.emb, half);
            ch.lstm.bw = lstm(prefix + ".lstm.bw", dims.emb, half);
            ch.attn.Wq = matrix(prefix + ".attn.Wq", dims.emb, dims.attn_dim);
            ch.attn.Wk = matrix(prefix + ".attn.Wk", dims.emb, dims.attn_dim);
            ch.attn.Wv = matrix(prefix + ".attn.Wv", dims.emb, dims.attn_dim);
            ch.pool.W = matrix(prefix + ".pool.W", dims.enc_out(), dims.enc_out());
            ch.pool.b = bias(prefix + ".pool.b", dims.enc_out());
            ch.pool.u = vec_uniform(prefix + ".pool.u", dims.enc_out());
            return ch;
        };

        m.char_channel = channel("char", vocab.chars);
        m.word_channel = channel("word", vocab.words);
        m.intent_embedding = embedding("intent.embedding", vocab.intents, dims.emb);
        m.slot_embedding = embedding("slot.embedding", vocab.slots, dims.emb);
        {
            Parameter<S>& p = m.params.create("slot.sos", Shape{dims.emb});
            for (auto& x : p.value.data) x = static_cast<S>(rng.normal(0.0, 0.1));
            m.slot_sos = &p;
        }
        m.slot_decoder = lstm("slot_decoder", dims.enc_out() + 2 * dims.emb, dims.dec_hidden);
        m.word_slot_lstm.fw = lstm("word_slot_lstm.fw", dims.enc_out() + dims.emb, dims.dec_hidden / 2);
        m.word_slot_lstm.bw = lstm("word_slot_lstm.bw", dims.enc_out() + dims.emb, dims.dec_hidden / 2);
        m.gate_sentence = matrix("gate.sentence.W_f", dims.enc_out(), dims.enc_out());
        m.gate_char = matrix("gate.char.W_f", dims.dec_hidden, dims.dec_hidden);
        m.word_summary_proj = matrix("word_proj.W", dims.dec_hidden, dims.enc_out());
        m.intent_head_W = matrix("intent_head.W", vocab.intents, dims.enc_out());
        m.intent_head_b = bias("intent_head.b", vocab.intents);
        m.slot_head_W = matrix("slot_head.W", vocab.slots, dims.dec_hidden);
        m.slot_head_b = bias("slot_head.b", vocab.slots);
        return m;
    }

    // Rebuild the reference wiring after loading raw parameters (shapes must
    // match what build() would create).
    static Model from_params(const ModelDims& dims, const VocabSizes& vocab, ParamStore<S> params) {
        Model fresh = build(dims, vocab, 0);
        if (fresh.params.size() != params.size())
            throw ContractError("checkpoint parameter count does not match model layout");
        for (std::size_t i = 0; i < params.size(); ++i) {
            Parameter<S>& loaded = params[i];
            Parameter<S>& expect = fresh.params[i];
            if (loaded.name != expect.name)
                throw ContractError("checkpoint parameter order mismatch at " + loaded.name);
            if (loaded.value.shape != expect.value.shape)
                throw ContractError("checkpoint parameter shape mismatch for " + loaded.name);
            expect.value.data = std::move(loaded.value.data);
        }
        return fresh;
    }
};

}  // namespace slu
