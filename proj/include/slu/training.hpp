#pragma once

#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "slu/adam.hpp"
#include "slu/checkpoint.hpp"
#include "slu/config.hpp"
#include "slu/decoders.hpp"
#include "slu/metrics.hpp"

namespace slu {

struct EpochStats {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    Metrics dev;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    int best_epoch = 0;  // 1-based; maximizes dev overall accuracy, earliest on ties
    double best_overall = 0.0;
    std::string checkpoint_path;
    nlohmann::json effective_config;
};

nlohmann::json train_report_to_json(const TrainReport& report);

template <typename S>
ForwardOptions forward_options_from_config(const TrainConfig& config, Phase phase) {
    ForwardOptions opts;
    opts.mode = ablation_from_string(config.ablation);
    opts.phase = phase;
    opts.intent_feed = intent_feed_from_string(config.intent_feed);
    opts.shared_word_info = shared_word_info_from_string(config.shared_word_info);
    opts.attention_on_lstm_output = config.attention_input == "bilstm";
    opts.dropout = config.dropout;
    return opts;
}

// Greedy infer-phase decoding of a set of samples into tag/intent strings.
template <typename S>
std::vector<LabeledUtterance> decode_corpus(const Model<S>& model,
                                            const std::vector<EncodedSample>& samples,
                                            const Vocabularies& vocabs,
                                            ForwardOptions opts) {
    opts.phase = Phase::kInfer;
    opts.dropout = 0.0;
    std::vector<LabeledUtterance> out;
    out.reserve(samples.size());
    for (const auto& sample : samples) {
        Graph<S> g(/*recording=*/false);
        ParamBinder<S> bind(g);
        auto fwd = forward(g, bind, model, sample, opts);
        LabeledUtterance pred;
        pred.intent = vocabs.intent_vocab.symbol(fwd.intent_index);
        pred.tags.reserve(fwd.slot_indices.size());
        for (int id : fwd.slot_indices) pred.tags.push_back(vocabs.slot_vocab.symbol(id));
        out.push_back(std::move(pred));
    }
    return out;
}

template <typename S>
Metrics evaluate_model(const Model<S>& model, const std::vector<EncodedSample>& samples,
                       const std::vector<LabeledUtterance>& golds, const Vocabularies& vocabs,
                       const ForwardOptions& opts) {
    if (samples.empty()) throw ContractError("evaluate: empty evaluation set");
    auto preds = decode_corpus(model, samples, vocabs, opts);
    return compute_metrics(golds, preds);
}

template <typename S>
struct TrainedModel {
    Model<S> model;          // parameters of the best epoch
    TrainReport report;
    std::string best_bytes;  // serialized best checkpoint
};

// Joint training: shuffled mini-batches, mean per-batch loss, Adam, one dev
// evaluation per epoch, early stopping on dev overall accuracy.
template <typename S>
TrainedModel<S> train_model(const TrainConfig& config,
                            const std::vector<EncodedSample>& train_samples,
                            const std::vector<EncodedSample>& dev_samples,
                            const std::vector<LabeledUtterance>& dev_golds,
                            const Vocabularies& vocabs) {
    config.validate();
    if (train_samples.empty()) throw ContractError("train: empty training set");
    if (dev_samples.empty()) throw ContractError("train: empty validation set");
    for (const auto& s : train_samples)
        if (!s.intent_id || s.slot_ids.empty())
            throw ContractError("train: training sample without gold labels");

    TrainedModel<S> out;
    out.model = Model<S>::build(config.dims, VocabSizes::of(vocabs), config.seed);
    Model<S>& model = out.model;

    AdamConfig<S> adam_config;
    adam_config.lr = static_cast<S>(config.learning_rate);
    adam_config.beta1 = static_cast<S>(config.adam_beta1);
    adam_config.beta2 = static_cast<S>(config.adam_beta2);
    adam_config.epsilon = static_cast<S>(config.adam_epsilon);
    Adam<S> adam(adam_config);

    Rng shuffle_rng(config.seed ^ 0x5DEECE66DULL);
    Rng dropout_rng(config.seed ^ 0xB5026F5AA96619E9ULL);

    ForwardOptions train_opts = forward_options_from_config<S>(config, Phase::kTrain);
    train_opts.dropout_rng = &dropout_rng;
    ForwardOptions eval_opts = forward_options_from_config<S>(config, Phase::kInfer);

    CheckpointManifest manifest;
    manifest.precision = static_cast<int>(sizeof(S)) * 8;
    manifest.dims = config.dims;
    manifest.config = train_config_to_json(config);
    manifest.vocabs = vocabularies_to_json(vocabs);
    manifest.hash = vocab_hash(vocabs);

    std::vector<std::size_t> order(train_samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    double best_overall = -1.0;
    int best_epoch = 0;
    int epochs_since_best = 0;

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(config.batch_size), ++batch_index) {
            std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            GradMap<S> grads = GradMap<S>::zeros_like(model.params);
            for (std::size_t k = start; k < end; ++k) {
                const EncodedSample& sample = train_samples[order[k]];
                Graph<S> g(/*recording=*/true);
                ParamBinder<S> bind(g);
                auto fwd = forward(g, bind, model, sample, train_opts);
                if (!std::isfinite(fwd.loss_value)) {
                    std::ostringstream msg;
                    msg << "non-finite loss at epoch " << epoch << ", batch " << batch_index
                        << ", sample " << order[k] << "; parameter norms:";
                    for (std::size_t pi = 0; pi < model.params.size(); ++pi) {
                        double sq = 0;
                        for (S x : model.params[pi].value.data)
                            sq += static_cast<double>(x) * static_cast<double>(x);
                        msg << " " << model.params[pi].name << "=" << std::sqrt(sq);
                    }
                    throw NumericError(msg.str());
                }
                g.backward(fwd.loss);
                bind.accumulate_into(grads);
                epoch_loss += fwd.loss_value;
            }
            grads.scale(static_cast<S>(1.0 / static_cast<double>(end - start)));
            clip_global_norm(grads, config.grad_clip_norm);
            adam.step(model.params, grads);
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = epoch_loss / static_cast<double>(train_samples.size());
        stats.dev = evaluate_model(model, dev_samples, dev_golds, vocabs, eval_opts);
        out.report.epochs.push_back(stats);

        if (stats.dev.overall_accuracy > best_overall) {
            best_overall = stats.dev.overall_accuracy;
            best_epoch = epoch;
            epochs_since_best = 0;
            std::ostringstream snapshot;
            write_checkpoint(snapshot, model.params, manifest);
            out.best_bytes = snapshot.str();
        } else {
            ++epochs_since_best;
            if (epochs_since_best > config.patience) break;
        }
    }

    out.report.best_epoch = best_epoch;
    out.report.best_overall = best_overall;
    out.report.effective_config = train_config_to_json(config);

    // Leave the model at its best-epoch parameters.
    if (!out.best_bytes.empty()) {
        std::istringstream in(out.best_bytes);
        Checkpoint best = read_checkpoint(in);
        model = Model<S>::from_params(config.dims, VocabSizes::of(vocabs), best.to_params<S>());
    }
    return out;
}

}  // namespace slu
