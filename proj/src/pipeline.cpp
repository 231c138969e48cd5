#include "slu/pipeline.hpp"

#include <fstream>

#include "slu/gradcheck.hpp"
#include "slu/utf8.hpp"

namespace slu {

std::vector<AlignedSample> load_aligned(const std::string& path, const Segmenter& segmenter) {
    std::vector<AlignedSample> out;
    for (auto& raw : parse_dataset(path)) {
        AlignedSample sample;
        sample.utterance = std::move(raw.utterance);
        sample.words = raw.words.empty() ? segmenter.segment(sample.utterance.chars)
                                         : std::move(raw.words);
        sample.alignment = align_chars_to_words(sample.utterance.chars, sample.words);
        out.push_back(std::move(sample));
    }
    return out;
}

Segmenter make_training_segmenter(const TrainConfig& config,
                                  const std::vector<JsonlSample>& train_raw) {
    if (config.segmenter.backend == SegmenterBackend::kDictionary &&
        config.segmenter.dictionary_path.empty()) {
        std::vector<std::string> words;
        for (const auto& s : train_raw) words.insert(words.end(), s.words.begin(), s.words.end());
        return Segmenter(config.segmenter, dictionary_from_words(words));
    }
    return Segmenter(config.segmenter);
}

namespace {

std::vector<LabeledUtterance> gold_labels(const std::vector<AlignedSample>& samples) {
    std::vector<LabeledUtterance> out;
    out.reserve(samples.size());
    for (const auto& s : samples) {
        if (!s.utterance.has_gold())
            throw ContractError("dataset sample without gold labels where labels are required");
        out.push_back(LabeledUtterance{s.utterance.slot_tags, *s.utterance.intent});
    }
    return out;
}

std::vector<EncodedSample> encode_all(const std::vector<AlignedSample>& samples,
                                      const Vocabularies& vocabs) {
    std::vector<EncodedSample> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(encode_sample(s, vocabs));
    return out;
}

template <typename S>
TrainingRun train_at(const TrainConfig& config, const std::vector<AlignedSample>& train,
                     const std::vector<AlignedSample>& dev, const Vocabularies& vocabs,
                     const std::string& checkpoint_path) {
    auto train_enc = encode_all(train, vocabs);
    auto dev_enc = encode_all(dev, vocabs);
    auto dev_golds = gold_labels(dev);
    auto trained = train_model<S>(config, train_enc, dev_enc, dev_golds, vocabs);

    std::ofstream out(checkpoint_path, std::ios::binary);
    if (!out) throw IoError("cannot open checkpoint file for writing: " + checkpoint_path);
    out.write(trained.best_bytes.data(), static_cast<std::streamsize>(trained.best_bytes.size()));
    if (!out) throw IoError("failed to write checkpoint: " + checkpoint_path);

    TrainingRun run;
    run.report = std::move(trained.report);
    run.report.checkpoint_path = checkpoint_path;
    ForwardOptions eval_opts = forward_options_from_config<S>(config, Phase::kInfer);
    run.final_dev = evaluate_model(trained.model, dev_enc, dev_golds, vocabs, eval_opts);
    return run;
}

Segmenter segmenter_from_manifest(const nlohmann::json& config_json,
                                  const SegmenterOverrides& overrides) {
    SegmenterConfig seg;
    if (config_json.contains("segmenter")) {
        const auto& s = config_json.at("segmenter");
        seg.backend = segmenter_backend_from_string(s.value("backend", "dictionary"));
        seg.dictionary_path = s.value("dictionary_path", "");
        seg.endpoint_url = s.value("endpoint_url", "");
        seg.timeout_ms = s.value("timeout_ms", 5000);
    }
    if (overrides.backend) seg.backend = segmenter_backend_from_string(*overrides.backend);
    if (overrides.dictionary_path) seg.dictionary_path = *overrides.dictionary_path;
    if (overrides.endpoint_url) seg.endpoint_url = *overrides.endpoint_url;
    return Segmenter(seg);
}

struct LoadedModel {
    Checkpoint checkpoint;
    Vocabularies vocabs;
    TrainConfig config;
};

LoadedModel load_model_common(const std::string& checkpoint_path) {
    LoadedModel loaded{load_checkpoint(checkpoint_path), {}, {}};
    loaded.vocabs = loaded.checkpoint.vocabularies();
    loaded.config = train_config_from_json(loaded.checkpoint.manifest.config);
    loaded.config.dims = loaded.checkpoint.manifest.dims;
    return loaded;
}

}  // namespace

TrainingRun run_training(const TrainConfig& config, const std::string& train_path,
                         const std::string& dev_path, const std::string& checkpoint_path) {
    config.validate();
    auto train_raw = parse_dataset(train_path);
    if (train_raw.empty()) throw ContractError("training set is empty: " + train_path);
    Segmenter segmenter = make_training_segmenter(config, train_raw);

    std::vector<AlignedSample> train;
    train.reserve(train_raw.size());
    for (auto& raw : train_raw) {
        AlignedSample sample;
        sample.utterance = std::move(raw.utterance);
        sample.words = raw.words.empty() ? segmenter.segment(sample.utterance.chars)
                                         : std::move(raw.words);
        sample.alignment = align_chars_to_words(sample.utterance.chars, sample.words);
        train.push_back(std::move(sample));
    }

    std::vector<AlignedSample> dev;
    if (!dev_path.empty()) {
        dev = load_aligned(dev_path, segmenter);
    } else {
        // No validation file: the tail of the training set becomes the
        // validation split (order as given in the file, independent of seed).
        std::size_t n_dev = std::max<std::size_t>(
            1, static_cast<std::size_t>(static_cast<double>(train.size()) * config.dev_fraction));
        if (n_dev >= train.size())
            throw ContractError("training set too small to carve a validation split");
        dev.assign(train.end() - static_cast<std::ptrdiff_t>(n_dev), train.end());
        train.erase(train.end() - static_cast<std::ptrdiff_t>(n_dev), train.end());
    }

    Vocabularies vocabs = build_vocabularies(train);
    if (config.precision == 64)
        return train_at<double>(config, train, dev, vocabs, checkpoint_path);
    return train_at<float>(config, train, dev, vocabs, checkpoint_path);
}

Metrics run_evaluation(const std::string& checkpoint_path, const std::string& data_path,
                       const SegmenterOverrides& overrides) {
    LoadedModel loaded = load_model_common(checkpoint_path);
    Segmenter segmenter = segmenter_from_manifest(loaded.checkpoint.manifest.config, overrides);
    auto samples = load_aligned(data_path, segmenter);
    if (samples.empty()) throw ContractError("evaluation set is empty: " + data_path);
    auto encoded = encode_all(samples, loaded.vocabs);
    auto golds = gold_labels(samples);

    if (loaded.checkpoint.manifest.precision == 64) {
        auto model = Model<double>::from_params(loaded.config.dims, VocabSizes::of(loaded.vocabs),
                                                loaded.checkpoint.to_params<double>());
        return evaluate_model(model, encoded, golds, loaded.vocabs,
                              forward_options_from_config<double>(loaded.config, Phase::kInfer));
    }
    auto model = Model<float>::from_params(loaded.config.dims, VocabSizes::of(loaded.vocabs),
                                           loaded.checkpoint.to_params<float>());
    return evaluate_model(model, encoded, golds, loaded.vocabs,
                          forward_options_from_config<float>(loaded.config, Phase::kInfer));
}

nlohmann::json prediction_to_json(const PredictionRecord& record, bool diagnostics) {
    nlohmann::json j;
    j["chars"] = record.chars;
    j["slots"] = record.slots;
    j["intent"] = record.intent;
    if (diagnostics) {
        if (record.lambda_sentence) j["lambda_sentence"] = *record.lambda_sentence;
        j["lambda_chars"] = record.lambda_chars;
    }
    return j;
}

namespace {

template <typename S>
std::vector<PredictionRecord> predict_at(const LoadedModel& loaded, const Segmenter& segmenter,
                                         const std::vector<std::string>& utterances) {
    auto model = Model<S>::from_params(loaded.config.dims, VocabSizes::of(loaded.vocabs),
                                       loaded.checkpoint.to_params<S>());
    ForwardOptions opts = forward_options_from_config<S>(loaded.config, Phase::kInfer);
    std::vector<PredictionRecord> out;
    out.reserve(utterances.size());
    for (std::size_t i = 0; i < utterances.size(); ++i) {
        AlignedSample sample;
        sample.utterance.chars = utf8::split(utterances[i]);
        if (sample.utterance.chars.empty())
            throw ContractError("empty utterance at input line " + std::to_string(i + 1));
        sample.words = segmenter.segment(sample.utterance.chars);
        sample.alignment = align_chars_to_words(sample.utterance.chars, sample.words);
        EncodedSample encoded = encode_sample(sample, loaded.vocabs);

        Graph<S> g(/*recording=*/false);
        ParamBinder<S> bind(g);
        auto fwd = forward(g, bind, model, encoded, opts);

        PredictionRecord record;
        record.chars = sample.utterance.chars;
        record.intent = loaded.vocabs.intent_vocab.symbol(fwd.intent_index);
        for (int id : fwd.slot_indices) record.slots.push_back(loaded.vocabs.slot_vocab.symbol(id));
        if (fwd.lambda_sentence) record.lambda_sentence = static_cast<double>(*fwd.lambda_sentence);
        for (auto l : fwd.lambda_chars) record.lambda_chars.push_back(static_cast<double>(l));
        out.push_back(std::move(record));
    }
    return out;
}

}  // namespace

std::vector<PredictionRecord> run_prediction(const std::string& checkpoint_path,
                                             const std::vector<std::string>& utterances,
                                             const SegmenterOverrides& overrides) {
    LoadedModel loaded = load_model_common(checkpoint_path);
    Segmenter segmenter = segmenter_from_manifest(loaded.checkpoint.manifest.config, overrides);
    if (loaded.checkpoint.manifest.precision == 64)
        return predict_at<double>(loaded, segmenter, utterances);
    return predict_at<float>(loaded, segmenter, utterances);
}

GradcheckFixture default_gradcheck_fixture() {
    GradcheckFixture f;
    f.dims.emb = 5;
    f.dims.enc_hidden = 6;
    f.dims.attn_dim = 4;
    f.dims.attn_heads = 1;
    f.dims.dec_hidden = 6;
    f.vocab = {8, 6, 4, 3};

    EncodedSample a;
    a.char_ids = {2, 3, 4, 2, 5};
    a.word_ids = {2, 3, 4};
    a.alignment = {1, 1, 2, 3, 3};
    a.slot_ids = {0, 1, 2, 0, 1};
    a.intent_id = 1;
    f.samples.push_back(a);

    EncodedSample b;
    b.char_ids = {6, 7, 3};
    b.word_ids = {5, 2};
    b.alignment = {1, 1, 2};
    b.slot_ids = {3, 2, 0};
    b.intent_id = 2;
    f.samples.push_back(b);
    return f;
}

double model_gradcheck(const GradcheckFixture& fixture, AblationMode mode,
                       std::string* worst_param) {
    Model<double> model = Model<double>::build(fixture.dims, fixture.vocab, fixture.seed);
    ForwardOptions opts;
    opts.mode = mode;
    opts.phase = Phase::kTrain;
    opts.intent_feed = IntentFeed::kGold;

    auto loss_value = [&]() {
        double total = 0;
        for (const auto& sample : fixture.samples) {
            Graph<double> g(/*recording=*/false);
            ParamBinder<double> bind(g);
            // Non-recording graphs do not build loss nodes for backward, but
            // forward still reports loss_value.
            auto fwd = forward(g, bind, model, sample, opts);
            total += fwd.loss_value;
        }
        return total;
    };
    auto loss_grad = [&]() {
        GradMap<double> grads = GradMap<double>::zeros_like(model.params);
        for (const auto& sample : fixture.samples) {
            Graph<double> g(/*recording=*/true);
            ParamBinder<double> bind(g);
            auto fwd = forward(g, bind, model, sample, opts);
            g.backward(fwd.loss);
            bind.accumulate_into(grads);
        }
        return grads;
    };

    auto result = finite_difference_check(model.params, loss_value, loss_grad);
    if (worst_param) *worst_param = result.worst_param;
    return result.max_rel_err;
}

GradcheckReport run_gradcheck(const std::optional<TrainConfig>& config) {
    GradcheckFixture fixture = default_gradcheck_fixture();
    if (config) {
        fixture.dims = config->dims;
        fixture.seed = config->seed;
    }
    GradcheckReport report;
    for (AblationMode mode : {AblationMode::kFull, AblationMode::kNoSentenceWa,
                              AblationMode::kNoCharWa, AblationMode::kNoMultiLevel}) {
        GradcheckReport::ModeResult r;
        r.mode = to_string(mode);
        r.max_rel_err = model_gradcheck(fixture, mode, &r.worst_param);
        report.max_rel_err = std::max(report.max_rel_err, r.max_rel_err);
        report.modes.push_back(std::move(r));
    }
    return report;
}

}  // namespace slu
