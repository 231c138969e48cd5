#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "slu/config.hpp"
#include "slu/corpus.hpp"
#include "slu/metrics.hpp"
#include "slu/segmentation.hpp"
#include "slu/training.hpp"

namespace slu {

// Parsed, segmented, aligned and (once vocabularies exist) encoded data.
struct PreparedCorpus {
    std::vector<AlignedSample> samples;
    std::vector<EncodedSample> encoded;
    std::vector<LabeledUtterance> golds;  // only for fully labeled sets
};

// Loads a dataset and attaches word segmentations: gold words from the file
// when present, the segmenter's output otherwise.
std::vector<AlignedSample> load_aligned(const std::string& path, const Segmenter& segmenter);

// Builds the training segmenter. A dictionary backend without a dictionary
// file collects the gold words of the training corpus instead.
Segmenter make_training_segmenter(const TrainConfig& config,
                                  const std::vector<JsonlSample>& train_raw);

struct TrainingRun {
    TrainReport report;
    Metrics final_dev;
};

// Full training entry point: prepares data (carving a validation split from
// the end of the training set when dev_path is empty), trains at the
// configured precision and writes the best checkpoint to checkpoint_path.
TrainingRun run_training(const TrainConfig& config, const std::string& train_path,
                         const std::string& dev_path, const std::string& checkpoint_path);

struct SegmenterOverrides {
    std::optional<std::string> backend;
    std::optional<std::string> dictionary_path;
    std::optional<std::string> endpoint_url;
};

Metrics run_evaluation(const std::string& checkpoint_path, const std::string& data_path,
                       const SegmenterOverrides& overrides = {});

struct PredictionRecord {
    std::vector<std::string> chars;
    std::vector<std::string> slots;
    std::string intent;
    std::optional<double> lambda_sentence;
    std::vector<double> lambda_chars;
};

nlohmann::json prediction_to_json(const PredictionRecord& record, bool diagnostics);

std::vector<PredictionRecord> run_prediction(const std::string& checkpoint_path,
                                             const std::vector<std::string>& utterances,
                                             const SegmenterOverrides& overrides = {});

struct GradcheckReport {
    struct ModeResult {
        std::string mode;
        double max_rel_err = 0.0;
        std::string worst_param;
    };
    std::vector<ModeResult> modes;
    double max_rel_err = 0.0;
};

// Central-difference check of the full model's joint loss in every ablation
// mode, double precision. Dims come from the config; the built-in default is
// a tiny model so the sweep stays fast.
GradcheckReport run_gradcheck(const std::optional<TrainConfig>& config);

// Tiny deterministic fixture used by the gradient check (and its tests).
struct GradcheckFixture {
    ModelDims dims;
    VocabSizes vocab;
    std::vector<EncodedSample> samples;
    std::uint64_t seed = 7;
};
GradcheckFixture default_gradcheck_fixture();

double model_gradcheck(const GradcheckFixture& fixture, AblationMode mode,
                       std::string* worst_param = nullptr);

}  // namespace slu
