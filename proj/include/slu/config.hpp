#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "slu/model.hpp"
#include "slu/segmentation.hpp"

namespace slu {

// Everything a training run needs. Unknown keys in a config file are
// rejected so typos cannot silently fall back to defaults.
struct TrainConfig {
    ModelDims dims;

    int batch_size = 16;
    int max_epochs = 100;
    int patience = 10;
    std::uint64_t seed = 42;

    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    double grad_clip_norm = 5.0;  // 0 disables
    double dropout = 0.0;

    std::string ablation = "full";
    std::string intent_feed = "gold";
    std::string shared_word_info = "summary";
    std::string attention_input = "embeddings";  // or "bilstm"
    int precision = 32;                          // 32 or 64

    SegmenterConfig segmenter;
    double dev_fraction = 0.1;  // carved from the end of train when no dev set is given

    void validate() const;
};

TrainConfig train_config_from_json(const nlohmann::json& j);
TrainConfig load_train_config(const std::string& path);
nlohmann::json train_config_to_json(const TrainConfig& config);

}  // namespace slu
