#include "slu/config.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "slu/decoders.hpp"

namespace slu {

void TrainConfig::validate() const {
    dims.validate();
    if (batch_size <= 0) throw ConfigError("batch_size must be positive");
    if (max_epochs <= 0) throw ConfigError("max_epochs must be positive");
    if (patience < 0) throw ConfigError("patience must be >= 0");
    if (learning_rate <= 0) throw ConfigError("learning_rate must be positive");
    if (dropout < 0 || dropout >= 1) throw ConfigError("dropout must be in [0, 1)");
    if (precision != 32 && precision != 64) throw ConfigError("precision must be 32 or 64");
    if (dev_fraction <= 0 || dev_fraction >= 1)
        throw ConfigError("dev_fraction must be in (0, 1)");
    ablation_from_string(ablation);
    intent_feed_from_string(intent_feed);
    shared_word_info_from_string(shared_word_info);
    if (attention_input != "embeddings" && attention_input != "bilstm")
        throw ConfigError("attention_input must be \"embeddings\" or \"bilstm\"");
}

namespace {

const std::set<std::string> kTopLevelKeys = {
    "emb_dim",        "enc_hidden",     "attn_dim",       "attn_heads",      "dec_hidden",
    "batch_size",     "max_epochs",     "patience",       "seed",            "learning_rate",
    "adam_beta1",     "adam_beta2",     "adam_epsilon",   "grad_clip_norm",  "dropout",
    "ablation",       "intent_feed",    "shared_word_info", "attention_input", "precision",
    "segmenter",      "dev_fraction"};

const std::set<std::string> kSegmenterKeys = {"backend", "dictionary_path", "endpoint_url",
                                              "timeout_ms"};

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

TrainConfig train_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (!kTopLevelKeys.count(key)) throw ConfigError("unknown config key: \"" + key + "\"");
    }
    TrainConfig c;
    read(j, "emb_dim", c.dims.emb);
    read(j, "enc_hidden", c.dims.enc_hidden);
    read(j, "attn_dim", c.dims.attn_dim);
    read(j, "attn_heads", c.dims.attn_heads);
    read(j, "dec_hidden", c.dims.dec_hidden);
    read(j, "batch_size", c.batch_size);
    read(j, "max_epochs", c.max_epochs);
    read(j, "patience", c.patience);
    read(j, "seed", c.seed);
    read(j, "learning_rate", c.learning_rate);
    read(j, "adam_beta1", c.adam_beta1);
    read(j, "adam_beta2", c.adam_beta2);
    read(j, "adam_epsilon", c.adam_epsilon);
    read(j, "grad_clip_norm", c.grad_clip_norm);
    read(j, "dropout", c.dropout);
    read(j, "ablation", c.ablation);
    read(j, "intent_feed", c.intent_feed);
    read(j, "shared_word_info", c.shared_word_info);
    read(j, "attention_input", c.attention_input);
    read(j, "precision", c.precision);
    read(j, "dev_fraction", c.dev_fraction);
    if (j.contains("segmenter")) {
        const auto& s = j.at("segmenter");
        if (!s.is_object()) throw ConfigError("\"segmenter\" must be an object");
        for (const auto& [key, value] : s.items()) {
            if (!kSegmenterKeys.count(key))
                throw ConfigError("unknown segmenter config key: \"" + key + "\"");
        }
        std::string backend = to_string(c.segmenter.backend);
        read(s, "backend", backend);
        c.segmenter.backend = segmenter_backend_from_string(backend);
        read(s, "dictionary_path", c.segmenter.dictionary_path);
        read(s, "endpoint_url", c.segmenter.endpoint_url);
        read(s, "timeout_ms", c.segmenter.timeout_ms);
    }
    c.validate();
    return c;
}

TrainConfig load_train_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("invalid JSON in " + path + ": " + e.what());
    }
    return train_config_from_json(j);
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
    nlohmann::json j;
    j["emb_dim"] = c.dims.emb;
    j["enc_hidden"] = c.dims.enc_hidden;
    j["attn_dim"] = c.dims.attn_dim;
    j["attn_heads"] = c.dims.attn_heads;
    j["dec_hidden"] = c.dims.dec_hidden;
    j["batch_size"] = c.batch_size;
    j["max_epochs"] = c.max_epochs;
    j["patience"] = c.patience;
    j["seed"] = c.seed;
    j["learning_rate"] = c.learning_rate;
    j["adam_beta1"] = c.adam_beta1;
    j["adam_beta2"] = c.adam_beta2;
    j["adam_epsilon"] = c.adam_epsilon;
    j["grad_clip_norm"] = c.grad_clip_norm;
    j["dropout"] = c.dropout;
    j["ablation"] = c.ablation;
    j["intent_feed"] = c.intent_feed;
    j["shared_word_info"] = c.shared_word_info;
    j["attention_input"] = c.attention_input;
    j["precision"] = c.precision;
    j["segmenter"] = {{"backend", to_string(c.segmenter.backend)},
                      {"dictionary_path", c.segmenter.dictionary_path},
                      {"endpoint_url", c.segmenter.endpoint_url},
                      {"timeout_ms", c.segmenter.timeout_ms}};
    j["dev_fraction"] = c.dev_fraction;
    return j;
}

}  // namespace slu
