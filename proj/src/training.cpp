#include "slu/training.hpp"

namespace slu {

namespace {

nlohmann::json metrics_to_json_obj(const Metrics& m) {
    return nlohmann::json::parse(metrics_json(m));
}

}  // namespace

nlohmann::json train_report_to_json(const TrainReport& report) {
    nlohmann::json j;
    nlohmann::json epochs = nlohmann::json::array();
    for (const auto& e : report.epochs) {
        epochs.push_back({{"epoch", e.epoch},
                          {"train_loss", e.train_loss},
                          {"dev", metrics_to_json_obj(e.dev)}});
    }
    j["epochs"] = epochs;
    j["best_epoch"] = report.best_epoch;
    j["best_overall_accuracy"] = report.best_overall;
    j["checkpoint"] = report.checkpoint_path;
    j["config"] = report.effective_config;
    return j;
}

}  // namespace slu
