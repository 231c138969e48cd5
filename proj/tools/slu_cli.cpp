#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "slu/pipeline.hpp"
#include "slu/utf8.hpp"

namespace {

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw slu::IoError("cannot open input file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

struct CommonModelFlags {
    std::string backend, dictionary, endpoint;

    slu::SegmenterOverrides overrides() const {
        slu::SegmenterOverrides o;
        if (!backend.empty()) o.backend = backend;
        if (!dictionary.empty()) o.dictionary_path = dictionary;
        if (!endpoint.empty()) o.endpoint_url = endpoint;
        return o;
    }
};

void add_segmenter_flags(CLI::App* cmd, CommonModelFlags& flags) {
    cmd->add_option("--backend", flags.backend, "segmenter backend override");
    cmd->add_option("--dictionary", flags.dictionary, "segmentation dictionary file override");
    cmd->add_option("--endpoint", flags.endpoint, "remote segmenter endpoint override");
}

int cmd_train(const std::string& config_path, const std::string& train_path,
              const std::string& dev_path, const std::string& out_path,
              const std::optional<std::string>& ablation, const std::optional<std::uint64_t>& seed,
              const std::string& report_path) {
    slu::TrainConfig config =
        config_path.empty() ? slu::TrainConfig{} : slu::load_train_config(config_path);
    if (ablation) config.ablation = *ablation;
    if (seed) config.seed = *seed;
    config.validate();

    slu::TrainingRun run = slu::run_training(config, train_path, dev_path, out_path);
    nlohmann::json report = slu::train_report_to_json(run.report);
    std::cout << report.dump(2) << "\n";
    if (!report_path.empty()) {
        std::ofstream out(report_path);
        if (!out) throw slu::IoError("cannot write report file: " + report_path);
        out << report.dump(2) << "\n";
    }
    std::cerr << "best epoch " << run.report.best_epoch << ", dev overall accuracy "
              << run.report.best_overall << ", checkpoint " << out_path << "\n";
    return 0;
}

int cmd_eval(const std::string& model_path, const std::string& data_path,
             const CommonModelFlags& flags) {
    slu::Metrics metrics = slu::run_evaluation(model_path, data_path, flags.overrides());
    std::cout << slu::metrics_table(metrics);
    std::cout << slu::metrics_json(metrics) << "\n";
    return 0;
}

int cmd_predict(const std::string& model_path, const std::string& input_path, bool diagnostics,
                const std::string& out_path, const CommonModelFlags& flags) {
    auto lines = read_lines(input_path);
    auto records = slu::run_prediction(model_path, lines, flags.overrides());
    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!out_path.empty()) {
        file.open(out_path);
        if (!file) throw slu::IoError("cannot write output file: " + out_path);
        out = &file;
    }
    for (const auto& r : records) *out << slu::prediction_to_json(r, diagnostics).dump() << "\n";
    return 0;
}

int cmd_segment(const std::string& backend, const std::string& input_path,
                const std::string& dictionary, const std::string& endpoint) {
    slu::SegmenterConfig config;
    config.backend = slu::segmenter_backend_from_string(backend);
    config.dictionary_path = dictionary;
    config.endpoint_url = endpoint;
    slu::Segmenter segmenter(config);
    for (const auto& line : read_lines(input_path)) {
        if (line.empty()) {
            std::cout << "\n";
            continue;
        }
        auto words = segmenter.segment(line);
        for (std::size_t i = 0; i < words.size(); ++i) {
            if (i) std::cout << ' ';
            std::cout << words[i];
        }
        std::cout << "\n";
    }
    return 0;
}

int cmd_gradcheck(const std::string& config_path) {
    std::optional<slu::TrainConfig> config;
    if (!config_path.empty()) config = slu::load_train_config(config_path);
    slu::GradcheckReport report = slu::run_gradcheck(config);
    for (const auto& mode : report.modes) {
        std::cout << "mode " << mode.mode << ": max relative error " << mode.max_rel_err
                  << " (worst: " << mode.worst_param << ")\n";
    }
    std::cout << "max relative error " << report.max_rel_err << "\n";
    return report.max_rel_err < 1e-4 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"joint intent detection and slot filling for Chinese utterances "
                 "with gated character/word fusion"};
    app.require_subcommand(1);

    // train
    auto* train = app.add_subcommand("train", "train a model and save the best checkpoint");
    std::string train_config, train_data, dev_data, train_out = "model.ckpt", report_path;
    std::string ablation_flag;
    std::uint64_t seed_flag = 0;
    bool seed_set = false;
    train->add_option("--config", train_config, "JSON config file");
    train->add_option("--train", train_data, "training dataset")->required();
    train->add_option("--dev", dev_data, "validation dataset (default: tail split of train)");
    train->add_option("--out", train_out, "checkpoint output path");
    train->add_option("--report", report_path, "also write the report JSON here");
    train->add_option("--ablation", ablation_flag,
                      "full | no_sentence_wa | no_char_wa | no_multi_level");
    train->add_option("--seed", seed_flag, "RNG seed")->each([&](const std::string&) {
        seed_set = true;
    });

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a labeled dataset");
    std::string eval_model, eval_data;
    CommonModelFlags eval_flags;
    eval->add_option("--model", eval_model, "checkpoint file")->required();
    eval->add_option("--data", eval_data, "labeled dataset")->required();
    add_segmenter_flags(eval, eval_flags);

    // predict
    auto* predict = app.add_subcommand("predict", "tag raw utterances (one per line)");
    std::string predict_model, predict_input, predict_out;
    bool diagnostics = false;
    CommonModelFlags predict_flags;
    predict->add_option("--model", predict_model, "checkpoint file")->required();
    predict->add_option("--input", predict_input, "utterances, one per line")->required();
    predict->add_option("--out", predict_out, "write JSON lines here instead of stdout");
    predict->add_flag("--diagnostics", diagnostics, "include fusion gate values in the output");
    add_segmenter_flags(predict, predict_flags);

    // segment
    auto* segment = app.add_subcommand("segment", "segment utterances into words");
    std::string seg_backend = "dictionary", seg_input, seg_dictionary, seg_endpoint;
    segment->add_option("--backend", seg_backend, "dictionary | remote | identity");
    segment->add_option("--input", seg_input, "utterances, one per line")->required();
    segment->add_option("--dictionary", seg_dictionary, "dictionary file (one word per line)");
    segment->add_option("--endpoint", seg_endpoint, "remote segmenter URL");

    // gradcheck
    auto* gradcheck = app.add_subcommand(
        "gradcheck", "compare reverse-mode gradients against central differences");
    std::string gradcheck_config;
    gradcheck->add_option("--config", gradcheck_config,
                          "config whose dimensions to check (default: tiny built-in)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed())
            return cmd_train(train_config, train_data, dev_data, train_out,
                             ablation_flag.empty() ? std::nullopt
                                                   : std::optional<std::string>(ablation_flag),
                             seed_set ? std::optional<std::uint64_t>(seed_flag) : std::nullopt,
                             report_path);
        if (eval->parsed()) return cmd_eval(eval_model, eval_data, eval_flags);
        if (predict->parsed())
            return cmd_predict(predict_model, predict_input, diagnostics, predict_out,
                               predict_flags);
        if (segment->parsed()) return cmd_segment(seg_backend, seg_input, seg_dictionary, seg_endpoint);
        if (gradcheck->parsed()) return cmd_gradcheck(gradcheck_config);
    } catch (const slu::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
