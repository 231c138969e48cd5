#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include <nlohmann/json.hpp>

#include "slu/adapters.hpp"
#include "slu/corpus.hpp"
#include "slu/metrics.hpp"
#include "slu/pipeline.hpp"
#include "slu/segmentation.hpp"

namespace py = pybind11;

namespace {

slu::SegmenterConfig make_segmenter_config(const std::string& backend,
                                           const std::string& dictionary_path,
                                           const std::string& endpoint_url, int timeout_ms) {
    slu::SegmenterConfig config;
    config.backend = slu::segmenter_backend_from_string(backend);
    config.dictionary_path = dictionary_path;
    config.endpoint_url = endpoint_url;
    config.timeout_ms = timeout_ms;
    return config;
}

py::object json_to_py(const nlohmann::json& j) {
    py::module_ json_mod = py::module_::import("json");
    return json_mod.attr("loads")(j.dump());
}

nlohmann::json py_to_json(const py::object& obj) {
    py::module_ json_mod = py::module_::import("json");
    std::string dumped = py::cast<std::string>(json_mod.attr("dumps")(obj));
    return nlohmann::json::parse(dumped);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "joint Chinese intent detection and slot filling with gated "
              "character/word fusion";

    m.def(
        "segment",
        [](const std::string& text, const std::string& backend, const std::string& dictionary_path,
           const std::string& endpoint_url, int timeout_ms) {
            slu::Segmenter seg(
                make_segmenter_config(backend, dictionary_path, endpoint_url, timeout_ms));
            return seg.segment(text);
        },
        py::arg("text"), py::arg("backend") = "dictionary", py::arg("dictionary_path") = "",
        py::arg("endpoint_url") = "", py::arg("timeout_ms") = 5000,
        "Split an utterance into words with the chosen backend.");

    m.def(
        "align_chars_to_words",
        [](const std::vector<std::string>& chars, const std::vector<std::string>& words) {
            return slu::align_chars_to_words(chars, words);
        },
        py::arg("chars"), py::arg("words"),
        "1-based index of the word covering each character.");

    m.def(
        "parse_dataset",
        [](const std::string& path) {
            py::list out;
            for (const auto& s : slu::parse_dataset(path)) {
                py::dict d;
                d["chars"] = s.utterance.chars;
                if (!s.utterance.slot_tags.empty()) d["slots"] = s.utterance.slot_tags;
                if (s.utterance.intent) d["intent"] = *s.utterance.intent;
                if (!s.words.empty()) d["words"] = s.words;
                out.append(std::move(d));
            }
            return out;
        },
        py::arg("path"), "Parse a block-text or JSON-lines dataset file.");

    m.def(
        "extract_chunks",
        [](const std::vector<std::string>& tags) {
            py::list out;
            for (const auto& c : slu::extract_chunks(tags))
                out.append(py::make_tuple(c.type, c.start, c.end));
            return out;
        },
        py::arg("tags"), "Typed (type, start, end) spans of a BIO sequence, 1-based inclusive.");

    m.def(
        "compute_metrics",
        [](const std::vector<std::pair<std::vector<std::string>, std::string>>& golds,
           const std::vector<std::pair<std::vector<std::string>, std::string>>& preds) {
            std::vector<slu::LabeledUtterance> g, p;
            for (const auto& [tags, intent] : golds) g.push_back({tags, intent});
            for (const auto& [tags, intent] : preds) p.push_back({tags, intent});
            return json_to_py(nlohmann::json::parse(slu::metrics_json(slu::compute_metrics(g, p))));
        },
        py::arg("golds"), py::arg("preds"),
        "Slot F1 / intent accuracy / overall accuracy over (tags, intent) pairs.");

    m.def(
        "word_adapter",
        [](const std::vector<double>& v_c, const std::vector<double>& v_w,
           const std::vector<std::vector<double>>& gate) {
            int d = static_cast<int>(v_c.size());
            std::vector<double> flat;
            for (const auto& row : gate) flat.insert(flat.end(), row.begin(), row.end());
            slu::Graph<double> g(/*recording=*/false);
            slu::Var vc = g.input(slu::Shape{d}, v_c);
            slu::Var vw = g.input(slu::Shape{static_cast<int>(v_w.size())}, v_w);
            slu::Var wf = g.input(
                slu::Shape{static_cast<int>(gate.size()),
                           gate.empty() ? 0 : static_cast<int>(gate[0].size())},
                flat);
            auto fused = slu::word_adapter(g, vc, vw, wf);
            auto fv = g.value(fused.fused);
            return py::make_tuple(std::vector<double>(fv.begin(), fv.end()),
                                  g.value(fused.lambda)[0]);
        },
        py::arg("v_c"), py::arg("v_w"), py::arg("gate"),
        "Gated fusion (fused_vector, lambda) of a character and a word vector.");

    m.def(
        "train",
        [](const py::object& config, const std::string& train_path, const std::string& dev_path,
           const std::string& checkpoint_path) {
            slu::TrainConfig c = slu::train_config_from_json(py_to_json(config));
            auto run = slu::run_training(c, train_path, dev_path, checkpoint_path);
            return json_to_py(slu::train_report_to_json(run.report));
        },
        py::arg("config"), py::arg("train_path"), py::arg("dev_path") = "",
        py::arg("checkpoint_path") = "model.ckpt",
        "Train a model; returns the training report as a dict.");

    m.def(
        "evaluate",
        [](const std::string& checkpoint_path, const std::string& data_path) {
            auto metrics = slu::run_evaluation(checkpoint_path, data_path);
            return json_to_py(nlohmann::json::parse(slu::metrics_json(metrics)));
        },
        py::arg("checkpoint_path"), py::arg("data_path"),
        "Evaluate a checkpoint on a labeled dataset.");

    m.def(
        "predict",
        [](const std::string& checkpoint_path, const std::vector<std::string>& utterances,
           bool diagnostics) {
            py::list out;
            for (const auto& r : slu::run_prediction(checkpoint_path, utterances))
                out.append(json_to_py(slu::prediction_to_json(r, diagnostics)));
            return out;
        },
        py::arg("checkpoint_path"), py::arg("utterances"), py::arg("diagnostics") = false,
        "Tag raw utterances; returns one dict per utterance.");

    m.def(
        "gradcheck",
        []() {
            auto report = slu::run_gradcheck(std::nullopt);
            py::dict out;
            for (const auto& mode : report.modes) out[py::str(mode.mode)] = mode.max_rel_err;
            out["max"] = report.max_rel_err;
            return out;
        },
        "Finite-difference check of the model gradients on a tiny fixture.");
}
