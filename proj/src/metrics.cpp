#include "slu/metrics.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "slu/errors.hpp"

namespace slu {

namespace {

// "" for O, the type for B-x / I-x.
std::string tag_type(const std::string& tag) {
    if (tag.size() >= 3 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-') return tag.substr(2);
    return "";
}

}  // namespace

std::vector<Chunk> extract_chunks(const std::vector<std::string>& tags) {
    std::vector<Chunk> chunks;
    std::string open_type;
    int open_start = 0;
    auto close = [&](int end) {
        if (!open_type.empty()) {
            chunks.push_back(Chunk{open_type, open_start, end});
            open_type.clear();
        }
    };
    for (int t = 0; t < static_cast<int>(tags.size()); ++t) {
        const std::string& tag = tags[static_cast<std::size_t>(t)];
        std::string type = tag_type(tag);
        if (type.empty()) {  // O
            close(t);
        } else if (tag[0] == 'B' || type != open_type) {
            close(t);
            open_type = type;
            open_start = t + 1;
        }
        // I-x with x == open_type extends the open chunk.
    }
    close(static_cast<int>(tags.size()));
    return chunks;
}

Metrics compute_metrics(const std::vector<LabeledUtterance>& golds,
                        const std::vector<LabeledUtterance>& preds) {
    if (golds.size() != preds.size())
        throw ContractError("compute_metrics: " + std::to_string(golds.size()) + " gold vs " +
                            std::to_string(preds.size()) + " predicted utterances");

    Metrics m;
    long long intent_hits = 0;
    long long overall_hits = 0;
    for (std::size_t i = 0; i < golds.size(); ++i) {
        const auto& g = golds[i];
        const auto& p = preds[i];
        if (g.tags.size() != p.tags.size())
            throw ContractError("compute_metrics: utterance " + std::to_string(i + 1) +
                                " has " + std::to_string(g.tags.size()) + " gold vs " +
                                std::to_string(p.tags.size()) + " predicted tags");

        std::set<Chunk> gold_chunks;
        for (auto& c : extract_chunks(g.tags)) gold_chunks.insert(std::move(c));
        std::set<Chunk> pred_chunks;
        for (auto& c : extract_chunks(p.tags)) pred_chunks.insert(std::move(c));

        for (const auto& c : pred_chunks) {
            if (gold_chunks.count(c)) {
                ++m.tp;
                ++m.per_type[c.type].tp;
            } else {
                ++m.fp;
                ++m.per_type[c.type].fp;
            }
        }
        for (const auto& c : gold_chunks) {
            if (!pred_chunks.count(c)) {
                ++m.fn;
                ++m.per_type[c.type].fn;
            }
        }

        bool intent_ok = g.intent == p.intent;
        bool slots_ok = g.tags == p.tags;
        if (intent_ok) ++intent_hits;
        if (intent_ok && slots_ok) ++overall_hits;
    }

    if (m.tp == 0 && m.fp == 0 && m.fn == 0) {
        m.slot_precision = m.slot_recall = m.slot_f1 = 1.0;
    } else {
        m.slot_precision = (m.tp + m.fp) > 0 ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp) : 0.0;
        m.slot_recall = (m.tp + m.fn) > 0 ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn) : 0.0;
        double pr = m.slot_precision + m.slot_recall;
        m.slot_f1 = pr > 0.0 ? 2.0 * m.slot_precision * m.slot_recall / pr : 0.0;
    }
    if (!golds.empty()) {
        m.intent_accuracy = static_cast<double>(intent_hits) / static_cast<double>(golds.size());
        m.overall_accuracy = static_cast<double>(overall_hits) / static_cast<double>(golds.size());
    }
    return m;
}

std::string metrics_table(const Metrics& m) {
    std::ostringstream os;
    char buf[128];
    os << "metric              value\n";
    std::snprintf(buf, sizeof buf, "slot precision      %.4f\n", m.slot_precision);
    os << buf;
    std::snprintf(buf, sizeof buf, "slot recall         %.4f\n", m.slot_recall);
    os << buf;
    std::snprintf(buf, sizeof buf, "slot F1             %.4f\n", m.slot_f1);
    os << buf;
    std::snprintf(buf, sizeof buf, "intent accuracy     %.4f\n", m.intent_accuracy);
    os << buf;
    std::snprintf(buf, sizeof buf, "overall accuracy    %.4f\n", m.overall_accuracy);
    os << buf;
    os << "chunks              tp=" << m.tp << " fp=" << m.fp << " fn=" << m.fn << "\n";
    return os.str();
}

std::string metrics_json(const Metrics& m) {
    nlohmann::json j;
    j["slot_precision"] = m.slot_precision;
    j["slot_recall"] = m.slot_recall;
    j["slot_f1"] = m.slot_f1;
    j["intent_accuracy"] = m.intent_accuracy;
    j["overall_accuracy"] = m.overall_accuracy;
    j["tp"] = m.tp;
    j["fp"] = m.fp;
    j["fn"] = m.fn;
    nlohmann::json types = nlohmann::json::object();
    for (const auto& [type, c] : m.per_type) {
        types[type] = {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}};
    }
    j["per_type"] = types;
    return j.dump();
}

}  // namespace slu
