#pragma once

#include <map>
#include <string>
#include <vector>

namespace slu {

// A typed span recovered from a BIO tag sequence. Positions are 1-based and
// inclusive on both ends.
struct Chunk {
    std::string type;
    int start = 0;
    int end = 0;

    friend bool operator==(const Chunk&, const Chunk&) = default;
    friend auto operator<=>(const Chunk&, const Chunk&) = default;
};

struct TypeCounts {
    long long tp = 0;
    long long fp = 0;
    long long fn = 0;
};

struct Metrics {
    double slot_precision = 0.0;
    double slot_recall = 0.0;
    double slot_f1 = 0.0;
    double intent_accuracy = 0.0;
    double overall_accuracy = 0.0;
    long long tp = 0;
    long long fp = 0;
    long long fn = 0;
    std::map<std::string, TypeCounts> per_type;
};

// CoNLL-style chunking with the usual leniency: I-x after O or after a chunk
// of a different type opens a new chunk.
std::vector<Chunk> extract_chunks(const std::vector<std::string>& tags);

struct LabeledUtterance {
    std::vector<std::string> tags;
    std::string intent;
};

// Micro-averaged chunk P/R/F1 over the corpus plus intent and overall
// (intent AND exact tag sequence) accuracy. When neither gold nor predictions
// contain a single chunk, P = R = F1 = 1; otherwise 0/0 counts as 0.
Metrics compute_metrics(const std::vector<LabeledUtterance>& golds,
                        const std::vector<LabeledUtterance>& preds);

std::string metrics_table(const Metrics& m);
std::string metrics_json(const Metrics& m);

}  // namespace slu
