#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "slu/corpus.hpp"
#include "slu/model.hpp"
#include "slu/tensor.hpp"

namespace slu {

// FNV-1a over all vocabulary symbols; guards a checkpoint against being
// paired with the wrong symbol tables.
std::string vocab_hash(const Vocabularies& vocabs);

nlohmann::json vocabularies_to_json(const Vocabularies& vocabs);
Vocabularies vocabularies_from_json(const nlohmann::json& j);

struct CheckpointManifest {
    int format_version = 1;
    int precision = 32;  // storage width of the records
    ModelDims dims;
    nlohmann::json config;  // effective TrainConfig
    nlohmann::json vocabs;  // full symbol tables
    std::string hash;       // vocab_hash at save time
};

// Binary container: magic, version, manifest JSON, then one record per
// parameter (name, width flag, shape, little-endian raw values) in store
// order.
struct Checkpoint {
    CheckpointManifest manifest;
    struct Record {
        std::string name;
        int width = 4;  // bytes per value: 4 or 8
        Shape shape;
        std::vector<unsigned char> raw;
    };
    std::vector<Record> records;

    Vocabularies vocabularies() const;

    // Copies the records into a typed store (converting width as needed).
    template <typename S>
    ParamStore<S> to_params() const;
};

template <typename S>
void write_checkpoint(std::ostream& out, const ParamStore<S>& params,
                      const CheckpointManifest& manifest);

template <typename S>
void save_checkpoint(const std::string& path, const ParamStore<S>& params,
                     const CheckpointManifest& manifest);

Checkpoint read_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace slu
