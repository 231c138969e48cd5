#include "slu/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace slu {

static_assert(std::endian::native == std::endian::little,
              "checkpoint records are written as little-endian raw values");

namespace {

constexpr char kMagic[8] = {'S', 'L', 'U', 'A', 'D', 'A', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void fnv_mix(std::uint64_t& h, const std::string& s) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    h ^= 0x1F;  // separator
    h *= 1099511628211ULL;
}

template <typename T>
void write_pod(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw IoError("checkpoint truncated");
    return v;
}

}  // namespace

std::string vocab_hash(const Vocabularies& vocabs) {
    std::uint64_t h = 14695981039346656037ULL;
    for (const Vocab* v :
         {&vocabs.char_vocab, &vocabs.word_vocab, &vocabs.slot_vocab, &vocabs.intent_vocab}) {
        for (const auto& s : v->symbols()) fnv_mix(h, s);
        fnv_mix(h, "|");
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

nlohmann::json vocabularies_to_json(const Vocabularies& vocabs) {
    nlohmann::json j;
    j["chars"] = vocabs.char_vocab.symbols();
    j["words"] = vocabs.word_vocab.symbols();
    j["slots"] = vocabs.slot_vocab.symbols();
    j["intents"] = vocabs.intent_vocab.symbols();
    return j;
}

Vocabularies vocabularies_from_json(const nlohmann::json& j) {
    Vocabularies v;
    auto fill = [](Vocab& vocab, const nlohmann::json& arr, std::size_t skip) {
        std::size_t i = 0;
        for (const auto& s : arr) {
            if (i++ < skip) continue;  // <pad>/<unk> already present
            vocab.add(s.get<std::string>());
        }
    };
    fill(v.char_vocab, j.at("chars"), 2);
    fill(v.word_vocab, j.at("words"), 2);
    fill(v.slot_vocab, j.at("slots"), 0);
    fill(v.intent_vocab, j.at("intents"), 0);
    return v;
}

Vocabularies Checkpoint::vocabularies() const {
    Vocabularies v = vocabularies_from_json(manifest.vocabs);
    if (vocab_hash(v) != manifest.hash)
        throw ContractError("checkpoint vocab hash mismatch: manifest says " + manifest.hash +
                            " but the embedded tables hash to " + vocab_hash(v));
    return v;
}

template <typename S>
ParamStore<S> Checkpoint::to_params() const {
    ParamStore<S> store;
    for (const auto& rec : records) {
        Parameter<S>& p = store.create(rec.name, rec.shape);
        std::size_t n = p.value.size();
        if (rec.width == static_cast<int>(sizeof(S))) {
            std::memcpy(p.value.data.data(), rec.raw.data(), n * sizeof(S));
        } else if (rec.width == 4) {
            const float* src = reinterpret_cast<const float*>(rec.raw.data());
            for (std::size_t i = 0; i < n; ++i) p.value.data[i] = static_cast<S>(src[i]);
        } else {
            const double* src = reinterpret_cast<const double*>(rec.raw.data());
            for (std::size_t i = 0; i < n; ++i) p.value.data[i] = static_cast<S>(src[i]);
        }
    }
    return store;
}

template ParamStore<float> Checkpoint::to_params<float>() const;
template ParamStore<double> Checkpoint::to_params<double>() const;

template <typename S>
void write_checkpoint(std::ostream& out, const ParamStore<S>& params,
                      const CheckpointManifest& manifest) {
    out.write(kMagic, sizeof kMagic);
    write_pod(out, kVersion);

    nlohmann::json mj;
    mj["format_version"] = manifest.format_version;
    mj["precision"] = static_cast<int>(sizeof(S)) * 8;
    mj["dims"] = {{"emb_dim", manifest.dims.emb},
                  {"enc_hidden", manifest.dims.enc_hidden},
                  {"attn_dim", manifest.dims.attn_dim},
                  {"attn_heads", manifest.dims.attn_heads},
                  {"dec_hidden", manifest.dims.dec_hidden}};
    mj["config"] = manifest.config;
    mj["vocabs"] = manifest.vocabs;
    mj["vocab_hash"] = manifest.hash;
    std::string mstr = mj.dump();
    write_pod(out, static_cast<std::uint64_t>(mstr.size()));
    out.write(mstr.data(), static_cast<std::streamsize>(mstr.size()));

    write_pod(out, static_cast<std::uint32_t>(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Parameter<S>& p = params[i];
        write_pod(out, static_cast<std::uint16_t>(p.name.size()));
        out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        write_pod(out, static_cast<std::uint8_t>(sizeof(S)));
        write_pod(out, static_cast<std::uint8_t>(p.value.shape.size()));
        for (int d : p.value.shape) write_pod(out, static_cast<std::uint32_t>(d));
        out.write(reinterpret_cast<const char*>(p.value.data.data()),
                  static_cast<std::streamsize>(p.value.size() * sizeof(S)));
    }
    if (!out) throw IoError("failed to write checkpoint stream");
}

template void write_checkpoint<float>(std::ostream&, const ParamStore<float>&,
                                      const CheckpointManifest&);
template void write_checkpoint<double>(std::ostream&, const ParamStore<double>&,
                                       const CheckpointManifest&);

template <typename S>
void save_checkpoint(const std::string& path, const ParamStore<S>& params,
                     const CheckpointManifest& manifest) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open checkpoint file for writing: " + path);
    write_checkpoint(out, params, manifest);
    if (!out) throw IoError("failed to write checkpoint: " + path);
}

template void save_checkpoint<float>(const std::string&, const ParamStore<float>&,
                                     const CheckpointManifest&);
template void save_checkpoint<double>(const std::string&, const ParamStore<double>&,
                                      const CheckpointManifest&);

Checkpoint read_checkpoint(std::istream& in) {
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw ContractError("not a checkpoint file (bad magic)");
    auto version = read_pod<std::uint32_t>(in);
    if (version != kVersion)
        throw ContractError("unsupported checkpoint version " + std::to_string(version));

    auto mlen = read_pod<std::uint64_t>(in);
    std::string mstr(mlen, '\0');
    in.read(mstr.data(), static_cast<std::streamsize>(mlen));
    if (!in) throw IoError("checkpoint truncated in manifest");
    nlohmann::json mj;
    try {
        mj = nlohmann::json::parse(mstr);
    } catch (const nlohmann::json::exception& e) {
        throw ContractError(std::string("invalid checkpoint manifest: ") + e.what());
    }

    Checkpoint ckpt;
    ckpt.manifest.format_version = mj.at("format_version").get<int>();
    ckpt.manifest.precision = mj.at("precision").get<int>();
    const auto& dims = mj.at("dims");
    ckpt.manifest.dims.emb = dims.at("emb_dim").get<int>();
    ckpt.manifest.dims.enc_hidden = dims.at("enc_hidden").get<int>();
    ckpt.manifest.dims.attn_dim = dims.at("attn_dim").get<int>();
    ckpt.manifest.dims.attn_heads = dims.at("attn_heads").get<int>();
    ckpt.manifest.dims.dec_hidden = dims.at("dec_hidden").get<int>();
    ckpt.manifest.config = mj.at("config");
    ckpt.manifest.vocabs = mj.at("vocabs");
    ckpt.manifest.hash = mj.at("vocab_hash").get<std::string>();

    auto n_records = read_pod<std::uint32_t>(in);
    ckpt.records.reserve(n_records);
    for (std::uint32_t r = 0; r < n_records; ++r) {
        Checkpoint::Record rec;
        auto name_len = read_pod<std::uint16_t>(in);
        rec.name.resize(name_len);
        in.read(rec.name.data(), name_len);
        rec.width = read_pod<std::uint8_t>(in);
        if (rec.width != 4 && rec.width != 8)
            throw ContractError("checkpoint record " + rec.name + " has invalid width");
        auto rank = read_pod<std::uint8_t>(in);
        std::int64_t count = 1;
        for (int d = 0; d < rank; ++d) {
            auto dim = read_pod<std::uint32_t>(in);
            rec.shape.push_back(static_cast<int>(dim));
            count *= dim;
        }
        rec.raw.resize(static_cast<std::size_t>(count) * static_cast<std::size_t>(rec.width));
        in.read(reinterpret_cast<char*>(rec.raw.data()),
                static_cast<std::streamsize>(rec.raw.size()));
        if (!in) throw IoError("checkpoint truncated in record " + rec.name);
        ckpt.records.push_back(std::move(rec));
    }
    return ckpt;
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint file: " + path);
    return read_checkpoint(in);
}

}  // namespace slu
