// Acceptance suite: one test case per criterion, each printing a PASS/FAIL
// line with its measured quantities.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

#include "slu/pipeline.hpp"
#include "slu/utf8.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace slu;
namespace fs = std::filesystem;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void report(int criterion, bool ok, const std::string& detail) {
    std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", criterion, detail.c_str());
    std::fflush(stdout);
}

TrainConfig default_config() { return TrainConfig{}; }

struct EncodedCorpus {
    Vocabularies vocabs;
    std::vector<EncodedSample> encoded;
    std::vector<LabeledUtterance> golds;
};

EncodedCorpus encode_corpus(const std::vector<AlignedSample>& samples) {
    EncodedCorpus out{build_vocabularies(samples), {}, {}};
    for (const auto& s : samples) {
        out.encoded.push_back(encode_sample(s, out.vocabs));
        out.golds.push_back(LabeledUtterance{s.utterance.slot_tags, *s.utterance.intent});
    }
    return out;
}

// The synthetic corpus all training criteria share: 50 utterances, 4
// intents, 5 slot types, segmentations consistent with its own dictionary.
const slu::testing::SyntheticCorpus& shared_corpus() {
    static auto corpus = slu::testing::generate_synthetic_corpus(20260809, 50);
    return corpus;
}

}  // namespace

TEST_CASE("criterion 1: gradient fidelity on a tiny full model, all ablation modes") {
    auto start = std::chrono::steady_clock::now();
    auto fixture = default_gradcheck_fixture();
    double worst = 0;
    std::string detail;
    for (AblationMode mode : {AblationMode::kFull, AblationMode::kNoSentenceWa,
                              AblationMode::kNoCharWa, AblationMode::kNoMultiLevel}) {
        double err = model_gradcheck(fixture, mode);
        worst = std::max(worst, err);
        detail += to_string(mode) + "=" + std::to_string(err) + " ";
    }
    double elapsed = seconds_since(start);
    bool ok = worst < 1e-4 && elapsed < 60.0;
    std::ostringstream os;
    os << "max rel err " << worst << " (" << detail << "), " << elapsed << " s";
    report(1, ok, os.str());
    CHECK(worst < 1e-4);
    CHECK(elapsed < 60.0);
}

TEST_CASE("criterion 2: gate properties over 1000 random triples") {
    auto start = std::chrono::steady_clock::now();
    Rng rng(424242);
    bool range_ok = true, between_ok = true, fixpoint_ok = true, mean_ok = true;

    auto run_wa = [](const std::vector<double>& vc, const std::vector<double>& vw,
                     const std::vector<double>& wf) {
        int d = static_cast<int>(vc.size());
        Graph<double> g(/*recording=*/false);
        auto out = word_adapter(g, g.input(Shape{d}, vc), g.input(Shape{d}, vw),
                                g.input(Shape{d, d}, wf));
        auto f = g.value(out.fused);
        return std::pair<std::vector<double>, double>({f.begin(), f.end()},
                                                      g.value(out.lambda)[0]);
    };

    for (int trial = 0; trial < 1000; ++trial) {
        int d = 1 + static_cast<int>(rng.next() % 6);
        std::vector<double> vc(static_cast<std::size_t>(d)), vw(static_cast<std::size_t>(d)),
            wf(static_cast<std::size_t>(d * d));
        for (auto& x : vc) x = rng.uniform(-3, 3);
        for (auto& x : vw) x = rng.uniform(-3, 3);
        for (auto& x : wf) x = rng.uniform(-2, 2);

        auto [fused, lambda] = run_wa(vc, vw, wf);
        range_ok = range_ok && lambda > 0.0 && lambda < 1.0;
        for (int j = 0; j < d; ++j) {
            double lo = std::min(vc[static_cast<std::size_t>(j)], vw[static_cast<std::size_t>(j)]);
            double hi = std::max(vc[static_cast<std::size_t>(j)], vw[static_cast<std::size_t>(j)]);
            between_ok = between_ok && fused[static_cast<std::size_t>(j)] >= lo - 1e-12 &&
                         fused[static_cast<std::size_t>(j)] <= hi + 1e-12;
        }

        auto [fp, l2] = run_wa(vc, vc, wf);
        for (int j = 0; j < d; ++j)
            fixpoint_ok = fixpoint_ok &&
                          std::abs(fp[static_cast<std::size_t>(j)] - vc[static_cast<std::size_t>(j)]) <= 1e-12;

        std::vector<double> zero(static_cast<std::size_t>(d * d), 0.0);
        auto [mean, l3] = run_wa(vc, vw, zero);
        mean_ok = mean_ok && l3 == 0.5;
        for (int j = 0; j < d; ++j)
            mean_ok = mean_ok &&
                      mean[static_cast<std::size_t>(j)] ==
                          (vc[static_cast<std::size_t>(j)] + vw[static_cast<std::size_t>(j)]) / 2.0;
    }
    double elapsed = seconds_since(start);
    bool ok = range_ok && between_ok && fixpoint_ok && mean_ok && elapsed < 5.0;
    std::ostringstream os;
    os << "lambda range " << (range_ok ? "ok" : "BAD") << ", betweenness "
       << (between_ok ? "ok" : "BAD") << ", WA(v,v)=v " << (fixpoint_ok ? "ok" : "BAD")
       << ", zero-gate mean " << (mean_ok ? "ok" : "BAD") << ", " << elapsed << " s";
    report(2, ok, os.str());
    CHECK(range_ok);
    CHECK(between_ok);
    CHECK(fixpoint_ok);
    CHECK(mean_ok);
    CHECK(elapsed < 5.0);
}

TEST_CASE("criterion 3: alignment matches the brute-force oracle exhaustively") {
    bool all_ok = true;
    long long cases = 0;
    std::vector<std::string> alphabet = utf8::split("酸甜苦辣咸鲜麻涩");
    std::vector<int> parts;
    std::function<void(int, int)> rec = [&](int total, int remaining) {
        if (remaining == 0) {
            std::vector<std::string> words;
            int pos = 0;
            for (int len : parts) {
                std::string w;
                for (int k = 0; k < len; ++k) w += alphabet[static_cast<std::size_t>(pos + k)];
                words.push_back(w);
                pos += len;
            }
            std::vector<std::string> chars(alphabet.begin(), alphabet.begin() + total);
            all_ok = all_ok &&
                     align_chars_to_words(chars, words) == slu::testing::align_oracle(words);
            ++cases;
            return;
        }
        for (int len = 1; len <= remaining; ++len) {
            parts.push_back(len);
            rec(total, remaining - len);
            parts.pop_back();
        }
    };
    for (int n = 1; n <= 8; ++n) rec(n, n);

    // the worked footnote example: f_align(3)=1, f_align(4)=2, f_align(6)=3
    auto alignment = align_chars_to_words(utf8::split("周冬雨有哪些电影"),
                                          {"周冬雨", "有", "哪些", "电影"});
    bool footnote_ok = alignment == std::vector<int>{1, 1, 1, 2, 3, 3, 4, 4} &&
                       alignment[2] == 1 && alignment[3] == 2 && alignment[5] == 3;

    bool ok = all_ok && footnote_ok;
    std::ostringstream os;
    os << cases << " segmentations agree with the oracle, worked example "
       << (footnote_ok ? "ok" : "BAD");
    report(3, ok, os.str());
    CHECK(all_ok);
    CHECK(footnote_ok);
}

TEST_CASE("criterion 4: slot F1 matches the chunk-enumeration reference") {
    std::mt19937 rng(987654);
    std::uniform_int_distribution<int> len_dist(1, 12);
    std::uniform_int_distribution<int> utt_dist(1, 4);
    std::uniform_int_distribution<int> kind(0, 2);
    std::uniform_int_distribution<int> type(0, 2);
    static const char* types[] = {"X", "Y", "Z"};

    auto random_tags = [&](int len) {
        std::vector<std::string> tags;
        for (int t = 0; t < len; ++t) {
            switch (kind(rng)) {
                case 0: tags.emplace_back("O"); break;
                case 1: tags.push_back(std::string("B-") + types[type(rng)]); break;
                default: tags.push_back(std::string("I-") + types[type(rng)]); break;
            }
        }
        return tags;
    };

    bool f1_ok = true, bound_ok = true;
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<std::vector<std::string>> gold_tags, pred_tags;
        std::vector<LabeledUtterance> golds, preds;
        int utts = utt_dist(rng);
        for (int u = 0; u < utts; ++u) {
            int len = len_dist(rng);
            gold_tags.push_back(random_tags(len));
            pred_tags.push_back(random_tags(len));
            golds.push_back({gold_tags.back(), kind(rng) ? "A" : "B"});
            preds.push_back({pred_tags.back(), kind(rng) ? "A" : "B"});
        }
        auto m = compute_metrics(golds, preds);
        double expected = slu::testing::f1_oracle(gold_tags, pred_tags);
        f1_ok = f1_ok && std::abs(m.slot_f1 - expected) <= 1e-12;

        double exact = 0;
        for (std::size_t i = 0; i < golds.size(); ++i)
            if (golds[i].tags == preds[i].tags) exact += 1;
        exact /= static_cast<double>(golds.size());
        bound_ok = bound_ok && m.overall_accuracy <= m.intent_accuracy + 1e-15 &&
                   m.overall_accuracy <= exact + 1e-15;
    }

    // hand case: F1 = 2/3 exactly
    auto hand = compute_metrics({{{"B-X", "I-X", "O", "B-Y"}, "Q"}},
                                {{{"B-X", "I-X", "O", "O"}, "Q"}});
    bool hand_ok = hand.slot_f1 == 2.0 / 3.0;

    bool ok = f1_ok && bound_ok && hand_ok;
    std::ostringstream os;
    os << "500 random corpora F1 " << (f1_ok ? "ok" : "BAD") << ", overall bound "
       << (bound_ok ? "ok" : "BAD") << ", hand case F1=2/3 " << (hand_ok ? "ok" : "BAD");
    report(4, ok, os.str());
    CHECK(f1_ok);
    CHECK(bound_ok);
    CHECK(hand_ok);
}

TEST_CASE("criterion 5: overfit smoke test on the synthetic corpus, all modes") {
    const auto& corpus = shared_corpus();
    auto data = encode_corpus(corpus.samples);

    auto overfit = [&](const std::string& ablation) {
        TrainConfig config = default_config();
        config.ablation = ablation;
        config.max_epochs = 300;
        config.patience = 25;
        config.seed = 99;
        auto trained =
            train_model<float>(config, data.encoded, data.encoded, data.golds, data.vocabs);
        return std::pair<double, int>(trained.report.best_overall, trained.report.best_epoch);
    };

    auto start = std::chrono::steady_clock::now();
    auto [full_acc, full_epoch] = overfit("full");
    double full_elapsed = seconds_since(start);
    bool full_ok = full_acc == 1.0 && full_elapsed < 120.0;

    std::ostringstream os;
    os << "full: overall " << full_acc << " at epoch " << full_epoch << " in " << full_elapsed
       << " s";
    bool ablations_ok = true;
    for (const std::string mode : {"no_sentence_wa", "no_char_wa", "no_multi_level"}) {
        auto [acc, epoch] = overfit(mode);
        ablations_ok = ablations_ok && acc == 1.0;
        os << "; " << mode << ": " << acc << " at epoch " << epoch;
    }

    bool ok = full_ok && ablations_ok;
    report(5, ok, os.str());
    CHECK(full_acc == 1.0);
    CHECK(full_elapsed < 120.0);
    CHECK(ablations_ok);
}

TEST_CASE("criterion 6: ablation gradient plumbing over a full training step") {
    const auto& corpus = shared_corpus();
    auto data = encode_corpus(corpus.samples);
    TrainConfig config = default_config();
    config.precision = 64;

    auto batch_gate_grads = [&](AblationMode mode) {
        Model<double> model =
            Model<double>::build(config.dims, VocabSizes::of(data.vocabs), config.seed);
        ForwardOptions opts;
        opts.mode = mode;
        opts.phase = Phase::kTrain;
        GradMap<double> grads = GradMap<double>::zeros_like(model.params);
        for (int k = 0; k < config.batch_size; ++k) {
            Graph<double> g(/*recording=*/true);
            ParamBinder<double> bind(g);
            auto fwd = forward(g, bind, model, data.encoded[static_cast<std::size_t>(k)], opts);
            g.backward(fwd.loss);
            bind.accumulate_into(grads);
        }
        auto max_abs = [&](const std::string& name) {
            double m = 0;
            for (double x : grads.at(name)) m = std::max(m, std::abs(x));
            return m;
        };
        return std::pair<double, double>(max_abs("gate.sentence.W_f"), max_abs("gate.char.W_f"));
    };

    auto [full_sent, full_char] = batch_gate_grads(AblationMode::kFull);
    auto [nosent_sent, nosent_char] = batch_gate_grads(AblationMode::kNoSentenceWa);
    auto [nochar_sent, nochar_char] = batch_gate_grads(AblationMode::kNoCharWa);
    auto [nomulti_sent, nomulti_char] = batch_gate_grads(AblationMode::kNoMultiLevel);

    bool ok = full_sent > 0 && full_char > 0 && nosent_sent == 0.0 && nosent_char > 0 &&
              nochar_sent > 0 && nochar_char == 0.0 && nomulti_sent > 0 && nomulti_char > 0;
    std::ostringstream os;
    os << "full(" << full_sent << ", " << full_char << "), no_sentence_wa(" << nosent_sent << ", "
       << nosent_char << "), no_char_wa(" << nochar_sent << ", " << nochar_char
       << "), no_multi_level(" << nomulti_sent << ", " << nomulti_char << ")";
    report(6, ok, os.str());
    CHECK(full_sent > 0);
    CHECK(full_char > 0);
    CHECK(nosent_sent == 0.0);
    CHECK(nochar_char == 0.0);
    CHECK(nosent_char > 0);
    CHECK(nochar_sent > 0);
    CHECK(nomulti_sent > 0);
    CHECK(nomulti_char > 0);
}

TEST_CASE("criterion 7: same-seed training runs are bit-identical") {
    const auto& corpus = shared_corpus();
    fs::path dir = fs::temp_directory_path() / "slu_acceptance_determinism";
    fs::create_directories(dir);
    std::string train_path = (dir / "train.txt").string();
    std::string dict_path = (dir / "dict.txt").string();
    std::string ckpt_path = (dir / "model.ckpt").string();
    slu::testing::write_block_dataset(train_path, corpus.samples);
    slu::testing::write_dictionary(dict_path, corpus.dictionary);

    TrainConfig config;
    config.dims.emb = 16;
    config.dims.enc_hidden = 16;
    config.dims.attn_dim = 8;
    config.dims.dec_hidden = 16;
    config.batch_size = 8;
    config.max_epochs = 3;
    config.patience = 3;
    config.dropout = 0.1;  // the stochastic path must be reproducible too
    config.seed = 31337;
    config.segmenter.dictionary_path = dict_path;

    auto read_bytes = [](const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };

    auto run1 = run_training(config, train_path, "", ckpt_path);
    std::string report1 = train_report_to_json(run1.report).dump();
    std::string ckpt1 = read_bytes(ckpt_path);

    auto run2 = run_training(config, train_path, "", ckpt_path);
    std::string report2 = train_report_to_json(run2.report).dump();
    std::string ckpt2 = read_bytes(ckpt_path);

    bool reports_equal = report1 == report2;
    bool ckpts_equal = ckpt1 == ckpt2;
    bool ok = reports_equal && ckpts_equal && !ckpt1.empty();
    std::ostringstream os;
    os << "reports " << (reports_equal ? "identical" : "DIFFER") << ", checkpoints ("
       << ckpt1.size() << " bytes) " << (ckpts_equal ? "identical" : "DIFFER");
    report(7, ok, os.str());
    CHECK(reports_equal);
    CHECK(ckpts_equal);
    fs::remove_all(dir);
}

TEST_CASE("criterion 8 (optional): full-scale soft reproduction") {
    const char* cais_dir = std::getenv("SLU_CAIS_DIR");
    if (!cais_dir) {
        std::printf("[SKIP] criterion 8 (optional): set SLU_CAIS_DIR to a directory with "
                    "train.txt/dev.txt/test.txt to run the full-scale soft reproduction\n");
        return;
    }
    // Advisory only: five seeds with the documented defaults, averaged, then
    // compared against the reference ranges. Failures are reported but do
    // not gate the suite.
    fs::path dir(cais_dir);
    TrainConfig config = default_config();
    double f1_sum = 0, intent_sum = 0, overall_sum = 0;
    const int n_seeds = 5;
    for (int seed = 0; seed < n_seeds; ++seed) {
        config.seed = static_cast<std::uint64_t>(seed + 1);
        std::string ckpt = (fs::temp_directory_path() / "slu_cais.ckpt").string();
        run_training(config, (dir / "train.txt").string(), (dir / "dev.txt").string(), ckpt);
        auto metrics = run_evaluation(ckpt, (dir / "test.txt").string());
        f1_sum += metrics.slot_f1;
        intent_sum += metrics.intent_accuracy;
        overall_sum += metrics.overall_accuracy;
    }
    double f1 = 100 * f1_sum / n_seeds;
    double intent = 100 * intent_sum / n_seeds;
    double overall = 100 * overall_sum / n_seeds;
    bool within = std::abs(f1 - 88.61) <= 3.0 && std::abs(intent - 95.16) <= 3.0 &&
                  std::abs(overall - 86.17) <= 3.0;
    std::ostringstream os;
    os << "(advisory) 5-seed means: slot F1 " << f1 << ", intent " << intent << ", overall "
       << overall << (within ? " within +/-3.0 of the reference" : " OUTSIDE +/-3.0");
    report(8, within, os.str());
}
