// Acceptance suite: one printed line per criterion, exit 0 only when every
// criterion holds.  Criteria run in order and a throw inside one is reported
// as its failure without stopping the rest.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "naive_losses.hpp"
#include "unicon/dataio.hpp"
#include "unicon/diagnostics.hpp"
#include "unicon/encoder.hpp"
#include "unicon/gradients.hpp"
#include "unicon/losses.hpp"
#include "unicon/rng.hpp"
#include "unicon/trainer.hpp"
#include "unicon/universum.hpp"

namespace fs = std::filesystem;
using namespace unicon;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool report(int id, bool ok, const std::string& detail) {
    std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
    std::fflush(stdout);
    return ok;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

constexpr double kTaus[4] = {0.07, 0.1, 0.5, 1.0};

// 1. Six loss values against the brute-force recomputation on random batches.
bool criterion_1() {
    const auto t0 = Clock::now();
    double worst = 0.0;
    Rng shape(83119, 0);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t samples = 2 + shape.next_u64() % 7;
        const int classes = 2 + static_cast<int>(shape.next_u64() % 3);
        const std::size_t dim = 2 + shape.next_u64() % 15;
        const double tau = kTaus[shape.next_u64() % 4];
        const Reduction red =
            (trial % 2 == 0) ? Reduction::verbatim : Reduction::mean;
        const LossConfig cfg{tau, red, 1};

        EmbeddingSet e = naive::random_set(samples, classes, dim, 4200 + trial, true);
        auto track = [&](double got, double want) {
            worst = std::max(worst, std::fabs(got - want));
        };
        track(loss_value(LossKind::infonce, e, cfg),
              naive::infonce(e.anchors, e.pair, tau, red));
        track(loss_value(LossKind::supcon, e, cfg),
              naive::supcon(e.anchors, e.labels, tau, red));
        track(loss_value(LossKind::add, e, cfg),
              naive::add(e.anchors, e.universum, e.labels, tau, red));
        track(loss_value(LossKind::unicon, e, cfg),
              naive::unicon_loss(e.anchors, e.universum, e.labels, tau, red));
        track(loss_value(LossKind::un_uni, e, cfg),
              naive::un_uni(e.anchors, e.universum, e.pair, tau, red));

        Rng mix_rng(9100 + trial, 3);
        SupMixEmbeddings me;
        me.z_mix = naive::random_unit_rows(samples, dim, mix_rng);
        me.z_second = naive::random_unit_rows(samples, dim, mix_rng);
        me.labels.resize(samples);
        for (std::size_t s = 0; s < samples; ++s) me.labels[s] = e.labels[2 * s];
        me.lambda = mix_rng.uniform(0.05, 0.95);
        track(supmix_loss(me, cfg),
              naive::supmix(me.z_mix, me.z_second, me.labels, me.lambda, tau, red));
    }
    const double secs = seconds_since(t0);
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "six losses match brute-force recomputation on 100 random "
                  "batches (max abs diff %.2e, %.2fs)",
                  worst, secs);
    return report(1, worst <= 1e-10 && secs < 10.0, buf);
}

// 2. Full-path parameter gradients against central finite differences.
bool criterion_2() {
    const auto t0 = Clock::now();
    const LossKind kinds[6] = {LossKind::infonce, LossKind::supcon, LossKind::add,
                               LossKind::unicon,  LossKind::un_uni, LossKind::supmix};
    const FdSettings fd;
    double worst = 0.0;
    bool all = true;
    for (LossKind kind : kinds) {
        for (std::uint64_t seed = 1; seed <= 20; ++seed) {
            GradCheckSetup setup;
            setup.seed = seed;
            const GradCheckReport rep = gradcheck_full_path(kind, setup, fd);
            all = all && rep.pass;
            worst = std::max(worst, rep.max_rel_err);
        }
    }
    const double secs = seconds_since(t0);
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "backprop matches finite differences, 6 losses x 20 seeds "
                  "(max rel err %.2e, %.1fs)",
                  worst, secs);
    return report(2, all && worst < 1e-5 && secs < 60.0, buf);
}

// 3. Stop-gradient identity of the universum class-center objective,
// recomputed longhand from the embeddings.
bool criterion_3() {
    double worst_sum = 0.0;
    double worst_grad = 0.0;
    const double tau = 0.1;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        EmbeddingSet e = naive::random_set(4, 2, 10, 700 + seed, true);
        const std::size_t n = e.count();
        const std::size_t d = e.dim();
        for (std::size_t anchor = 0; anchor < n; ++anchor) {
            const GradientDecomposition dec =
                unicon_anchor_decomposition(e, anchor, tau);
            double sum = 0.0;
            for (double w : dec.softmax) sum += w;
            worst_sum = std::max(worst_sum, std::fabs(sum - 1.0));

            std::vector<double> weights(n, 0.0);
            double z = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                if (k == anchor) continue;
                weights[k] =
                    std::exp(naive::dot(e.anchors, anchor, e.universum, k) / tau);
                z += weights[k];
            }
            std::vector<double> center(d, 0.0);
            std::size_t positives = 0;
            for (std::size_t k = 0; k < n; ++k) {
                if (k == anchor || e.labels[k] != e.labels[anchor]) continue;
                ++positives;
                for (std::size_t c = 0; c < d; ++c)
                    center[c] += e.universum.at(k, c);
            }
            const Vector grad = unicon_anchor_gradient(e, anchor, tau);
            for (std::size_t c = 0; c < d; ++c) {
                double pulled = 0.0;
                for (std::size_t k = 0; k < n; ++k)
                    pulled += weights[k] / z * e.universum.at(k, c);
                const double expected =
                    (-center[c] / static_cast<double>(positives) + pulled) / tau;
                worst_grad = std::max(worst_grad, std::fabs(grad[c] - expected));
            }
        }
    }
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "stop-gradient identity holds to %.2e, softmax weights sum "
                  "to one within %.2e",
                  worst_grad, worst_sum);
    return report(3, worst_grad <= 1e-8 && worst_sum <= 1e-12, buf);
}

// 4. Closed forms on orthogonal embeddings: every anchor term is log(2N - 1).
bool criterion_4() {
    const double log3 = std::log(3.0);

    EmbeddingSet a;
    a.anchors = Matrix(4, 4);
    for (std::size_t i = 0; i < 4; ++i) a.anchors.at(i, i) = 1.0;
    a.labels = {0, 0, 1, 1};
    a.pair = {1, 0, 3, 2};
    const double info =
        loss_value(LossKind::infonce, a, LossConfig{1.0, Reduction::mean, 1});

    EmbeddingSet u;
    u.anchors = Matrix(4, 8);
    u.universum = Matrix(4, 8);
    for (std::size_t i = 0; i < 4; ++i) {
        u.anchors.at(i, i) = 1.0;
        u.universum.at(i, 4 + i) = 1.0;
    }
    u.labels = {0, 0, 1, 1};
    u.pair = {1, 0, 3, 2};
    const double uni_mean =
        loss_value(LossKind::unicon, u, LossConfig{1.0, Reduction::mean, 1});
    const double uni_verbatim =
        loss_value(LossKind::unicon, u, LossConfig{1.0, Reduction::verbatim, 1});

    const double worst = std::max({std::fabs(info - log3),
                                   std::fabs(uni_mean - log3),
                                   std::fabs(uni_verbatim - 4.0 * log3)});
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "orthogonal batches give log(2N-1) per anchor for both "
                  "conventional and universum losses (max dev %.2e)",
                  worst);
    return report(4, worst <= 1e-12, buf);
}

// 5. With one positive per anchor the class-positive loss is the pair loss.
bool criterion_5() {
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        Rng rng(3300 + trial, 5);
        const std::size_t samples = 2 + rng.next_u64() % 7;
        const std::size_t dim = 2 + rng.next_u64() % 15;
        const double tau = kTaus[rng.next_u64() % 4];

        EmbeddingSet e;
        e.anchors = naive::random_unit_rows(2 * samples, dim, rng);
        e.labels.resize(2 * samples);
        e.pair.resize(2 * samples);
        for (std::size_t s = 0; s < samples; ++s) {
            e.labels[2 * s] = e.labels[2 * s + 1] = static_cast<int>(s);
            e.pair[2 * s] = 2 * s + 1;
            e.pair[2 * s + 1] = 2 * s;
        }
        const LossConfig cfg{tau, Reduction::mean, 1};
        const double sup = loss_value(LossKind::supcon, e, cfg);
        const double info = loss_value(LossKind::infonce, e, cfg);
        const double oracle = naive::infonce(e.anchors, e.pair, tau, Reduction::mean);
        worst = std::max({worst, std::fabs(sup - info), std::fabs(sup - oracle)});
    }
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "singleton-positive class loss equals the pair loss on 50 "
                  "random batches (max diff %.2e)",
                  worst);
    return report(5, worst <= 1e-12, buf);
}

// 6. Mixing-entropy facts at and around the balanced coefficient.
bool criterion_6() {
    const EntropyReport mid = mix_label_entropy(0.5);
    double asym = 0.0;
    for (double l : {0.1, 0.2, 0.25, 0.35, 0.4}) {
        asym = std::max(asym, std::fabs(mix_label_entropy(l).value -
                                        mix_label_entropy(1.0 - l).value));
    }
    const double at_half = std::fabs(mid.value - std::log(2.0));
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "mixing entropy peaks at log 2 (dev %.2e), derivative %.2e "
                  "at 1/2, asymmetry %.2e",
                  at_half, mid.derivative, asym);
    return report(6, at_half <= 1e-12 && std::fabs(mid.derivative) <= 1e-12 &&
                         asym <= 1e-12,
                  buf);
}

TrainConfig benchmark_config() {
    TrainConfig cfg;
    cfg.widths = {32, 64, 16};
    cfg.activation = Activation::relu;
    cfg.loss = LossKind::unicon;
    cfg.tau = 0.1;
    cfg.mix.mode = MixPolicy::Mode::fixed;
    cfg.mix.lambda = 0.5;
    cfg.epochs = 200;
    cfg.batch_size = 64;
    cfg.lr = 0.05;
    cfg.warmup_epochs = 10;
    cfg.seed = 1;
    cfg.threads = 1;
    return cfg;
}

struct BenchmarkState {
    LabeledBatch data;
    TrainResult result;
    double accuracy = 0.0;
    bool ready = false;
};

// 7. The end-to-end blob benchmark: train, probe, beat the chance baseline.
bool criterion_7(BenchmarkState& st) {
    const auto t0 = Clock::now();
    st.data = make_blobs(DatasetSpec{});
    st.result = pretrain(st.data, benchmark_config());

    ProbeConfig probe;
    probe.threads = 1;
    const ProbeResult pr = linear_probe(st.result.params, st.data, probe);
    ProbeConfig chance = probe;
    chance.shuffle_labels = true;
    const ProbeResult sr = linear_probe(st.result.params, st.data, chance);

    const double secs = seconds_since(t0);
    st.accuracy = pr.accuracy;
    st.ready = true;
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "benchmark probe accuracy %.4f vs shuffled-label %.4f "
                  "(%.1fs)",
                  pr.accuracy, sr.accuracy, secs);
    return report(7, pr.accuracy >= 0.90 && pr.accuracy >= sr.accuracy + 0.5 &&
                         secs < 120.0,
                  buf);
}

// 8. Mixing-coefficient quality: balanced fixed mixing is no worse than the
// off-center choices, and symmetric Beta draws do not beat it meaningfully.
bool criterion_8(const BenchmarkState& st) {
    if (!st.ready) return report(8, false, "skipped: benchmark run unavailable");
    auto probe_at = [&](const MixPolicy& mix) {
        TrainConfig cfg = benchmark_config();
        cfg.mix = mix;
        const TrainResult tr = pretrain(st.data, cfg);
        ProbeConfig probe;
        probe.threads = 1;
        return linear_probe(tr.params, st.data, probe).accuracy;
    };
    MixPolicy fixed;
    fixed.lambda = 0.3;
    const double a03 = probe_at(fixed);
    fixed.lambda = 0.7;
    const double a07 = probe_at(fixed);
    const double a05 = st.accuracy;

    double beta_acc[3] = {0.0, 0.0, 0.0};
    const double gammas[3] = {1.0, 0.8, 0.5};
    bool beta_ok = true;
    for (int g = 0; g < 3; ++g) {
        MixPolicy beta;
        beta.mode = MixPolicy::Mode::beta;
        beta.gamma = gammas[g];
        beta_acc[g] = probe_at(beta);
        beta_ok = beta_ok && beta_acc[g] <= a05 + 0.02;
    }
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "fixed 0.5 probe %.4f vs 0.3 %.4f and 0.7 %.4f; beta "
                  "%.4f/%.4f/%.4f",
                  a05, a03, a07, beta_acc[0], beta_acc[1], beta_acc[2]);
    return report(8, a05 >= a03 - 0.02 && a05 >= a07 - 0.02 && beta_ok, buf);
}

// 9. Hardness drift over training plus epoch-1 profile-shape agreement.
bool criterion_9(const BenchmarkState& st) {
    if (!st.ready) return report(9, false, "skipped: benchmark run unavailable");
    const RunRecord& rec = st.result.record;
    const double first = rec.epochs.front().universum_hardness;
    const double last = rec.epochs.back().universum_hardness;
    const KsResult ks = histogram_similarity(rec.hardness.front());
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "universum hardness %.4f (epoch 1) -> %.4f (final); epoch-1 "
                  "profile shapes agree, KS p = %.3g",
                  first, last, ks.p_value);
    return report(9, last < first && ks.p_value > 0.01, buf);
}

// 10. Bit-for-bit reproducibility of the training command.
bool criterion_10() {
    const auto t0 = Clock::now();
    const fs::path root = "/tmp/unicon_acceptance_c10";
    fs::remove_all(root);
    fs::create_directories(root);
    const fs::path cfg_path = root / "config.json";
    {
        std::ofstream out(cfg_path);
        out << "{\n"
               "  \"dataset\": {\"classes\": 3, \"per_class\": 40, \"dim\": 8, "
               "\"seed\": 5},\n"
               "  \"encoder\": {\"widths\": [16, 8]},\n"
               "  \"train\": {\"epochs\": 15, \"warmup_epochs\": 3, "
               "\"batch_size\": 32, \"lr\": 0.05},\n"
               "  \"seed\": 33\n"
               "}\n";
    }
    auto run = [&](const std::string& name) {
        const std::string cmd = std::string(UNICON_CLI_PATH) + " train --config " +
                                cfg_path.string() + " --out-dir " +
                                (root / name).string() + " --threads 1 > " +
                                (root / (name + ".log")).string() + " 2>&1";
        const int raw = std::system(cmd.c_str());
        return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    };
    const int code_a = run("a");
    const int code_b = run("b");
    const std::string record_a = slurp(root / "a" / "record.jsonl");
    const std::string ckpt_a = slurp(root / "a" / "checkpoint.bin");
    const bool same = !record_a.empty() && !ckpt_a.empty() &&
                      record_a == slurp(root / "b" / "record.jsonl") &&
                      ckpt_a == slurp(root / "b" / "checkpoint.bin");
    const double secs = seconds_since(t0);
    fs::remove_all(root);
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "repeat runs byte-identical (record %zu bytes, checkpoint "
                  "%zu bytes, exits %d/%d, %.1fs)",
                  record_a.size(), ckpt_a.size(), code_a, code_b, secs);
    return report(10, code_a == 0 && code_b == 0 && same, buf);
}

}  // namespace

int main() {
    bool ok = true;
    auto guard = [&](int id, auto&& fn) {
        try {
            ok = fn() && ok;
        } catch (const std::exception& e) {
            ok = report(id, false, std::string("unexpected exception: ") + e.what());
        }
    };
    guard(1, criterion_1);
    guard(2, criterion_2);
    guard(3, criterion_3);
    guard(4, criterion_4);
    guard(5, criterion_5);
    guard(6, criterion_6);
    BenchmarkState st;
    guard(7, [&] { return criterion_7(st); });
    guard(8, [&] { return criterion_8(st); });
    guard(9, [&] { return criterion_9(st); });
    guard(10, criterion_10);
    return ok ? 0 : 1;
}
