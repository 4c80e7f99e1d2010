#include "unicon/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <utility>

#include <json.hpp>

#include "unicon/errors.hpp"
#include "unicon/rng.hpp"
#include "unicon/simd.hpp"
#include "unicon/threading.hpp"

namespace unicon {

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) {
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

std::uint64_t step_seed(std::uint64_t seed, int epoch, std::size_t step,
                        std::uint64_t salt) {
    Rng r(seed ^ salt, (static_cast<std::uint64_t>(epoch) << 32) | step);
    return r.next_u64();
}

int distinct_labels(const std::vector<int>& labels) {
    std::set<int> seen(labels.begin(), labels.end());
    return static_cast<int>(seen.size());
}

bool all_finite(const ParamGradients& g) {
    for (const Matrix& m : g.d_weights) {
        for (double v : m.data) {
            if (!std::isfinite(v)) return false;
        }
    }
    for (const Vector& b : g.d_biases) {
        for (double v : b) {
            if (!std::isfinite(v)) return false;
        }
    }
    return true;
}

bool all_finite(const EncoderParams& p) {
    for (const Matrix& m : p.weights) {
        for (double v : m.data) {
            if (!std::isfinite(v)) return false;
        }
    }
    for (const Vector& b : p.biases) {
        for (double v : b) {
            if (!std::isfinite(v)) return false;
        }
    }
    return true;
}

void sgd_step(EncoderParams& params, ParamGradients& velocity,
              const ParamGradients& grads, double lr, double momentum,
              double weight_decay) {
    auto update = [&](double* theta, double* vel, const double* g, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            vel[i] = momentum * vel[i] + g[i] + weight_decay * theta[i];
            theta[i] -= lr * vel[i];
        }
    };
    for (std::size_t l = 0; l < params.layer_count(); ++l) {
        update(params.weights[l].data.data(), velocity.d_weights[l].data.data(),
               grads.d_weights[l].data.data(), params.weights[l].data.size());
        update(params.biases[l].data(), velocity.d_biases[l].data(),
               grads.d_biases[l].data(), params.biases[l].size());
    }
}

// Loss and parameter gradient for one augmented batch.
double batch_step(const TrainConfig& cfg, const AugmentedBatch& aug,
                  const EncoderParams& params, int epoch, std::size_t step,
                  int threads, ParamGradients& out_grads) {
    LossConfig lcfg{cfg.tau, Reduction::mean, threads};
    const std::uint64_t mseed = step_seed(cfg.seed, epoch, step, 0xB2);

    if (cfg.loss == LossKind::supmix) {
        const double lam = draw_lambda(cfg.mix, mseed);
        SupMixBatch sm = mix_supmix(aug, lam);
        ForwardTrace t_mix = forward(params, sm.mix_down, threads);
        ForwardTrace t_sec = forward(params, sm.second, threads);
        SupMixEmbeddings e{t_mix.z, t_sec.z, sm.labels, sm.lambda};
        const double loss = supmix_loss(e, lcfg);
        SupMixGradients g = supmix_gradient(e, lcfg);
        out_grads = backward(params, sm.mix_down, t_mix, g.d_mix, nullptr, threads);
        accumulate(out_grads,
                   backward(params, sm.second, t_sec, g.d_second, nullptr, threads));
        return loss;
    }

    ForwardTrace t_anchor = forward(params, aug.views, threads);
    EmbeddingSet set;
    set.anchors = t_anchor.z;
    set.labels = aug.labels;
    set.pair = aug.pair;

    if (!requires_universum(cfg.loss)) {
        const double loss = loss_value(cfg.loss, set, lcfg);
        EmbeddingGradients g = embedding_gradient(cfg.loss, set, lcfg);
        out_grads = backward(params, aug.views, t_anchor, g.d_anchors, nullptr, threads);
        return loss;
    }

    UniversumBatch uni =
        cfg.loss == LossKind::un_uni
            ? mix_universum(with_pair_pseudo_labels(aug), cfg.mix, mseed)
            : mix_universum(aug, cfg.mix, mseed);
    ForwardTrace t_uni = forward(params, uni.mixtures, threads);
    set.universum = t_uni.z;

    const double loss = loss_value(cfg.loss, set, lcfg);
    EmbeddingGradients g = embedding_gradient(cfg.loss, set, lcfg);
    out_grads = backward(params, aug.views, t_anchor, g.d_anchors, nullptr, threads);
    accumulate(out_grads,
               backward(params, uni.mixtures, t_uni, g.d_universum, nullptr, threads));
    return loss;
}

}  // namespace

void validate_train_config(const TrainConfig& cfg, std::size_t input_dim) {
    if (cfg.widths.size() < 2) {
        throw config_error("encoder needs at least an input and an output width");
    }
    if (cfg.widths.front() != input_dim) {
        throw config_error("encoder input width " + std::to_string(cfg.widths.front()) +
                           " does not match data dimension " + std::to_string(input_dim));
    }
    for (std::size_t w : cfg.widths) {
        if (w == 0) throw config_error("encoder widths must be positive");
    }
    if (cfg.epochs < 1) throw config_error("epochs must be at least 1");
    if (cfg.warmup_epochs < 0 || cfg.warmup_epochs >= cfg.epochs) {
        throw config_error("warmup epochs must lie in [0, epochs)");
    }
    if (cfg.batch_size < 2) throw config_error("batch size must be at least 2");
    if (!(cfg.lr >= 0.0)) throw config_error("learning rate must be >= 0");
    if (!(cfg.tau > 0.0)) throw config_error("temperature must be positive");
    if (cfg.momentum < 0.0 || cfg.momentum >= 1.0) {
        throw config_error("momentum must lie in [0, 1)");
    }
    if (cfg.weight_decay < 0.0) throw config_error("weight decay must be >= 0");
    if (cfg.augment_noise < 0.0) throw config_error("augment noise must be >= 0");
    if (cfg.augment_drop < 0.0 || cfg.augment_drop >= 1.0) {
        throw config_error("augment drop probability must lie in [0, 1)");
    }
    if (cfg.hardness_cap < 2) throw config_error("hardness cap must be at least 2");
    validate_mix_policy(cfg.mix);
}

std::vector<double> lr_schedule(int epochs, int warmup, double peak) {
    if (epochs < 1) throw config_error("epochs must be at least 1");
    if (warmup < 0 || warmup >= epochs) {
        throw config_error("warmup epochs must lie in [0, epochs)");
    }
    if (!(peak >= 0.0)) throw config_error("peak learning rate must be >= 0");
    std::vector<double> lr(static_cast<std::size_t>(epochs));
    for (int t = 0; t < epochs; ++t) {
        if (t < warmup) {
            lr[t] = peak * static_cast<double>(t + 1) / static_cast<double>(warmup);
        } else {
            const double phase = static_cast<double>(t - warmup) /
                                 static_cast<double>(epochs - warmup);
            lr[t] = peak * 0.5 * (1.0 + std::cos(M_PI * phase));
        }
    }
    return lr;
}

TrainResult pretrain(const LabeledBatch& data, const TrainConfig& cfg,
                     const EpochObserver& observer) {
    validate_train_config(cfg, data.dim());
    if (data.size() < 2) throw data_error("dataset needs at least two samples");
    const int threads = resolve_threads(cfg.threads);
    const auto t_run = clock_type::now();

    const std::size_t n = data.size();
    EncoderParams params = init_encoder(cfg.widths, cfg.activation, cfg.seed);
    ParamGradients velocity = zero_gradients(params);
    const std::vector<double> schedule =
        lr_schedule(cfg.epochs, cfg.warmup_epochs, cfg.lr);
    const std::uint64_t hardness_seed = cfg.seed ^ 0x9E3779B97F4A7C15ull;

    {
        const std::size_t m = std::min<std::size_t>(cfg.hardness_cap, n);
        std::vector<int> slice_labels(m);
        for (std::size_t i = 0; i < m; ++i) {
            slice_labels[i] = data.labels[i * n / m];
        }
        if (distinct_labels(slice_labels) < 2) {
            throw data_error("hardness slice covers a single class; raise the cap");
        }
    }

    RunRecord record;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int e = 0; e < cfg.epochs; ++e) {
        const auto t_epoch = clock_type::now();
        Rng shuffle_rng(cfg.seed, 1000 + static_cast<std::uint64_t>(e));
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        int batches_used = 0;
        int dropped = 0;
        for (std::size_t lo = 0; lo < n; lo += cfg.batch_size) {
            const std::size_t hi = std::min(n, lo + cfg.batch_size);
            const std::size_t step = lo / cfg.batch_size;
            std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                         order.begin() + static_cast<std::ptrdiff_t>(hi));
            LabeledBatch chunk = subset(data, idx);
            if (chunk.size() < 2 || distinct_labels(chunk.labels) < 2) {
                ++dropped;
                continue;
            }

            AugmentedBatch aug =
                augment(chunk, cfg.augment_noise, cfg.augment_drop,
                        step_seed(cfg.seed, e, step, 0xA1));

            ParamGradients grads;
            double loss;
            try {
                loss = batch_step(cfg, aug, params, e, step, threads, grads);
            } catch (const domain_error& err) {
                // Runaway parameters show up first as embeddings the loss
                // kernels refuse; report that as divergence, not bad input.
                throw divergence_error(err.what(), e + 1, static_cast<int>(step));
            }
            if (!std::isfinite(loss)) {
                throw divergence_error("non-finite loss", e + 1,
                                       static_cast<int>(step));
            }
            if (!all_finite(grads)) {
                throw divergence_error("non-finite gradient", e + 1,
                                       static_cast<int>(step));
            }
            sgd_step(params, velocity, grads, schedule[static_cast<std::size_t>(e)],
                     cfg.momentum, cfg.weight_decay);
            if (!all_finite(params)) {
                throw divergence_error("non-finite parameters", e + 1,
                                       static_cast<int>(step));
            }
            loss_sum += loss;
            ++batches_used;
        }
        if (batches_used == 0) {
            throw data_error("epoch " + std::to_string(e + 1) +
                             ": every batch was dropped");
        }

        HardnessHistogram hist = record_hardness(params, data, cfg.mix,
                                                 cfg.hardness_cap, e + 1,
                                                 hardness_seed, threads);
        EpochRecord row;
        row.epoch = e + 1;
        row.loss = loss_sum / static_cast<double>(batches_used);
        row.lr = schedule[static_cast<std::size_t>(e)];
        row.conventional_hardness = hist.conventional_mean;
        row.universum_hardness = hist.universum_mean;
        row.dropped_batches = dropped;
        row.seconds = cfg.deterministic ? 0.0 : seconds_since(t_epoch);
        record.hardness.push_back(std::move(hist));
        record.epochs.push_back(row);
        if (observer) observer(e + 1, params, record.epochs.back());
    }
    record.total_seconds = cfg.deterministic ? 0.0 : seconds_since(t_run);
    return TrainResult{std::move(params), std::move(record)};
}

void write_record_jsonl(const RunRecord& record, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot open " + path + " for writing");
    for (const EpochRecord& row : record.epochs) {
        nlohmann::json j{{"epoch", row.epoch},
                         {"loss", row.loss},
                         {"lr", row.lr},
                         {"conventional_hardness", row.conventional_hardness},
                         {"universum_hardness", row.universum_hardness},
                         {"dropped_batches", row.dropped_batches},
                         {"seconds", row.seconds}};
        out << j.dump() << "\n";
    }
    nlohmann::json tail{{"checkpoint", record.checkpoint},
                        {"epochs", record.epochs.size()},
                        {"total_seconds", record.total_seconds}};
    out << tail.dump() << "\n";
    if (!out) throw data_error("write failed: " + path);
}

EntropyReport mix_label_entropy(double lambda) {
    if (!(lambda > 0.0) || !(lambda < 1.0)) {
        throw domain_error("mixing entropy needs lambda in (0, 1)");
    }
    EntropyReport r;
    r.value = -(lambda * std::log(lambda) + (1.0 - lambda) * std::log(1.0 - lambda));
    r.derivative = std::log((1.0 - lambda) / lambda);
    return r;
}

ProbeResult linear_probe(const EncoderParams& params, const LabeledBatch& data,
                         const ProbeConfig& cfg) {
    if (data.class_count < 2) throw domain_error("probe needs at least two classes");
    if (!(cfg.test_fraction > 0.0) || !(cfg.test_fraction < 1.0)) {
        throw config_error("probe test fraction must lie in (0, 1)");
    }
    if (cfg.iterations < 1) throw config_error("probe iterations must be at least 1");
    if (!(cfg.lr > 0.0)) throw config_error("probe learning rate must be positive");
    if (cfg.momentum < 0.0 || cfg.momentum >= 1.0) {
        throw config_error("probe momentum must lie in [0, 1)");
    }
    if (cfg.l2 < 0.0) throw config_error("probe l2 must be >= 0");
    const int threads = resolve_threads(cfg.threads);

    LabeledBatch working = data;
    if (cfg.shuffle_labels) {
        Rng rng(cfg.seed, 7);
        rng.shuffle(working.labels);
    }

    ForwardTrace trace = forward(params, working.features, threads);
    const Matrix& rep = trace.representation(working.features);
    const std::size_t r = rep.cols;
    const std::size_t c = static_cast<std::size_t>(working.class_count);

    Split split = stratified_split(working, cfg.test_fraction, cfg.seed);
    const std::size_t n_train = split.train.size();
    const std::size_t n_test = split.test.size();
    if (n_train == 0 || n_test == 0) {
        throw data_error("probe split left an empty side");
    }

    Vector mean(r, 0.0), inv_std(r, 0.0);
    for (std::size_t i : split.train) {
        const double* x = rep.row(i);
        for (std::size_t j = 0; j < r; ++j) mean[j] += x[j];
    }
    for (std::size_t j = 0; j < r; ++j) mean[j] /= static_cast<double>(n_train);
    for (std::size_t i : split.train) {
        const double* x = rep.row(i);
        for (std::size_t j = 0; j < r; ++j) {
            const double dev = x[j] - mean[j];
            inv_std[j] += dev * dev;
        }
    }
    for (std::size_t j = 0; j < r; ++j) {
        const double sd = std::sqrt(inv_std[j] / static_cast<double>(n_train));
        inv_std[j] = 1.0 / std::max(sd, 1e-8);
    }
    auto standardized = [&](const std::vector<std::size_t>& idx) {
        Matrix m(idx.size(), r);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const double* x = rep.row(idx[i]);
            double* y = m.row(i);
            for (std::size_t j = 0; j < r; ++j) y[j] = (x[j] - mean[j]) * inv_std[j];
        }
        return m;
    };
    Matrix x_train = standardized(split.train);
    Matrix x_test = standardized(split.test);

    Matrix w = Matrix::zeros(c, r);
    Vector b(c, 0.0);
    Matrix w_vel = Matrix::zeros(c, r);
    Vector b_vel(c, 0.0);
    Matrix dw(c, r);
    Vector db(c, 0.0);
    Vector logits(c);

    auto fill_probs = [&](const double* x) {
        for (std::size_t k = 0; k < c; ++k) {
            logits[k] = simd::dot(w.row(k), x, r) + b[k];
        }
        const double m = *std::max_element(logits.begin(), logits.end());
        double z = 0.0;
        for (std::size_t k = 0; k < c; ++k) {
            logits[k] = std::exp(logits[k] - m);
            z += logits[k];
        }
        for (std::size_t k = 0; k < c; ++k) logits[k] /= z;
    };

    const double inv_n = 1.0 / static_cast<double>(n_train);
    for (int it = 0; it < cfg.iterations; ++it) {
        std::fill(dw.data.begin(), dw.data.end(), 0.0);
        std::fill(db.begin(), db.end(), 0.0);
        for (std::size_t i = 0; i < n_train; ++i) {
            const double* x = x_train.row(i);
            fill_probs(x);
            const auto y = static_cast<std::size_t>(working.labels[split.train[i]]);
            logits[y] -= 1.0;
            for (std::size_t k = 0; k < c; ++k) {
                const double coeff = logits[k] * inv_n;
                if (coeff != 0.0) simd::axpy(coeff, x, dw.row(k), r);
                db[k] += coeff;
            }
        }
        for (std::size_t k = 0; k < c; ++k) {
            simd::axpy(cfg.l2, w.row(k), dw.row(k), r);
        }
        for (std::size_t i = 0; i < dw.data.size(); ++i) {
            w_vel.data[i] = cfg.momentum * w_vel.data[i] + dw.data[i];
            w.data[i] -= cfg.lr * w_vel.data[i];
        }
        for (std::size_t k = 0; k < c; ++k) {
            b_vel[k] = cfg.momentum * b_vel[k] + db[k];
            b[k] -= cfg.lr * b_vel[k];
        }
    }

    auto accuracy = [&](const Matrix& x, const std::vector<std::size_t>& idx) {
        std::size_t hits = 0;
        for (std::size_t i = 0; i < x.rows; ++i) {
            fill_probs(x.row(i));
            const std::size_t guess = static_cast<std::size_t>(
                std::max_element(logits.begin(), logits.end()) - logits.begin());
            if (guess == static_cast<std::size_t>(working.labels[idx[i]])) ++hits;
        }
        return static_cast<double>(hits) / static_cast<double>(x.rows);
    };

    ProbeResult res;
    res.train_accuracy = accuracy(x_train, split.train);
    res.accuracy = accuracy(x_test, split.test);
    return res;
}

std::vector<SweepRow> lambda_sweep(const LabeledBatch& data,
                                   const std::vector<double>& lambdas,
                                   TrainConfig cfg, const ProbeConfig& probe) {
    if (lambdas.empty()) throw config_error("lambda sweep needs at least one value");
    std::vector<SweepRow> rows;
    rows.reserve(lambdas.size());
    for (double lam : lambdas) {
        cfg.mix.mode = MixPolicy::Mode::fixed;
        cfg.mix.lambda = lam;
        const auto t0 = clock_type::now();
        TrainResult result = pretrain(data, cfg);
        ProbeResult pr = linear_probe(result.params, data, probe);
        SweepRow row;
        row.lambda = lam;
        row.accuracy = pr.accuracy;
        row.final_loss = result.record.epochs.back().loss;
        row.seconds = seconds_since(t0);
        rows.push_back(row);
    }
    return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot open " + path + " for writing");
    out << "lambda,accuracy,final_loss,seconds\n";
    char buf[128];
    for (const SweepRow& row : rows) {
        std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g,%.3f\n", row.lambda,
                      row.accuracy, row.final_loss, row.seconds);
        out << buf;
    }
    if (!out) throw data_error("write failed: " + path);
}

}  // namespace unicon
