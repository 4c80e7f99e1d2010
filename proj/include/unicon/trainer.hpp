#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "unicon/dataio.hpp"
#include "unicon/diagnostics.hpp"
#include "unicon/encoder.hpp"
#include "unicon/losses.hpp"
#include "unicon/universum.hpp"

namespace unicon {

struct TrainConfig {
    std::vector<std::size_t> widths;  // full chain, widths[0] = input dim
    Activation activation = Activation::relu;
    LossKind loss = LossKind::unicon;
    double tau = 0.1;
    MixPolicy mix;

    int epochs = 200;
    std::size_t batch_size = 64;
    double lr = 0.05;
    int warmup_epochs = 10;
    double momentum = 0.9;
    double weight_decay = 1e-4;

    double augment_noise = 0.1;
    double augment_drop = 0.05;

    std::uint64_t seed = 1;
    bool deterministic = true;  // zero out wall-clock fields in the records
    int threads = 1;
    std::size_t hardness_cap = 256;
};

void validate_train_config(const TrainConfig& cfg, std::size_t input_dim);

// Per-epoch learning rates: linear ramp from zero to peak over the first
// `warmup` epochs, then cosine decay to (nearly) zero at the last epoch.
std::vector<double> lr_schedule(int epochs, int warmup, double peak);

struct EpochRecord {
    int epoch = 0;  // 1-based
    double loss = 0.0;
    double lr = 0.0;
    double conventional_hardness = 0.0;
    double universum_hardness = 0.0;
    int dropped_batches = 0;
    double seconds = 0.0;  // zero when deterministic
};

struct RunRecord {
    std::vector<EpochRecord> epochs;
    std::vector<HardnessHistogram> hardness;  // one histogram per epoch
    std::string checkpoint = "";              // relative reference, set by callers
    double total_seconds = 0.0;               // zero when deterministic
};

struct TrainResult {
    EncoderParams params;
    RunRecord record;
};

// Called after each epoch with the 1-based epoch index, the parameters as of
// the end of that epoch and the record row just produced.
using EpochObserver =
    std::function<void(int, const EncoderParams&, const EpochRecord&)>;

// Contrastive pre-training with SGD (momentum + weight decay), per-epoch
// shuffling and two stochastic views per sample.  Batches with fewer than two
// samples or fewer than two distinct labels are dropped and counted.  A
// non-finite loss or gradient aborts with divergence_error.
TrainResult pretrain(const LabeledBatch& data, const TrainConfig& cfg,
                     const EpochObserver& observer = {});

// One JSON object per epoch, then a closing summary line.  Bit-identical
// across runs when cfg.deterministic held.
void write_record_jsonl(const RunRecord& record, const std::string& path);

struct EntropyReport {
    double value = 0.0;       // -[l ln l + (1-l) ln(1-l)]
    double derivative = 0.0;  // d value / d lambda = ln((1-l)/l)
};

// Shannon entropy of the two-point mixing distribution {lambda, 1-lambda}.
// Peaks at lambda = 1/2 where the derivative vanishes.
EntropyReport mix_label_entropy(double lambda);

struct ProbeConfig {
    double test_fraction = 0.2;
    int iterations = 300;
    double lr = 0.5;
    double momentum = 0.9;
    double l2 = 1e-4;
    std::uint64_t seed = 11;
    bool shuffle_labels = false;  // permute labels first, as a chance baseline
    int threads = 1;
};

struct ProbeResult {
    double accuracy = 0.0;  // holdout
    double train_accuracy = 0.0;
};

// Multinomial logistic regression on the frozen penultimate representation:
// standardize by training statistics, fit with full-batch gradient descent on
// a stratified split, report holdout accuracy.
ProbeResult linear_probe(const EncoderParams& params, const LabeledBatch& data,
                         const ProbeConfig& cfg);

struct SweepRow {
    double lambda = 0.0;
    double accuracy = 0.0;
    double final_loss = 0.0;
    double seconds = 0.0;
};

// Re-trains from scratch at each fixed lambda and probes the result.
std::vector<SweepRow> lambda_sweep(const LabeledBatch& data,
                                   const std::vector<double>& lambdas,
                                   TrainConfig cfg, const ProbeConfig& probe);

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);

}  // namespace unicon
