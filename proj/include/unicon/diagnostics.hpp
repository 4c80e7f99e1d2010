#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "unicon/dataio.hpp"
#include "unicon/embedding.hpp"
#include "unicon/encoder.hpp"
#include "unicon/matrix.hpp"
#include "unicon/universum.hpp"

namespace unicon {

// Per-negative hardness scores: for each sample, the mean dot product of its
// embedding against the embeddings of all samples from other classes; for each
// synthetic mixture, the mean dot product against every sample embedding.
struct HardnessValues {
    std::vector<double> conventional;
    std::vector<double> universum;
    double lambda = 0.0;
};

// Embedding-level profile: no encoder involved, scores computed directly from
// an embedding set (the universum vector may be empty if the set has none).
HardnessValues hardness_profile(const EmbeddingSet& set);

// Encoder-level profile over an evenly strided slice of min(cap, n) samples
// (the whole dataset when cap >= n).  Mixtures are synthesized from the slice
// with the given policy, then both groups are pushed through the encoder.
// cap must be at least 2 and the slice must contain at least two classes.
HardnessValues hardness_values(const EncoderParams& params, const LabeledBatch& data,
                               const MixPolicy& policy, std::size_t cap,
                               std::uint64_t seed, int threads = 1);

struct HardnessHistogram {
    int epoch = 0;
    std::vector<double> edges;                 // bin_count + 1 ascending edges
    std::vector<std::size_t> conventional;     // counts per bin
    std::vector<std::size_t> universum;
    double conventional_mean = 0.0;
    double universum_mean = 0.0;
};

// Fixed binning over [-1, 1]; scores on the boundary fall into the last bin.
HardnessHistogram make_histogram(const HardnessValues& values, int epoch,
                                 std::size_t bin_count = 40);

HardnessHistogram record_hardness(const EncoderParams& params, const LabeledBatch& data,
                                  const MixPolicy& policy, std::size_t cap, int epoch,
                                  std::uint64_t seed, int threads = 1);

// Rows of `epoch,kind,bin_lo,bin_hi,count` with kind in {conventional, universum}.
void write_hardness_csv(const std::vector<HardnessHistogram>& history,
                        const std::string& path);

struct KsResult {
    double statistic = 0.0;   // max CDF gap
    double p_value = 1.0;     // asymptotic two-sample probability
};

KsResult two_sample_ks(std::vector<double> a, std::vector<double> b);

// Shape similarity of the two negative populations within one histogram: the
// KS statistic over the paired bin-count profiles.  Tight unimodal profiles of
// similar occupancy agree regardless of where on the axis they sit.
KsResult histogram_similarity(const HardnessHistogram& hist);

struct MarginReport {
    std::vector<int> class_ids;
    Matrix centroids;                  // one row per class, dataset order of ids
    Matrix centroid_distance;          // symmetric, zero diagonal
    double mean_anchor_to_own = 0.0;   // mean ||z_i - c_{y_i}||
    double mean_universum_to_nearest = 0.0;
    double separation_ratio = 0.0;     // universum-to-nearest over anchor-to-own
};

MarginReport margin_report(const EncoderParams& params, const LabeledBatch& data,
                           const MixPolicy& policy, std::uint64_t seed,
                           int threads = 1);

// Writes two CSV files, each with a `label,dim0..dimk` header: one row per
// sample embedding, and one row per mixture embedding labeled -1.
void export_embeddings(const EncoderParams& params, const LabeledBatch& data,
                       const MixPolicy& policy, const std::string& sample_path,
                       const std::string& mixture_path, std::uint64_t seed,
                       int threads = 1);

}  // namespace unicon
