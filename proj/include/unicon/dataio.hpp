#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "unicon/matrix.hpp"

namespace unicon {

// A labeled dataset in struct-of-arrays form: one feature row per sample,
// labels already re-indexed to the dense range [0, class_count).
struct LabeledBatch {
    Matrix features;          // n x d
    std::vector<int> labels;  // size n
    int class_count = 0;

    std::size_t size() const { return features.rows; }
    std::size_t dim() const { return features.cols; }
};

// Synthetic Gaussian-blob dataset description.
struct DatasetSpec {
    int classes = 4;
    int per_class = 500;
    int dim = 32;
    double center_scale = 5.0;  // class centers ~ N(0, center_scale^2 I)
    double noise = 1.0;         // sample = center + noise * N(0, I)
    std::uint64_t seed = 7;
};

// Two stochastic views per sample, interleaved: rows 2k and 2k+1 are the
// views of sample k.  pair is the view-partner involution, origin maps each
// view back to its sample.
struct AugmentedBatch {
    Matrix views;  // 2n x d
    std::vector<int> labels;
    std::vector<std::size_t> pair;
    std::vector<std::size_t> origin;
    int class_count = 0;

    std::size_t view_count() const { return views.rows; }
    std::size_t dim() const { return views.cols; }
};

LabeledBatch make_blobs(const DatasetSpec& spec);

// CSV ingestion: one row per sample, label in column label_col (0-based),
// every other column a feature.  Labels may be arbitrary integers; they are
// re-indexed densely in order of first appearance and the mapping is
// returned through label_map (original -> dense) when non-null.
LabeledBatch load_csv(const std::string& path, int label_col = 0,
                      std::map<long long, int>* label_map = nullptr);

// Writes label,feat0,...,featk rows with round-trip-exact float formatting.
void save_csv(const LabeledBatch& batch, const std::string& path);

// Two views per sample: add Gaussian noise (noise_scale) then zero each
// coordinate independently with probability drop_prob.  Both knobs at zero
// reproduce the sample in both views.
AugmentedBatch augment(const LabeledBatch& batch, double noise_scale,
                       double drop_prob, std::uint64_t seed);

// Reorder an interleaved batch to block layout: all first views, then all
// second views, with pair/labels/origin remapped to match.
AugmentedBatch to_block_layout(const AugmentedBatch& batch);

// Select rows of a dataset by index.
LabeledBatch subset(const LabeledBatch& batch, const std::vector<std::size_t>& idx);

// Deterministic stratified holdout: same class proportions on both sides.
struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};
Split stratified_split(const LabeledBatch& batch, double test_fraction,
                       std::uint64_t seed);

}  // namespace unicon
