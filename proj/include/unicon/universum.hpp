#pragma once

#include <cstdint>
#include <vector>

#include "unicon/dataio.hpp"
#include "unicon/matrix.hpp"

namespace unicon {

// Mixing coefficient policy: a fixed lambda, or one lambda per batch drawn
// from the symmetric Beta(gamma, gamma).
struct MixPolicy {
    enum class Mode { fixed, beta };
    Mode mode = Mode::fixed;
    double lambda = 0.5;  // fixed mode, must lie in (0, 1)
    double gamma = 1.0;   // beta mode concentration, must be > 0
};

// One universum mixture per view.  Row i is
//   u_i = lambda * x_i + (1 - lambda) * x_q(i)
// with q(i) drawn uniformly, with replacement, from the views whose label
// differs from view i's.  used_by[i] lists the anchors k with q(k) = i.
struct UniversumBatch {
    Matrix mixtures;                   // 2n x d
    std::vector<std::size_t> partner;  // q
    std::vector<std::vector<std::size_t>> used_by;
    double lambda = 0.5;
};

void validate_mix_policy(const MixPolicy& policy);

// Draw lambda for one batch under the policy.  Beta draws are clamped away
// from exactly 0 and 1.
double draw_lambda(const MixPolicy& policy, std::uint64_t seed);

UniversumBatch mix_universum(const AugmentedBatch& batch, const MixPolicy& policy,
                             std::uint64_t seed);

// Same synthesis over bare labeled rows (used by diagnostics, where the
// inputs are samples rather than augmented views).
UniversumBatch mix_universum(const Matrix& rows, const std::vector<int>& labels,
                             const MixPolicy& policy, std::uint64_t seed);

// Closed-form per-view mixture mean with the complement taken over all views
// not in the same-label set D_i; the complement therefore contains view i
// itself:
//   E(u_i) = lambda * x_i + (1 - lambda) * sum_{k not in D_i} x_k / (2n - |D_i|)
// The sampled mean of mix_universum differs from this by a fixed algebraic
// offset because sampling never picks view i; see the tests for the exact
// relation.
Matrix expected_universum(const AugmentedBatch& batch, double lambda);

// Sequence-reversal mixture over the first views:
//   down_k = lambda * first_k + (1 - lambda) * first_{n-1-k}
// and up is down read backwards.  second holds the untouched second views,
// labels are per sample.
struct SupMixBatch {
    Matrix mix_down;  // n x d
    Matrix mix_up;    // n x d
    Matrix second;    // n x d
    std::vector<int> labels;
    double lambda = 0.5;
};

SupMixBatch mix_supmix(const AugmentedBatch& batch, double lambda);

// Copy of the batch with each view pair relabeled as its own pseudo-class
// (the sample index), so mixing partners come from any other pair.
AugmentedBatch with_pair_pseudo_labels(const AugmentedBatch& batch);

}  // namespace unicon
