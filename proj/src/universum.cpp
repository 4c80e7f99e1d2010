#include "unicon/universum.hpp"

#include <cstring>

#include "unicon/errors.hpp"
#include "unicon/rng.hpp"
#include "unicon/simd.hpp"

namespace unicon {

void validate_mix_policy(const MixPolicy& policy) {
    if (policy.mode == MixPolicy::Mode::fixed) {
        if (!(policy.lambda > 0.0 && policy.lambda < 1.0)) {
            throw config_error("fixed mix lambda must lie in (0, 1)");
        }
    } else {
        if (!(policy.gamma > 0.0)) {
            throw config_error("beta mix gamma must be > 0");
        }
    }
}

double draw_lambda(const MixPolicy& policy, std::uint64_t seed) {
    validate_mix_policy(policy);
    if (policy.mode == MixPolicy::Mode::fixed) return policy.lambda;
    Rng rng(seed, 0);
    double lam = rng.beta_symmetric(policy.gamma);
    if (lam < 1e-12) lam = 1e-12;
    if (lam > 1.0 - 1e-12) lam = 1.0 - 1e-12;
    return lam;
}

UniversumBatch mix_universum(const Matrix& rows, const std::vector<int>& labels,
                             const MixPolicy& policy, std::uint64_t seed) {
    const std::size_t n_views = rows.rows;
    const std::size_t d = rows.cols;
    if (n_views == 0) throw domain_error("mix_universum: empty batch");
    if (labels.size() != n_views) {
        throw domain_error("mix_universum: label count does not match row count");
    }

    const double lam = draw_lambda(policy, seed);

    UniversumBatch out;
    out.mixtures = Matrix(n_views, d);
    out.partner.resize(n_views);
    out.used_by.assign(n_views, {});
    out.lambda = lam;

    std::vector<std::size_t> candidates;
    candidates.reserve(n_views);
    for (std::size_t i = 0; i < n_views; ++i) {
        candidates.clear();
        for (std::size_t k = 0; k < n_views; ++k) {
            if (labels[k] != labels[i]) candidates.push_back(k);
        }
        if (candidates.empty()) {
            throw domain_error("mix_universum: view " + std::to_string(i) +
                               " has no out-of-class partner");
        }
        Rng rng(seed, i + 1);
        const std::size_t q = candidates[rng.next_below(candidates.size())];
        out.partner[i] = q;
        simd::combine(lam, rows.row(i), 1.0 - lam, rows.row(q),
                      out.mixtures.row(i), d);
    }
    for (std::size_t k = 0; k < n_views; ++k) {
        out.used_by[out.partner[k]].push_back(k);
    }
    return out;
}

UniversumBatch mix_universum(const AugmentedBatch& batch, const MixPolicy& policy,
                             std::uint64_t seed) {
    return mix_universum(batch.views, batch.labels, policy, seed);
}

Matrix expected_universum(const AugmentedBatch& batch, double lambda) {
    const std::size_t n_views = batch.view_count();
    const std::size_t d = batch.dim();
    if (!(lambda > 0.0 && lambda < 1.0)) {
        throw config_error("expected_universum lambda must lie in (0, 1)");
    }
    Matrix out(n_views, d);
    Vector comp_sum(d);
    for (std::size_t i = 0; i < n_views; ++i) {
        std::size_t same_other = 0;  // |D_i|
        std::fill(comp_sum.begin(), comp_sum.end(), 0.0);
        for (std::size_t k = 0; k < n_views; ++k) {
            const bool in_d = k != i && batch.labels[k] == batch.labels[i];
            if (in_d) {
                ++same_other;
            } else {
                simd::axpy(1.0, batch.views.row(k), comp_sum.data(), d);
            }
        }
        const std::size_t comp = n_views - same_other;
        simd::combine(lambda, batch.views.row(i), (1.0 - lambda) / comp,
                      comp_sum.data(), out.row(i), d);
    }
    return out;
}

SupMixBatch mix_supmix(const AugmentedBatch& batch, double lambda) {
    const std::size_t n_views = batch.view_count();
    if (n_views == 0 || n_views % 2 != 0) {
        throw domain_error("mix_supmix: need an even, non-empty view count");
    }
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw config_error("mix_supmix lambda must lie in [0, 1]");
    }
    const std::size_t n = n_views / 2;
    const std::size_t d = batch.dim();
    SupMixBatch out;
    out.mix_down = Matrix(n, d);
    out.mix_up = Matrix(n, d);
    out.second = Matrix(n, d);
    out.labels.resize(n);
    out.lambda = lambda;
    for (std::size_t k = 0; k < n; ++k) {
        const double* first_k = batch.views.row(2 * k);
        const double* first_rev = batch.views.row(2 * (n - 1 - k));
        simd::combine(lambda, first_k, 1.0 - lambda, first_rev,
                      out.mix_down.row(k), d);
        std::memcpy(out.second.row(k), batch.views.row(2 * k + 1),
                    d * sizeof(double));
        out.labels[k] = batch.labels[2 * k];
    }
    for (std::size_t k = 0; k < n; ++k) {
        std::memcpy(out.mix_up.row(k), out.mix_down.row(n - 1 - k),
                    d * sizeof(double));
    }
    return out;
}

AugmentedBatch with_pair_pseudo_labels(const AugmentedBatch& batch) {
    AugmentedBatch out = batch;
    for (std::size_t i = 0; i < out.labels.size(); ++i) {
        out.labels[i] = static_cast<int>(out.origin[i]);
    }
    out.class_count = static_cast<int>(out.view_count() / 2);
    return out;
}

}  // namespace unicon
