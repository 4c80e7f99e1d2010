#include "unicon/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include "unicon/errors.hpp"
#include "unicon/simd.hpp"

namespace unicon {

namespace {

std::vector<double> mean_dots_against(const Matrix& rows, const Matrix& anchors,
                                      const std::vector<char>& include,
                                      const std::vector<std::size_t>& include_count) {
    std::vector<double> out(rows.rows, 0.0);
    const std::size_t m = anchors.rows;
    for (std::size_t i = 0; i < rows.rows; ++i) {
        double acc = 0.0;
        for (std::size_t a = 0; a < m; ++a) {
            if (!include.empty() && !include[i * m + a]) continue;
            acc += simd::dot(rows.row(i), anchors.row(a), rows.cols);
        }
        const std::size_t cnt = include.empty() ? m : include_count[i];
        out[i] = acc / static_cast<double>(cnt);
    }
    return out;
}

void require_two_classes(const std::vector<int>& labels, const char* where) {
    std::set<int> seen(labels.begin(), labels.end());
    if (seen.size() < 2) {
        throw domain_error(std::string(where) + ": need at least two classes");
    }
}

}  // namespace

HardnessValues hardness_profile(const EmbeddingSet& set) {
    const std::size_t m = set.count();
    if (m == 0) throw domain_error("hardness_profile: empty embedding set");
    require_two_classes(set.labels, "hardness_profile");

    HardnessValues out;

    std::vector<char> other(m * m, 0);
    std::vector<std::size_t> other_count(m, 0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t a = 0; a < m; ++a) {
            if (set.labels[a] != set.labels[i]) {
                other[i * m + a] = 1;
                ++other_count[i];
            }
        }
    }
    out.conventional = mean_dots_against(set.anchors, set.anchors, other, other_count);
    if (set.has_universum()) {
        out.universum = mean_dots_against(set.universum, set.anchors, {}, {});
    }
    return out;
}

HardnessValues hardness_values(const EncoderParams& params, const LabeledBatch& data,
                               const MixPolicy& policy, std::size_t cap,
                               std::uint64_t seed, int threads) {
    if (cap < 2) throw config_error("hardness cap must be at least 2");
    const std::size_t n = data.size();
    if (n < 2) throw domain_error("hardness_values: need at least two samples");
    const std::size_t m = std::min(cap, n);

    std::vector<std::size_t> idx(m);
    for (std::size_t i = 0; i < m; ++i) idx[i] = i * n / m;
    LabeledBatch slice = subset(data, idx);
    require_two_classes(slice.labels, "hardness_values");

    UniversumBatch uni = mix_universum(slice.features, slice.labels, policy, seed);

    Matrix z = forward(params, slice.features, threads).z;
    Matrix zu = forward(params, uni.mixtures, threads).z;

    EmbeddingSet set;
    set.anchors = std::move(z);
    set.universum = std::move(zu);
    set.labels = slice.labels;
    HardnessValues out = hardness_profile(set);
    out.lambda = uni.lambda;
    return out;
}

HardnessHistogram make_histogram(const HardnessValues& values, int epoch,
                                 std::size_t bin_count) {
    if (bin_count == 0) throw config_error("histogram needs at least one bin");
    HardnessHistogram h;
    h.epoch = epoch;
    h.edges.resize(bin_count + 1);
    for (std::size_t b = 0; b <= bin_count; ++b) {
        h.edges[b] = -1.0 + 2.0 * static_cast<double>(b) / static_cast<double>(bin_count);
    }
    h.conventional.assign(bin_count, 0);
    h.universum.assign(bin_count, 0);

    auto fill = [&](const std::vector<double>& vals, std::vector<std::size_t>& counts,
                    double& mean) {
        double acc = 0.0;
        for (double v : vals) {
            acc += v;
            const double t = (v + 1.0) / 2.0 * static_cast<double>(bin_count);
            long b = 0;
            if (std::isfinite(t)) {
                b = static_cast<long>(std::floor(t));
                if (b < 0) b = 0;
                if (b >= static_cast<long>(bin_count)) b = static_cast<long>(bin_count) - 1;
            }
            ++counts[static_cast<std::size_t>(b)];
        }
        mean = vals.empty() ? 0.0 : acc / static_cast<double>(vals.size());
    };
    fill(values.conventional, h.conventional, h.conventional_mean);
    fill(values.universum, h.universum, h.universum_mean);
    return h;
}

HardnessHistogram record_hardness(const EncoderParams& params, const LabeledBatch& data,
                                  const MixPolicy& policy, std::size_t cap, int epoch,
                                  std::uint64_t seed, int threads) {
    return make_histogram(hardness_values(params, data, policy, cap, seed, threads),
                          epoch);
}

void write_hardness_csv(const std::vector<HardnessHistogram>& history,
                        const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot open " + path + " for writing");
    out << "epoch,kind,bin_lo,bin_hi,count\n";
    char buf[160];
    for (const HardnessHistogram& h : history) {
        auto rows = [&](const char* kind, const std::vector<std::size_t>& counts) {
            for (std::size_t b = 0; b < counts.size(); ++b) {
                std::snprintf(buf, sizeof(buf), "%d,%s,%.17g,%.17g,%zu\n", h.epoch, kind,
                              h.edges[b], h.edges[b + 1], counts[b]);
                out << buf;
            }
        };
        rows("conventional", h.conventional);
        rows("universum", h.universum);
    }
    if (!out) throw data_error("write failed: " + path);
}

KsResult two_sample_ks(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) {
        throw domain_error("two_sample_ks: both samples must be non-empty");
    }
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());

    double d = 0.0;
    std::size_t ia = 0, ib = 0;
    double fa = 0.0, fb = 0.0;
    while (ia < a.size() && ib < b.size()) {
        const double va = a[ia];
        const double vb = b[ib];
        if (va <= vb) fa = static_cast<double>(++ia) / na;
        if (vb <= va) fb = static_cast<double>(++ib) / nb;
        d = std::max(d, std::fabs(fa - fb));
    }
    d = std::max(d, std::fabs(1.0 - fa));
    d = std::max(d, std::fabs(1.0 - fb));

    const double ne = std::sqrt(na * nb / (na + nb));
    const double lam = (ne + 0.12 + 0.11 / ne) * d;

    // Q_KS(lam) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 lam^2)
    double p;
    if (lam < 1e-9) {
        p = 1.0;
    } else {
        p = 0.0;
        double sign = 1.0;
        for (int j = 1; j <= 100; ++j) {
            const double term = std::exp(-2.0 * j * j * lam * lam);
            p += sign * term;
            sign = -sign;
            if (term < 1e-16) break;
        }
        p *= 2.0;
        p = std::min(1.0, std::max(0.0, p));
    }
    return KsResult{d, p};
}

KsResult histogram_similarity(const HardnessHistogram& hist) {
    std::vector<double> a(hist.conventional.begin(), hist.conventional.end());
    std::vector<double> b(hist.universum.begin(), hist.universum.end());
    return two_sample_ks(std::move(a), std::move(b));
}

MarginReport margin_report(const EncoderParams& params, const LabeledBatch& data,
                           const MixPolicy& policy, std::uint64_t seed, int threads) {
    const std::size_t n = data.size();
    if (n == 0) throw domain_error("margin_report: empty dataset");
    require_two_classes(data.labels, "margin_report");

    Matrix z = forward(params, data.features, threads).z;
    const std::size_t d = z.cols;

    std::set<int> ids(data.labels.begin(), data.labels.end());
    MarginReport rep;
    rep.class_ids.assign(ids.begin(), ids.end());
    const std::size_t c = rep.class_ids.size();

    std::vector<std::size_t> class_row(static_cast<std::size_t>(
                                           *std::max_element(rep.class_ids.begin(),
                                                             rep.class_ids.end())) +
                                       1);
    for (std::size_t r = 0; r < c; ++r) {
        class_row[static_cast<std::size_t>(rep.class_ids[r])] = r;
    }

    rep.centroids = Matrix::zeros(c, d);
    std::vector<std::size_t> counts(c, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = class_row[static_cast<std::size_t>(data.labels[i])];
        simd::axpy(1.0, z.row(i), rep.centroids.row(r), d);
        ++counts[r];
    }
    for (std::size_t r = 0; r < c; ++r) {
        simd::scale(1.0 / static_cast<double>(counts[r]), rep.centroids.row(r), d);
    }

    rep.centroid_distance = Matrix::zeros(c, c);
    Vector diff(d);
    auto euclid = [&](const double* x, const double* y) {
        for (std::size_t j = 0; j < d; ++j) diff[j] = x[j] - y[j];
        return std::sqrt(simd::dot(diff.data(), diff.data(), d));
    };
    for (std::size_t r = 0; r < c; ++r) {
        for (std::size_t s = r + 1; s < c; ++s) {
            const double dist = euclid(rep.centroids.row(r), rep.centroids.row(s));
            rep.centroid_distance.at(r, s) = dist;
            rep.centroid_distance.at(s, r) = dist;
        }
    }

    double intra = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = class_row[static_cast<std::size_t>(data.labels[i])];
        intra += euclid(z.row(i), rep.centroids.row(r));
    }
    rep.mean_anchor_to_own = intra / static_cast<double>(n);

    UniversumBatch uni = mix_universum(data.features, data.labels, policy, seed);
    Matrix zu = forward(params, uni.mixtures, threads).z;
    double uni_near = 0.0;
    for (std::size_t k = 0; k < zu.rows; ++k) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < c; ++r) {
            best = std::min(best, euclid(zu.row(k), rep.centroids.row(r)));
        }
        uni_near += best;
    }
    rep.mean_universum_to_nearest = uni_near / static_cast<double>(zu.rows);

    rep.separation_ratio = rep.mean_anchor_to_own > 0.0
                               ? rep.mean_universum_to_nearest / rep.mean_anchor_to_own
                               : std::numeric_limits<double>::infinity();
    return rep;
}

namespace {

void write_embedding_csv(const std::string& path, const Matrix& rows,
                         const std::vector<int>* labels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot open " + path + " for writing");
    out << "label";
    for (std::size_t j = 0; j < rows.cols; ++j) out << ",dim" << j;
    out << "\n";
    char buf[32];
    for (std::size_t i = 0; i < rows.rows; ++i) {
        out << (labels ? (*labels)[i] : -1);
        const double* r = rows.row(i);
        for (std::size_t j = 0; j < rows.cols; ++j) {
            std::snprintf(buf, sizeof(buf), ",%.17g", r[j]);
            out << buf;
        }
        out << "\n";
    }
    if (!out) throw data_error("write failed: " + path);
}

}  // namespace

void export_embeddings(const EncoderParams& params, const LabeledBatch& data,
                       const MixPolicy& policy, const std::string& sample_path,
                       const std::string& mixture_path, std::uint64_t seed,
                       int threads) {
    if (data.size() == 0) throw domain_error("export_embeddings: empty dataset");
    Matrix z = forward(params, data.features, threads).z;
    write_embedding_csv(sample_path, z, &data.labels);

    UniversumBatch uni = mix_universum(data.features, data.labels, policy, seed);
    Matrix zu = forward(params, uni.mixtures, threads).z;
    write_embedding_csv(mixture_path, zu, nullptr);
}

}  // namespace unicon
