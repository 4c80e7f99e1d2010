#include "unicon/gradients.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

#include "unicon/errors.hpp"
#include "unicon/rng.hpp"
#include "unicon/simd.hpp"

namespace unicon {

namespace {

struct Scenario {
    LossKind kind;
    AugmentedBatch views;
    UniversumBatch uni;
    SupMixBatch supmix;
    double tau = 0.1;
    bool uses_universum = false;
};

Scenario build_scenario(LossKind kind, const GradCheckSetup& s) {
    if (s.samples < 2) throw config_error("gradcheck needs at least 2 samples");
    if (s.classes < 2) throw config_error("gradcheck needs at least 2 classes");
    if (s.widths.empty() || s.widths[0] != s.input_dim) {
        throw config_error("widths[0] must equal input_dim");
    }
    LabeledBatch data;
    data.features = Matrix(s.samples, s.input_dim);
    data.labels.resize(s.samples);
    data.class_count = s.classes;
    Rng centers(s.seed, 101);
    Matrix mu(s.classes, s.input_dim);
    for (double& v : mu.data) v = 1.5 * centers.normal();
    Rng noise(s.seed, 102);
    for (std::size_t i = 0; i < s.samples; ++i) {
        const int c = static_cast<int>(i % s.classes);
        data.labels[i] = c;
        double* x = data.features.row(i);
        for (std::size_t j = 0; j < s.input_dim; ++j) {
            x[j] = mu.at(c, j) + noise.normal();
        }
    }

    Scenario sc;
    sc.kind = kind;
    sc.tau = s.tau;
    sc.views = augment(data, s.augment_noise, 0.0, s.seed + 1);
    MixPolicy policy;
    policy.lambda = s.lambda;
    if (kind == LossKind::add || kind == LossKind::unicon) {
        sc.uni = mix_universum(sc.views, policy, s.seed + 2);
        sc.uses_universum = true;
    } else if (kind == LossKind::un_uni) {
        sc.uni = mix_universum(with_pair_pseudo_labels(sc.views), policy, s.seed + 2);
        sc.uses_universum = true;
    } else if (kind == LossKind::supmix) {
        sc.supmix = mix_supmix(sc.views, s.lambda);
    }
    return sc;
}

double eval_loss(const EncoderParams& p, const Scenario& sc) {
    const auto red = Reduction::verbatim;
    if (sc.kind == LossKind::supmix) {
        const ForwardTrace tm = forward(p, sc.supmix.mix_down);
        const ForwardTrace tt = forward(p, sc.supmix.second);
        return detail::supmix_raw(tm.z, tt.z, sc.supmix.labels, sc.supmix.lambda,
                                  sc.tau, red, 1);
    }
    const ForwardTrace ta = forward(p, sc.views.views);
    if (sc.kind == LossKind::infonce) {
        return detail::infonce_raw(ta.z, sc.views.pair, sc.tau, red, 1);
    }
    if (sc.kind == LossKind::supcon) {
        return detail::supcon_raw(ta.z, sc.views.labels, sc.tau, red, 1);
    }
    const ForwardTrace tu = forward(p, sc.uni.mixtures);
    switch (sc.kind) {
        case LossKind::add:
            return detail::add_raw(ta.z, tu.z, sc.views.labels, sc.tau, red, 1);
        case LossKind::unicon:
            return detail::unicon_raw(ta.z, tu.z, sc.views.labels, sc.tau, red, 1);
        case LossKind::un_uni:
            return detail::un_uni_raw(ta.z, tu.z, sc.views.pair, sc.tau, red, 1);
        default:
            throw config_error("bad loss kind");
    }
}

ParamGradients analytic_grad(const EncoderParams& p, const Scenario& sc) {
    const auto red = Reduction::verbatim;
    if (sc.kind == LossKind::supmix) {
        const ForwardTrace tm = forward(p, sc.supmix.mix_down);
        const ForwardTrace tt = forward(p, sc.supmix.second);
        Matrix d_mix, d_second;
        detail::supmix_grad_raw(tm.z, tt.z, sc.supmix.labels, sc.supmix.lambda,
                                sc.tau, red, &d_mix, &d_second, 1);
        ParamGradients g = backward(p, sc.supmix.mix_down, tm, d_mix);
        accumulate(g, backward(p, sc.supmix.second, tt, d_second));
        return g;
    }
    const ForwardTrace ta = forward(p, sc.views.views);
    Matrix dz, du;
    if (sc.kind == LossKind::infonce) {
        detail::infonce_grad_raw(ta.z, sc.views.pair, sc.tau, red, &dz, 1);
        return backward(p, sc.views.views, ta, dz);
    }
    if (sc.kind == LossKind::supcon) {
        detail::supcon_grad_raw(ta.z, sc.views.labels, sc.tau, red, &dz, 1);
        return backward(p, sc.views.views, ta, dz);
    }
    const ForwardTrace tu = forward(p, sc.uni.mixtures);
    switch (sc.kind) {
        case LossKind::add:
            detail::add_grad_raw(ta.z, tu.z, sc.views.labels, sc.tau, red, &dz, &du, 1);
            break;
        case LossKind::unicon:
            detail::unicon_grad_raw(ta.z, tu.z, sc.views.labels, sc.tau, red, &dz, &du, 1);
            break;
        case LossKind::un_uni:
            detail::un_uni_grad_raw(ta.z, tu.z, sc.views.pair, sc.tau, red, &dz, &du, 1);
            break;
        default:
            throw config_error("bad loss kind");
    }
    ParamGradients g = backward(p, sc.views.views, ta, dz);
    accumulate(g, backward(p, sc.uni.mixtures, tu, du));
    return g;
}

}  // namespace

GradCheckReport gradcheck_full_path(LossKind kind, const GradCheckSetup& setup,
                                    const FdSettings& fd) {
    if (!(fd.h > 0.0)) throw config_error("finite-difference step must be > 0");
    const Scenario sc = build_scenario(kind, setup);
    EncoderParams params = init_encoder(setup.widths, setup.activation, setup.seed + 3);
    ParamGradients analytic = analytic_grad(params, sc);
    if (setup.corrupt) {
        double& g0 = analytic.d_weights[0].data[0];
        g0 += 0.01 + 0.1 * std::abs(g0);
    }

    GradCheckReport report;
    report.loss = kind;
    report.parameter_count = params.parameter_count();
    report.h = fd.h;
    report.tol = fd.tol;

    double sum_rel = 0.0;
    std::size_t count = 0;
    char name[64];
    auto probe = [&](double* theta, double a_grad, const char* id) {
        const double old = *theta;
        *theta = old + fd.h;
        const double f_plus = eval_loss(params, sc);
        *theta = old - fd.h;
        const double f_minus = eval_loss(params, sc);
        *theta = old;
        const double numeric = (f_plus - f_minus) / (2.0 * fd.h);
        double den = std::abs(a_grad);
        if (std::abs(numeric) > den) den = std::abs(numeric);
        if (den < 1e-12) den = 1e-12;
        const double rel = std::abs(a_grad - numeric) / den;
        if (rel > report.max_rel_err || !std::isfinite(rel)) {
            report.max_rel_err = rel;
            report.worst_param = id;
        }
        sum_rel += rel;
        ++count;
    };
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        Matrix& w = params.weights[l];
        for (std::size_t r = 0; r < w.rows; ++r) {
            for (std::size_t c = 0; c < w.cols; ++c) {
                std::snprintf(name, sizeof name, "W%zu[%zu,%zu]", l, r, c);
                probe(&w.at(r, c), analytic.d_weights[l].at(r, c), name);
            }
        }
        for (std::size_t j = 0; j < params.biases[l].size(); ++j) {
            std::snprintf(name, sizeof name, "b%zu[%zu]", l, j);
            probe(&params.biases[l][j], analytic.d_biases[l][j], name);
        }
    }
    report.mean_rel_err = count ? sum_rel / static_cast<double>(count) : 0.0;
    report.pass = std::isfinite(report.max_rel_err) && report.max_rel_err < fd.tol;
    return report;
}

GradCheckReport finite_difference_check(
    const std::function<double(const Vector&)>& f, const Vector& params,
    const Vector& analytic_grad, const FdSettings& fd) {
    if (!(fd.h > 0.0)) throw config_error("finite-difference step must be > 0");
    if (params.size() != analytic_grad.size()) {
        throw domain_error("analytic gradient size does not match parameters");
    }
    GradCheckReport report;
    report.parameter_count = params.size();
    report.h = fd.h;
    report.tol = fd.tol;
    Vector p = params;
    double sum_rel = 0.0;
    char name[32];
    for (std::size_t j = 0; j < p.size(); ++j) {
        const double old = p[j];
        p[j] = old + fd.h;
        const double f_plus = f(p);
        p[j] = old - fd.h;
        const double f_minus = f(p);
        p[j] = old;
        if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
            ++report.non_finite_evals;
            continue;
        }
        const double numeric = (f_plus - f_minus) / (2.0 * fd.h);
        double den = std::abs(analytic_grad[j]);
        if (std::abs(numeric) > den) den = std::abs(numeric);
        if (den < 1e-12) den = 1e-12;
        const double rel = std::abs(analytic_grad[j] - numeric) / den;
        if (rel > report.max_rel_err) {
            report.max_rel_err = rel;
            std::snprintf(name, sizeof name, "x[%zu]", j);
            report.worst_param = name;
        }
        sum_rel += rel;
    }
    const std::size_t checked = p.size() - report.non_finite_evals;
    report.mean_rel_err = checked ? sum_rel / static_cast<double>(checked) : 0.0;
    report.pass = report.non_finite_evals == 0 && report.max_rel_err < fd.tol;
    return report;
}

GradientDecomposition unicon_anchor_decomposition(const EmbeddingSet& e,
                                                  std::size_t anchor, double tau) {
    if (!(tau > 0.0)) throw config_error("tau must be > 0");
    EmbeddingSet c = e;
    validate_embedding_set(c);
    if (!c.has_universum()) {
        throw domain_error("decomposition needs universum embeddings");
    }
    const std::size_t n = c.count();
    if (anchor >= n) throw domain_error("anchor index out of range");
    const auto d_sets = positive_sets(c.labels);
    if (d_sets[anchor].empty()) {
        throw domain_error("anchor " + std::to_string(anchor) + " has no positive");
    }

    GradientDecomposition out;
    out.class_center.assign(c.dim(), 0.0);
    for (std::size_t d : d_sets[anchor]) {
        simd::axpy(1.0, c.universum.row(d), out.class_center.data(), c.dim());
    }
    simd::scale(1.0 / static_cast<double>(d_sets[anchor].size()),
                out.class_center.data(), c.dim());

    std::vector<double> logits(n);
    for (std::size_t k = 0; k < n; ++k) {
        logits[k] = simd::dot(c.anchors.row(anchor), c.universum.row(k), c.dim()) / tau;
    }
    double m = -HUGE_VAL;
    for (std::size_t k = 0; k < n; ++k) {
        if (k != anchor && logits[k] > m) m = logits[k];
    }
    double den = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        if (k != anchor) den += std::exp(logits[k] - m);
    }
    out.log_partition = m + std::log(den);
    out.partition = std::exp(out.log_partition);
    out.softmax.assign(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        if (k != anchor) out.softmax[k] = std::exp(logits[k] - m) / den;
    }

    out.stop_grad.assign(c.dim(), 0.0);
    simd::axpy(-1.0, out.class_center.data(), out.stop_grad.data(), c.dim());
    for (std::size_t k = 0; k < n; ++k) {
        if (k != anchor) {
            simd::axpy(out.softmax[k], c.universum.row(k), out.stop_grad.data(), c.dim());
        }
    }
    simd::scale(1.0 / tau, out.stop_grad.data(), c.dim());
    return out;
}

Vector unicon_anchor_gradient(const EmbeddingSet& e, std::size_t anchor, double tau) {
    return unicon_anchor_decomposition(e, anchor, tau).stop_grad;
}

MixupPathGradient unicon_input_gradient(const EncoderParams& params,
                                        const AugmentedBatch& batch,
                                        const UniversumBatch& uni, double tau,
                                        std::size_t anchor, int threads) {
    if (!(tau > 0.0)) throw config_error("tau must be > 0");
    const std::size_t n = batch.view_count();
    if (anchor >= n) throw domain_error("anchor index out of range");
    if (uni.mixtures.rows != n || uni.mixtures.cols != batch.dim()) {
        throw domain_error("universum batch does not match views");
    }
    const ForwardTrace ta = forward(params, batch.views, threads);
    const ForwardTrace tu = forward(params, uni.mixtures, threads);

    EmbeddingSet e;
    e.anchors = ta.z;
    e.universum = tu.z;
    e.labels = batch.labels;
    e.pair = batch.pair;
    const GradientDecomposition dec = unicon_anchor_decomposition(e, anchor, tau);
    const auto d_sets = positive_sets(batch.labels);
    const double inv_d = 1.0 / static_cast<double>(d_sets[anchor].size());

    const std::size_t out_dim = ta.z.cols;
    Matrix d_anchor_z(n, out_dim);
    std::memcpy(d_anchor_z.row(anchor), dec.stop_grad.data(),
                out_dim * sizeof(double));
    Matrix d_x_anchor;
    backward(params, batch.views, ta, d_anchor_z, &d_x_anchor, threads);

    Matrix d_uni_z(n, out_dim);
    std::vector<bool> in_d(n, false);
    for (std::size_t d : d_sets[anchor]) in_d[d] = true;
    for (std::size_t k = 0; k < n; ++k) {
        if (k == anchor) continue;
        const double coeff = (dec.softmax[k] - (in_d[k] ? inv_d : 0.0)) / tau;
        simd::axpy(coeff, ta.z.row(anchor), d_uni_z.row(k), out_dim);
    }
    Matrix d_x_uni;
    backward(params, uni.mixtures, tu, d_uni_z, &d_x_uni, threads);

    MixupPathGradient out;
    out.stop.assign(d_x_anchor.row(anchor), d_x_anchor.row(anchor) + batch.dim());
    out.mixup_term.assign(batch.dim(), 0.0);
    simd::axpy(uni.lambda, d_x_uni.row(anchor), out.mixup_term.data(), batch.dim());
    for (std::size_t k : uni.used_by[anchor]) {
        simd::axpy(1.0 - uni.lambda, d_x_uni.row(k), out.mixup_term.data(), batch.dim());
    }
    out.full = out.stop;
    simd::axpy(1.0, out.mixup_term.data(), out.full.data(), batch.dim());
    out.pressure = std::sqrt(simd::dot(out.mixup_term.data(), out.mixup_term.data(),
                                       batch.dim()));
    return out;
}

}  // namespace unicon
