#include "unicon/losses.hpp"

#include <cmath>
#include <cstring>

#include "unicon/errors.hpp"
#include "unicon/simd.hpp"
#include "unicon/threading.hpp"

namespace unicon {

LossKind loss_kind_from_string(const std::string& name) {
    if (name == "infonce") return LossKind::infonce;
    if (name == "supcon") return LossKind::supcon;
    if (name == "add") return LossKind::add;
    if (name == "unicon") return LossKind::unicon;
    if (name == "un_uni") return LossKind::un_uni;
    if (name == "supmix") return LossKind::supmix;
    throw config_error("unknown loss kind: " + name);
}

std::string loss_kind_to_string(LossKind kind) {
    switch (kind) {
        case LossKind::infonce: return "infonce";
        case LossKind::supcon: return "supcon";
        case LossKind::add: return "add";
        case LossKind::unicon: return "unicon";
        case LossKind::un_uni: return "un_uni";
        case LossKind::supmix: return "supmix";
    }
    throw config_error("bad loss kind value");
}

bool requires_universum(LossKind kind) {
    return kind == LossKind::add || kind == LossKind::unicon ||
           kind == LossKind::un_uni;
}

namespace detail {

namespace {

// max-shifted log(sum(exp(l))) over n >= 1 entries
double log_sum_exp(const double* l, std::size_t n) {
    const double m = simd::max(l, n);
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += std::exp(l[k] - m);
    return m + std::log(s);
}

void require_tau(double tau) {
    if (!(tau > 0.0)) throw config_error("tau must be > 0");
}

std::vector<std::vector<std::size_t>> positives_or_throw(const std::vector<int>& labels) {
    auto sets = positive_sets(labels);
    for (std::size_t i = 0; i < sets.size(); ++i) {
        if (sets[i].empty()) {
            throw domain_error("anchor " + std::to_string(i) + " has no positive");
        }
    }
    return sets;
}

double reduce(double total, std::size_t anchors, Reduction red) {
    return red == Reduction::mean ? total / static_cast<double>(anchors) : total;
}

// softmax of z_i . z_k / tau over k != i; diagonal left at zero
Matrix anchor_softmax(const Matrix& z, double tau, int threads) {
    const std::size_t n = z.rows;
    Matrix p(n, n);
    parallel_for(n, threads, [&](std::size_t lo, std::size_t hi) {
        std::vector<double> l(n);
        for (std::size_t i = lo; i < hi; ++i) {
            for (std::size_t k = 0; k < n; ++k) {
                l[k] = simd::dot(z.row(i), z.row(k), z.cols) / tau;
            }
            double m = -HUGE_VAL;
            for (std::size_t k = 0; k < n; ++k) {
                if (k != i && l[k] > m) m = l[k];
            }
            double den = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                if (k != i) den += std::exp(l[k] - m);
            }
            double* row = p.row(i);
            for (std::size_t k = 0; k < n; ++k) {
                row[k] = k == i ? 0.0 : std::exp(l[k] - m) / den;
            }
        }
    });
    return p;
}

// softmax of z_i . u_k / tau over k != i; diagonal left at zero
Matrix cross_softmax_excl(const Matrix& z, const Matrix& u, double tau, int threads) {
    const std::size_t n = z.rows;
    Matrix p(n, n);
    parallel_for(n, threads, [&](std::size_t lo, std::size_t hi) {
        std::vector<double> l(n);
        for (std::size_t i = lo; i < hi; ++i) {
            for (std::size_t k = 0; k < n; ++k) {
                l[k] = simd::dot(z.row(i), u.row(k), z.cols) / tau;
            }
            double m = -HUGE_VAL;
            for (std::size_t k = 0; k < n; ++k) {
                if (k != i && l[k] > m) m = l[k];
            }
            double den = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                if (k != i) den += std::exp(l[k] - m);
            }
            double* row = p.row(i);
            for (std::size_t k = 0; k < n; ++k) {
                row[k] = k == i ? 0.0 : std::exp(l[k] - m) / den;
            }
        }
    });
    return p;
}

// one denominator spanning anchors (k != i) and all universum rows:
// pa[i][k] and pu[i][k] share it; pa diagonal left at zero
void joint_softmax(const Matrix& z, const Matrix& u, double tau, Matrix* pa,
                   Matrix* pu, int threads) {
    const std::size_t n = z.rows;
    *pa = Matrix(n, n);
    *pu = Matrix(n, n);
    parallel_for(n, threads, [&](std::size_t lo, std::size_t hi) {
        std::vector<double> la(n), lu(n);
        for (std::size_t i = lo; i < hi; ++i) {
            for (std::size_t k = 0; k < n; ++k) {
                la[k] = simd::dot(z.row(i), z.row(k), z.cols) / tau;
                lu[k] = simd::dot(z.row(i), u.row(k), z.cols) / tau;
            }
            double m = simd::max(lu.data(), n);
            for (std::size_t k = 0; k < n; ++k) {
                if (k != i && la[k] > m) m = la[k];
            }
            double den = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                if (k != i) den += std::exp(la[k] - m);
                den += std::exp(lu[k] - m);
            }
            double* ra = pa->row(i);
            double* ru = pu->row(i);
            for (std::size_t k = 0; k < n; ++k) {
                ra[k] = k == i ? 0.0 : std::exp(la[k] - m) / den;
                ru[k] = std::exp(lu[k] - m) / den;
            }
        }
    });
}

double serial_sum(const std::vector<double>& v) {
    double s = 0.0;
    for (double t : v) s += t;
    return s;
}

Matrix reversed_rows(const Matrix& m) {
    Matrix out(m.rows, m.cols);
    for (std::size_t i = 0; i < m.rows; ++i) {
        std::memcpy(out.row(i), m.row(m.rows - 1 - i), m.cols * sizeof(double));
    }
    return out;
}

void check_aligned(const Matrix& z, const Matrix& u) {
    if (u.rows != z.rows || u.cols != z.cols) {
        throw domain_error("universum matrix shape does not match anchors");
    }
}

void check_pair(const Matrix& z, const std::vector<std::size_t>& pair) {
    if (pair.size() != z.rows) throw domain_error("pair map size mismatch");
}

}  // namespace

double infonce_raw(const Matrix& z, const std::vector<std::size_t>& pair,
                   double tau, Reduction, int threads) {
    require_tau(tau);
    check_pair(z, pair);
    const std::size_t n = z.rows;
    if (n < 2) throw domain_error("need at least two views");
    std::vector<double> term(n);
    parallel_for(n, threads, [&](std::size_t lo, std::size_t hi) {
        std::vector<double> l(n - 1);
        for (std::size_t i = lo; i < hi; ++i) {
            std::size_t idx = 0, pos_at = 0;
            for (std::size_t k = 0; k < n; ++k) {
                if (k == i) continue;
                l[idx] = simd::dot(z.row(i), z.row(k), z.cols) / tau;
                if (k == pair[i]) pos_at = idx;
                ++idx;
            }
            term[i] = log_sum_exp(l.data(), n - 1) - l[pos_at];
        }
    });
    // the printed form carries 1/2n, so both reductions coincide
    return serial_sum(term) / static_cast<double>(n);
}

double supcon_raw(const Matrix& z, const std::vector<int>& labels, double tau,
                  Reduction red, int threads) {
    require_tau(tau);
    const std::size_t n = z.rows;
    if (labels.size() != n) throw domain_error("labels size mismatch");
    if (n < 2) throw domain_error("need at least two views");
    const auto d_sets = positives_or_throw(labels);
    std::vector<double> term(n);
    parallel_for(n, threads, [&](std::size_t lo, std::size_t hi) {
        std::vector<double> l(n);
        for (std::size_t i = lo; i < hi; ++i) {
            for (std::size_t k = 0; k < n; ++k) {
                l[k] = simd::dot(z.row(i), z.row(k), z.cols) / tau;
            }
            std::vector<double> excl;
            excl.reserve(n - 1);
            for (std::size_t k = 0; k < n; ++k) {
                if (k != i) excl.push_back(l[k]);
            }
            const double lse = log_sum_exp(excl.data(), excl.size());
            double pos = 0.0;
            for (std::size_t d : d_sets[i]) pos += l[d];
            term[i] = lse - pos / static_cast<double>(d_sets[i].size());
        }
    });
    return reduce(serial_sum(term), n, red);
}

double add_raw(const Matrix& z, const Matrix& u, const std::vector<int>& labels,
               double tau, Reduction red, int threads) {
    require_tau(tau);
    check_aligned(z, u);
    const std::size_t n = z.rows;
    if (labels.size() != n) throw domain_error("labels size mismatch");
    if (n < 2) throw domain_error("need at least two views");
    const auto d_sets = positives_or_throw(labels);
    std::vector<double> term(n);
    parallel_for(n, threads, [&](std::size_t lo, std::size_t hi) {
        std::vector<double> l(n), joint(2 * n - 1);
        for (std::size_t i = lo; i < hi; ++i) {
            std::size_t idx = 0;
            for (std::size_t k = 0; k < n; ++k) {
                l[k] = simd::dot(z.row(i), z.row(k), z.cols) / tau;
                if (k != i) joint[idx++] = l[k];
            }
            for (std::size_t k = 0; k < n; ++k) {
                joint[idx++] = simd::dot(z.row(i), u.row(k), z.cols) / tau;
            }
            const double lse = log_sum_exp(joint.data(), 2 * n - 1);
            double pos = 0.0;
            for (std::size_t d : d_sets[i]) pos += l[d];
            term[i] = lse - pos / static_cast<double>(d_sets[i].size());
        }
    });
    return reduce(serial_sum(term), n, red);
}

double unicon_raw(const Matrix& z, const Matrix& u, const std::vector<int>& labels,
                  double tau, Reduction red, int threads) {
    require_tau(tau);
    check_aligned(z, u);
    const std::size_t n = z.rows;
    if (labels.size() != n) throw domain_error("labels size mismatch");
    if (n < 2) throw domain_error("need at least two views");
    const auto d_sets = positives_or_throw(labels);
    const Matrix centers = index_set_means(u, d_sets);
    std::vector<double> term(n);
    parallel_for(n, threads, [&](std::size_t lo, std::size_t hi) {
        std::vector<double> l(n - 1);
        for (std::size_t i = lo; i < hi; ++i) {
            std::size_t idx = 0;
            for (std::size_t k = 0; k < n; ++k) {
                if (k == i) continue;
                l[idx++] = simd::dot(z.row(i), u.row(k), z.cols) / tau;
            }
            const double lse = log_sum_exp(l.data(), n - 1);
            const double sm = simd::dot(z.row(i), centers.row(i), z.cols) / tau;
            term[i] = lse - sm;
        }
    });
    return reduce(serial_sum(term), n, red);
}

double un_uni_raw(const Matrix& z, const Matrix& u,
                  const std::vector<std::size_t>& pair, double tau, Reduction red,
                  int threads) {
    require_tau(tau);
    check_aligned(z, u);
    check_pair(z, pair);
    const std::size_t n = z.rows;
    if (n < 2) throw domain_error("need at least two views");
    std::vector<double> term(n);
    parallel_for(n, threads, [&](std::size_t lo, std::size_t hi) {
        std::vector<double> l(n - 1);
        for (std::size_t i = lo; i < hi; ++i) {
            std::size_t idx = 0;
            for (std::size_t k = 0; k < n; ++k) {
                if (k == i) continue;
                l[idx++] = simd::dot(z.row(i), u.row(k), z.cols) / tau;
            }
            const double lse = log_sum_exp(l.data(), n - 1);
            const double sc = (simd::dot(z.row(i), u.row(i), z.cols) +
                               simd::dot(z.row(i), u.row(pair[i]), z.cols)) /
                              (2.0 * tau);
            term[i] = lse - sc;
        }
    });
    const double uni = red == Reduction::mean
                           ? serial_sum(term) / static_cast<double>(n)
                           : serial_sum(term);
    return infonce_raw(z, pair, tau, red, threads) + uni;
}

namespace {

// shared kernel of the mixture-sequence objective for one branch: anchors zm,
// references zt, one denominator over zm (k != i) and all of zt
double supmix_branch_value(const Matrix& zm, const Matrix& zt,
                           const std::vector<int>& labels,
                           const std::vector<std::vector<std::size_t>>& d_sets,
                           double tau, int threads) {
    const std::size_t n = zm.rows;
    std::vector<double> term(n);
    parallel_for(n, threads, [&](std::size_t lo, std::size_t hi) {
        std::vector<double> lm(n), lt(n), joint(2 * n - 1);
        for (std::size_t i = lo; i < hi; ++i) {
            std::size_t idx = 0;
            for (std::size_t k = 0; k < n; ++k) {
                lm[k] = simd::dot(zm.row(i), zm.row(k), zm.cols) / tau;
                lt[k] = simd::dot(zm.row(i), zt.row(k), zm.cols) / tau;
                if (k != i) joint[idx++] = lm[k];
            }
            for (std::size_t k = 0; k < n; ++k) joint[idx++] = lt[k];
            const double lse = log_sum_exp(joint.data(), 2 * n - 1);
            double pos = lt[i];
            for (std::size_t d : d_sets[i]) pos += lm[d] + lt[d];
            const double w = 1.0 / (2.0 * static_cast<double>(d_sets[i].size()) + 1.0);
            term[i] = lse - w * pos;
        }
    });
    (void)labels;
    return serial_sum(term);
}

}  // namespace

double supmix_raw(const Matrix& z_mix, const Matrix& z_second,
                  const std::vector<int>& labels, double lambda, double tau,
                  Reduction red, int threads) {
    require_tau(tau);
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw config_error("supmix lambda must lie in [0, 1]");
    }
    check_aligned(z_mix, z_second);
    const std::size_t n = z_mix.rows;
    if (labels.size() != n) throw domain_error("labels size mismatch");
    if (n < 1) throw domain_error("empty batch");
    const auto d_sets = positive_sets(labels);
    const Matrix z_up = reversed_rows(z_mix);
    double down = supmix_branch_value(z_mix, z_second, labels, d_sets, tau, threads);
    double up = supmix_branch_value(z_up, z_second, labels, d_sets, tau, threads);
    if (red == Reduction::mean) {
        down /= static_cast<double>(n);
        up /= static_cast<double>(n);
    }
    return lambda * down + (1.0 - lambda) * up;
}

void infonce_grad_raw(const Matrix& z, const std::vector<std::size_t>& pair,
                      double tau, Reduction, Matrix* dz, int threads) {
    require_tau(tau);
    check_pair(z, pair);
    const std::size_t n = z.rows;
    if (n < 2) throw domain_error("need at least two views");
    const Matrix p = anchor_softmax(z, tau, threads);
    *dz = Matrix(n, z.cols);
    const double c = 1.0 / (static_cast<double>(n) * tau);
    parallel_for(n, threads, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t a = lo; a < hi; ++a) {
            double* g = dz->row(a);
            simd::axpy(-2.0, z.row(pair[a]), g, z.cols);
            for (std::size_t k = 0; k < n; ++k) {
                if (k == a) continue;
                simd::axpy(p.at(a, k) + p.at(k, a), z.row(k), g, z.cols);
            }
            simd::scale(c, g, z.cols);
        }
    });
}

void supcon_grad_raw(const Matrix& z, const std::vector<int>& labels, double tau,
                     Reduction red, Matrix* dz, int threads) {
    require_tau(tau);
    const std::size_t n = z.rows;
    if (labels.size() != n) throw domain_error("labels size mismatch");
    if (n < 2) throw domain_error("need at least two views");
    const auto d_sets = positives_or_throw(labels);
    std::vector<double> inv_d(n);
    for (std::size_t i = 0; i < n; ++i) {
        inv_d[i] = 1.0 / static_cast<double>(d_sets[i].size());
    }
    const Matrix p = anchor_softmax(z, tau, threads);
    *dz = Matrix(n, z.cols);
    const double c =
        (red == Reduction::mean ? 1.0 / static_cast<double>(n) : 1.0) / tau;
    parallel_for(n, threads, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t a = lo; a < hi; ++a) {
            double* g = dz->row(a);
            for (std::size_t d : d_sets[a]) {
                simd::axpy(-(inv_d[a] + inv_d[d]), z.row(d), g, z.cols);
            }
            for (std::size_t k = 0; k < n; ++k) {
                if (k == a) continue;
                simd::axpy(p.at(a, k) + p.at(k, a), z.row(k), g, z.cols);
            }
            simd::scale(c, g, z.cols);
        }
    });
}

void add_grad_raw(const Matrix& z, const Matrix& u, const std::vector<int>& labels,
                  double tau, Reduction red, Matrix* dz, Matrix* du, int threads) {
    require_tau(tau);
    check_aligned(z, u);
    const std::size_t n = z.rows;
    if (labels.size() != n) throw domain_error("labels size mismatch");
    if (n < 2) throw domain_error("need at least two views");
    const auto d_sets = positives_or_throw(labels);
    std::vector<double> inv_d(n);
    for (std::size_t i = 0; i < n; ++i) {
        inv_d[i] = 1.0 / static_cast<double>(d_sets[i].size());
    }
    Matrix pa, pu;
    joint_softmax(z, u, tau, &pa, &pu, threads);
    *dz = Matrix(n, z.cols);
    *du = Matrix(n, z.cols);
    const double c =
        (red == Reduction::mean ? 1.0 / static_cast<double>(n) : 1.0) / tau;
    parallel_for(n, threads, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t a = lo; a < hi; ++a) {
            double* g = dz->row(a);
            for (std::size_t d : d_sets[a]) {
                simd::axpy(-(inv_d[a] + inv_d[d]), z.row(d), g, z.cols);
            }
            for (std::size_t k = 0; k < n; ++k) {
                if (k != a) simd::axpy(pa.at(a, k) + pa.at(k, a), z.row(k), g, z.cols);
                simd::axpy(pu.at(a, k), u.row(k), g, z.cols);
            }
            simd::scale(c, g, z.cols);
        }
    });
    parallel_for(n, threads, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t b = lo; b < hi; ++b) {
            double* g = du->row(b);
            for (std::size_t i = 0; i < n; ++i) {
                simd::axpy(pu.at(i, b), z.row(i), g, z.cols);
            }
            simd::scale(c, g, z.cols);
        }
    });
}

void unicon_grad_raw(const Matrix& z, const Matrix& u,
                     const std::vector<int>& labels, double tau, Reduction red,
                     Matrix* dz, Matrix* du, int threads) {
    require_tau(tau);
    check_aligned(z, u);
    const std::size_t n = z.rows;
    if (labels.size() != n) throw domain_error("labels size mismatch");
    if (n < 2) throw domain_error("need at least two views");
    const auto d_sets = positives_or_throw(labels);
    std::vector<double> inv_d(n);
    for (std::size_t i = 0; i < n; ++i) {
        inv_d[i] = 1.0 / static_cast<double>(d_sets[i].size());
    }
    const Matrix centers = index_set_means(u, d_sets);
    const Matrix pu = cross_softmax_excl(z, u, tau, threads);
    *dz = Matrix(n, z.cols);
    *du = Matrix(n, z.cols);
    const double c =
        (red == Reduction::mean ? 1.0 / static_cast<double>(n) : 1.0) / tau;
    parallel_for(n, threads, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t a = lo; a < hi; ++a) {
            double* g = dz->row(a);
            simd::axpy(-1.0, centers.row(a), g, z.cols);
            for (std::size_t k = 0; k < n; ++k) {
                if (k != a) simd::axpy(pu.at(a, k), u.row(k), g, z.cols);
            }
            simd::scale(c, g, z.cols);
        }
    });
    parallel_for(n, threads, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t b = lo; b < hi; ++b) {
            double* g = du->row(b);
            for (std::size_t i : d_sets[b]) {
                simd::axpy(-inv_d[i], z.row(i), g, z.cols);
            }
            for (std::size_t i = 0; i < n; ++i) {
                if (i != b) simd::axpy(pu.at(i, b), z.row(i), g, z.cols);
            }
            simd::scale(c, g, z.cols);
        }
    });
}

void un_uni_grad_raw(const Matrix& z, const Matrix& u,
                     const std::vector<std::size_t>& pair, double tau,
                     Reduction red, Matrix* dz, Matrix* du, int threads) {
    require_tau(tau);
    check_aligned(z, u);
    check_pair(z, pair);
    const std::size_t n = z.rows;
    if (n < 2) throw domain_error("need at least two views");
    infonce_grad_raw(z, pair, tau, red, dz, threads);
    const Matrix pu = cross_softmax_excl(z, u, tau, threads);
    *du = Matrix(n, z.cols);
    const double c =
        (red == Reduction::mean ? 1.0 / static_cast<double>(n) : 1.0) / tau;
    parallel_for(n, threads, [&](std::size_t lo, std::size_t hi) {
        std::vector<double> g(z.cols);
        for (std::size_t a = lo; a < hi; ++a) {
            std::fill(g.begin(), g.end(), 0.0);
            simd::axpy(-0.5, u.row(a), g.data(), z.cols);
            simd::axpy(-0.5, u.row(pair[a]), g.data(), z.cols);
            for (std::size_t k = 0; k < n; ++k) {
                if (k != a) simd::axpy(pu.at(a, k), u.row(k), g.data(), z.cols);
            }
            simd::axpy(c, g.data(), dz->row(a), z.cols);
        }
    });
    parallel_for(n, threads, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t b = lo; b < hi; ++b) {
            double* g = du->row(b);
            simd::axpy(-0.5, z.row(b), g, z.cols);
            simd::axpy(-0.5, z.row(pair[b]), g, z.cols);
            for (std::size_t i = 0; i < n; ++i) {
                if (i != b) simd::axpy(pu.at(i, b), z.row(i), g, z.cols);
            }
            simd::scale(c, g, z.cols);
        }
    });
}

namespace {

// gradients of one branch value with respect to its anchors and references
void supmix_branch_grad(const Matrix& zm, const Matrix& zt,
                        const std::vector<std::vector<std::size_t>>& d_sets,
                        const std::vector<double>& w, double tau, Matrix* dzm,
                        Matrix* dzt, int threads) {
    const std::size_t n = zm.rows;
    Matrix a_mat(n, n), b_mat(n, n);
    parallel_for(n, threads, [&](std::size_t lo, std::size_t hi) {
        std::vector<double> lm(n), lt(n);
        for (std::size_t i = lo; i < hi; ++i) {
            for (std::size_t k = 0; k < n; ++k) {
                lm[k] = simd::dot(zm.row(i), zm.row(k), zm.cols) / tau;
                lt[k] = simd::dot(zm.row(i), zt.row(k), zm.cols) / tau;
            }
            double m = simd::max(lt.data(), n);
            for (std::size_t k = 0; k < n; ++k) {
                if (k != i && lm[k] > m) m = lm[k];
            }
            double den = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                if (k != i) den += std::exp(lm[k] - m);
                den += std::exp(lt[k] - m);
            }
            for (std::size_t k = 0; k < n; ++k) {
                a_mat.at(i, k) = k == i ? 0.0 : std::exp(lm[k] - m) / den;
                b_mat.at(i, k) = std::exp(lt[k] - m) / den;
            }
        }
    });
    *dzm = Matrix(n, zm.cols);
    *dzt = Matrix(n, zm.cols);
    const double c = 1.0 / tau;
    parallel_for(n, threads, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t a = lo; a < hi; ++a) {
            double* g = dzm->row(a);
            for (std::size_t d : d_sets[a]) {
                simd::axpy(-(w[a] + w[d]), zm.row(d), g, zm.cols);
                simd::axpy(-w[a], zt.row(d), g, zm.cols);
            }
            simd::axpy(-w[a], zt.row(a), g, zm.cols);
            for (std::size_t k = 0; k < n; ++k) {
                if (k != a) simd::axpy(a_mat.at(a, k) + a_mat.at(k, a), zm.row(k), g, zm.cols);
                simd::axpy(b_mat.at(a, k), zt.row(k), g, zm.cols);
            }
            simd::scale(c, g, zm.cols);
        }
    });
    parallel_for(n, threads, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t b = lo; b < hi; ++b) {
            double* g = dzt->row(b);
            for (std::size_t i : d_sets[b]) {
                simd::axpy(-w[i], zm.row(i), g, zm.cols);
            }
            simd::axpy(-w[b], zm.row(b), g, zm.cols);
            for (std::size_t i = 0; i < n; ++i) {
                simd::axpy(b_mat.at(i, b), zm.row(i), g, zm.cols);
            }
            simd::scale(c, g, zm.cols);
        }
    });
}

}  // namespace

void supmix_grad_raw(const Matrix& z_mix, const Matrix& z_second,
                     const std::vector<int>& labels, double lambda, double tau,
                     Reduction red, Matrix* d_mix, Matrix* d_second, int threads) {
    require_tau(tau);
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw config_error("supmix lambda must lie in [0, 1]");
    }
    check_aligned(z_mix, z_second);
    const std::size_t n = z_mix.rows;
    if (labels.size() != n) throw domain_error("labels size mismatch");
    const auto d_sets = positive_sets(labels);
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = 1.0 / (2.0 * static_cast<double>(d_sets[i].size()) + 1.0);
    }
    const Matrix z_up = reversed_rows(z_mix);
    Matrix g_down_m, g_down_t, g_up_m, g_up_t;
    supmix_branch_grad(z_mix, z_second, d_sets, w, tau, &g_down_m, &g_down_t, threads);
    supmix_branch_grad(z_up, z_second, d_sets, w, tau, &g_up_m, &g_up_t, threads);
    const double s = red == Reduction::mean ? 1.0 / static_cast<double>(n) : 1.0;
    *d_mix = Matrix(n, z_mix.cols);
    *d_second = Matrix(n, z_mix.cols);
    for (std::size_t j = 0; j < n; ++j) {
        simd::axpy(s * lambda, g_down_m.row(j), d_mix->row(j), z_mix.cols);
        simd::axpy(s * (1.0 - lambda), g_up_m.row(n - 1 - j), d_mix->row(j), z_mix.cols);
        simd::axpy(s * lambda, g_down_t.row(j), d_second->row(j), z_mix.cols);
        simd::axpy(s * (1.0 - lambda), g_up_t.row(j), d_second->row(j), z_mix.cols);
    }
}

}  // namespace detail

namespace {

EmbeddingSet checked_copy(const EmbeddingSet& e, LossKind kind) {
    EmbeddingSet c = e;
    validate_embedding_set(c);
    if (requires_universum(kind) && !c.has_universum()) {
        throw domain_error(loss_kind_to_string(kind) +
                           " needs universum embeddings");
    }
    return c;
}

}  // namespace

double loss_value(LossKind kind, const EmbeddingSet& e, const LossConfig& cfg) {
    if (kind == LossKind::supmix) {
        throw config_error("supmix takes branch embeddings; use supmix_loss");
    }
    EmbeddingSet c = checked_copy(e, kind);
    switch (kind) {
        case LossKind::infonce:
            return detail::infonce_raw(c.anchors, c.pair, cfg.tau, cfg.reduction,
                                       cfg.threads);
        case LossKind::supcon:
            return detail::supcon_raw(c.anchors, c.labels, cfg.tau, cfg.reduction,
                                      cfg.threads);
        case LossKind::add:
            return detail::add_raw(c.anchors, c.universum, c.labels, cfg.tau,
                                   cfg.reduction, cfg.threads);
        case LossKind::unicon:
            return detail::unicon_raw(c.anchors, c.universum, c.labels, cfg.tau,
                                      cfg.reduction, cfg.threads);
        case LossKind::un_uni:
            return detail::un_uni_raw(c.anchors, c.universum, c.pair, cfg.tau,
                                      cfg.reduction, cfg.threads);
        default:
            throw config_error("bad loss kind");
    }
}

EmbeddingGradients embedding_gradient(LossKind kind, const EmbeddingSet& e,
                                      const LossConfig& cfg) {
    if (kind == LossKind::supmix) {
        throw config_error("supmix takes branch embeddings; use supmix_gradient");
    }
    EmbeddingSet c = checked_copy(e, kind);
    EmbeddingGradients g;
    switch (kind) {
        case LossKind::infonce:
            detail::infonce_grad_raw(c.anchors, c.pair, cfg.tau, cfg.reduction,
                                     &g.d_anchors, cfg.threads);
            break;
        case LossKind::supcon:
            detail::supcon_grad_raw(c.anchors, c.labels, cfg.tau, cfg.reduction,
                                    &g.d_anchors, cfg.threads);
            break;
        case LossKind::add:
            detail::add_grad_raw(c.anchors, c.universum, c.labels, cfg.tau,
                                 cfg.reduction, &g.d_anchors, &g.d_universum,
                                 cfg.threads);
            break;
        case LossKind::unicon:
            detail::unicon_grad_raw(c.anchors, c.universum, c.labels, cfg.tau,
                                    cfg.reduction, &g.d_anchors, &g.d_universum,
                                    cfg.threads);
            break;
        case LossKind::un_uni:
            detail::un_uni_grad_raw(c.anchors, c.universum, c.pair, cfg.tau,
                                    cfg.reduction, &g.d_anchors, &g.d_universum,
                                    cfg.threads);
            break;
        default:
            throw config_error("bad loss kind");
    }
    return g;
}

namespace {

SupMixEmbeddings checked_supmix(const SupMixEmbeddings& e) {
    SupMixEmbeddings c = e;
    if (c.z_mix.rows == 0) throw domain_error("empty supmix batch");
    if (c.labels.size() != c.z_mix.rows) throw domain_error("labels size mismatch");
    validate_unit_rows(c.z_mix, "mix");
    validate_unit_rows(c.z_second, "second view");
    return c;
}

}  // namespace

double supmix_loss(const SupMixEmbeddings& e, const LossConfig& cfg) {
    SupMixEmbeddings c = checked_supmix(e);
    return detail::supmix_raw(c.z_mix, c.z_second, c.labels, c.lambda, cfg.tau,
                              cfg.reduction, cfg.threads);
}

SupMixGradients supmix_gradient(const SupMixEmbeddings& e, const LossConfig& cfg) {
    SupMixEmbeddings c = checked_supmix(e);
    SupMixGradients g;
    detail::supmix_grad_raw(c.z_mix, c.z_second, c.labels, c.lambda, cfg.tau,
                            cfg.reduction, &g.d_mix, &g.d_second, cfg.threads);
    return g;
}

}  // namespace unicon
