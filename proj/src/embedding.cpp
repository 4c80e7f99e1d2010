#include "unicon/embedding.hpp"

#include <cmath>
#include <string>

#include "unicon/errors.hpp"
#include "unicon/simd.hpp"

namespace unicon {

std::vector<std::vector<std::size_t>> positive_sets(const std::vector<int>& labels) {
    const std::size_t n = labels.size();
    std::vector<std::vector<std::size_t>> sets(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < n; ++k) {
            if (k != i && labels[k] == labels[i]) sets[i].push_back(k);
        }
    }
    return sets;
}

Matrix index_set_means(const Matrix& m, const std::vector<std::vector<std::size_t>>& sets) {
    Matrix out(sets.size(), m.cols);
    for (std::size_t i = 0; i < sets.size(); ++i) {
        if (sets[i].empty()) continue;
        double* row = out.row(i);
        for (std::size_t k : sets[i]) {
            simd::axpy(1.0, m.row(k), row, m.cols);
        }
        simd::scale(1.0 / static_cast<double>(sets[i].size()), row, m.cols);
    }
    return out;
}

void l2_normalize_rows(Matrix& m, double min_norm) {
    for (std::size_t i = 0; i < m.rows; ++i) {
        double* row = m.row(i);
        const double norm = std::sqrt(simd::dot(row, row, m.cols));
        if (!(norm >= min_norm)) {
            throw domain_error("cannot normalize row " + std::to_string(i) +
                               ": norm " + std::to_string(norm));
        }
        simd::scale(1.0 / norm, row, m.cols);
    }
}

void validate_unit_rows(Matrix& m, const char* what, double norm_tol) {
    for (std::size_t i = 0; i < m.rows; ++i) {
        double* row = m.row(i);
        for (std::size_t j = 0; j < m.cols; ++j) {
            if (!std::isfinite(row[j])) {
                throw domain_error(std::string(what) + " row " + std::to_string(i) +
                                   " has a non-finite entry");
            }
        }
        const double norm = std::sqrt(simd::dot(row, row, m.cols));
        if (std::abs(norm - 1.0) > norm_tol) {
            throw domain_error(std::string(what) + " row " + std::to_string(i) +
                               " has norm " + std::to_string(norm) +
                               ", outside the unit tolerance");
        }
        simd::scale(1.0 / norm, row, m.cols);
    }
}

void validate_embedding_set(EmbeddingSet& e, double norm_tol) {
    const std::size_t n = e.count();
    if (n == 0) throw domain_error("embedding set is empty");
    if (e.labels.size() != n) throw domain_error("labels size mismatch");
    if (e.pair.size() != n) throw domain_error("pair map size mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t p = e.pair[i];
        if (p >= n || p == i) {
            throw domain_error("pair map entry " + std::to_string(i) + " invalid");
        }
        if (e.pair[p] != i) {
            throw domain_error("pair map is not an involution at " + std::to_string(i));
        }
        if (e.labels[p] != e.labels[i]) {
            throw domain_error("paired views " + std::to_string(i) + "," +
                               std::to_string(p) + " disagree on label");
        }
    }
    validate_unit_rows(e.anchors, "anchor", norm_tol);
    if (e.has_universum()) {
        if (e.universum.rows != n || e.universum.cols != e.dim()) {
            throw domain_error("universum shape does not match anchors");
        }
        validate_unit_rows(e.universum, "universum", norm_tol);
    }
}

}  // namespace unicon
