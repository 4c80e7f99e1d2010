#pragma once

#include <vector>

#include "unicon/matrix.hpp"

namespace unicon {

// Unit-norm feature rows for one batch: 2n anchor embeddings plus, when a
// universum loss is in play, 2n universum embeddings aligned by row.
// labels/pair describe the anchors; universum rows inherit the anchor index.
struct EmbeddingSet {
    Matrix anchors;
    Matrix universum;  // empty when unused
    std::vector<int> labels;
    std::vector<std::size_t> pair;

    bool has_universum() const { return !universum.empty(); }
    std::size_t count() const { return anchors.rows; }
    std::size_t dim() const { return anchors.cols; }
};

// D_i: indices k != i with the same label as i.
std::vector<std::vector<std::size_t>> positive_sets(const std::vector<int>& labels);

// Row i is the mean of the rows of m indexed by sets[i] (not renormalized).
// Empty sets[i] leaves a zero row.
Matrix index_set_means(const Matrix& m, const std::vector<std::vector<std::size_t>>& sets);

// Scale every row to unit norm in place; rows with norm below min_norm are an
// error.
void l2_normalize_rows(Matrix& m, double min_norm = 1e-12);

// Requires every row finite and within norm_tol of unit norm, then
// renormalizes it.  what names the matrix in error messages.
void validate_unit_rows(Matrix& m, const char* what, double norm_tol = 1e-6);

// Checks shapes, finiteness, the pair involution, label agreement across
// pairs and row norms.  Rows within norm_tol of unit norm are silently
// renormalized; anything further off is an error.
void validate_embedding_set(EmbeddingSet& e, double norm_tol = 1e-6);

}  // namespace unicon
