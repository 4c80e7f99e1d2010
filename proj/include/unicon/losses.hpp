#pragma once

#include <string>
#include <vector>

#include "unicon/embedding.hpp"
#include "unicon/matrix.hpp"

namespace unicon {

// The six batch objectives.  All compare anchor embeddings against either
// other anchors, universum mixtures, or both, through temperature-scaled
// inner products.
//   infonce  pair positive vs anchor negatives
//   supcon   class positives vs anchor negatives
//   add      class positives vs anchor + universum negatives
//   unicon   universum class-center positive vs universum negatives
//   un_uni   infonce plus a pair-averaged universum positive term
//   supmix   mixture-sequence objective over two reversal branches
enum class LossKind { infonce, supcon, add, unicon, un_uni, supmix };

LossKind loss_kind_from_string(const std::string& name);
std::string loss_kind_to_string(LossKind kind);

// Whether the loss consumes universum embeddings aligned with the anchors.
bool requires_universum(LossKind kind);

enum class Reduction {
    verbatim,  // the printed form: per-anchor sums, except infonce's 1/2n
    mean,      // per-anchor average, comparable across batch sizes
};

struct LossConfig {
    double tau = 0.1;
    Reduction reduction = Reduction::verbatim;
    int threads = 1;
};

struct EmbeddingGradients {
    Matrix d_anchors;
    Matrix d_universum;  // empty when the loss has no universum term
};

// Inputs of the mixture-sequence loss: embeddings of the down-mix rows and
// of the second views, one per sample, plus the lambda that weighted the
// mixing.  The up branch is the row reversal of z_mix and is derived
// internally.
struct SupMixEmbeddings {
    Matrix z_mix;
    Matrix z_second;
    std::vector<int> labels;
    double lambda = 0.5;
};

// Validating entry points.  Embeddings are checked (unit rows within 1e-6,
// then renormalized) before any math runs; gradients are taken with respect
// to the renormalized rows.  supmix has its own shape and is rejected here.
double loss_value(LossKind kind, const EmbeddingSet& e, const LossConfig& cfg);
EmbeddingGradients embedding_gradient(LossKind kind, const EmbeddingSet& e,
                                      const LossConfig& cfg);

double supmix_loss(const SupMixEmbeddings& e, const LossConfig& cfg);

struct SupMixGradients {
    Matrix d_mix;
    Matrix d_second;
};
SupMixGradients supmix_gradient(const SupMixEmbeddings& e, const LossConfig& cfg);

namespace detail {

// Raw kernels: no validation, no renormalization.  Rows are treated as free
// vectors, which is what the finite-difference certification perturbs.
// All reductions sum per-anchor terms in index order, so values are
// identical for any thread count.

double infonce_raw(const Matrix& z, const std::vector<std::size_t>& pair,
                   double tau, Reduction red, int threads);
double supcon_raw(const Matrix& z, const std::vector<int>& labels, double tau,
                  Reduction red, int threads);
double add_raw(const Matrix& z, const Matrix& u, const std::vector<int>& labels,
               double tau, Reduction red, int threads);
double unicon_raw(const Matrix& z, const Matrix& u, const std::vector<int>& labels,
                  double tau, Reduction red, int threads);
double un_uni_raw(const Matrix& z, const Matrix& u,
                  const std::vector<std::size_t>& pair, double tau, Reduction red,
                  int threads);
double supmix_raw(const Matrix& z_mix, const Matrix& z_second,
                  const std::vector<int>& labels, double lambda, double tau,
                  Reduction red, int threads);

void infonce_grad_raw(const Matrix& z, const std::vector<std::size_t>& pair,
                      double tau, Reduction red, Matrix* dz, int threads);
void supcon_grad_raw(const Matrix& z, const std::vector<int>& labels, double tau,
                     Reduction red, Matrix* dz, int threads);
void add_grad_raw(const Matrix& z, const Matrix& u, const std::vector<int>& labels,
                  double tau, Reduction red, Matrix* dz, Matrix* du, int threads);
void unicon_grad_raw(const Matrix& z, const Matrix& u,
                     const std::vector<int>& labels, double tau, Reduction red,
                     Matrix* dz, Matrix* du, int threads);
void un_uni_grad_raw(const Matrix& z, const Matrix& u,
                     const std::vector<std::size_t>& pair, double tau,
                     Reduction red, Matrix* dz, Matrix* du, int threads);
void supmix_grad_raw(const Matrix& z_mix, const Matrix& z_second,
                     const std::vector<int>& labels, double lambda, double tau,
                     Reduction red, Matrix* d_mix, Matrix* d_second, int threads);

}  // namespace detail

}  // namespace unicon
