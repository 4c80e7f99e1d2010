#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "unicon/dataio.hpp"
#include "unicon/embedding.hpp"
#include "unicon/encoder.hpp"
#include "unicon/losses.hpp"
#include "unicon/universum.hpp"

namespace unicon {

struct FdSettings {
    double h = 1e-5;    // central-difference step
    double tol = 1e-5;  // max relative error allowed
};

struct GradCheckReport {
    LossKind loss = LossKind::infonce;
    std::size_t parameter_count = 0;
    double max_rel_err = 0.0;
    double mean_rel_err = 0.0;
    double h = 0.0;
    double tol = 0.0;
    bool pass = false;
    std::size_t non_finite_evals = 0;
    std::string worst_param;
};

// Generic central-difference certification of an analytic gradient:
// numeric_j = (f(p + h e_j) - f(p - h e_j)) / (2h), relative error
// |a - n| / max(|a|, |n|, 1e-12).  Non-finite f evaluations are counted and
// fail the check.
GradCheckReport finite_difference_check(
    const std::function<double(const Vector&)>& f, const Vector& params,
    const Vector& analytic_grad, const FdSettings& fd);

// Scenario for the full-path certification: synthetic two-view batch through
// mixing, the encoder and the loss, differentiated with respect to every
// weight and bias.
struct GradCheckSetup {
    std::size_t samples = 4;  // batch size in samples; the batch has 2x views
    int classes = 2;
    std::size_t input_dim = 6;
    std::vector<std::size_t> widths = {6, 8, 5};  // widths[0] must equal input_dim
    Activation activation = Activation::tanh_act;
    double tau = 0.1;
    double lambda = 0.5;
    double augment_noise = 0.1;
    std::uint64_t seed = 1;
    bool corrupt = false;  // sabotage one gradient entry; the check must then fail
};

// Compares the backpropagated parameter gradient of the full loss against
// central finite differences, parameter by parameter.  Relative errors use
// denominator max(|analytic|, |numeric|, 1e-12).
GradCheckReport gradcheck_full_path(LossKind kind, const GradCheckSetup& setup,
                                    const FdSettings& fd);

// Per-anchor pieces of the universum class-center objective: the center m_i,
// the softmax weights over universum negatives, the partition
// Z = sum_{k != i} exp(z_i . u_k / tau), and the embedding-space gradient
// with the universum branch held fixed,
//   (1/tau) * (-m_i + sum_k u_k * p_k).
// The mixup feedback term is not an embedding-space object for a vector
// encoder; it is computed separately in input space by
// unicon_input_gradient.
struct GradientDecomposition {
    Vector class_center;
    Vector softmax;  // entry at the anchor's own index is zero
    double partition = 0.0;
    double log_partition = 0.0;
    Vector stop_grad;
};

GradientDecomposition unicon_anchor_decomposition(const EmbeddingSet& e,
                                                  std::size_t anchor, double tau);

// Embedding-space gradient of the anchor's term with the universum branch
// treated as constant (the only well-defined variant at this level).
Vector unicon_anchor_gradient(const EmbeddingSet& e, std::size_t anchor, double tau);

// Input-space gradient of one anchor's universum class-center term, split by
// path.  stop treats every mixture as a constant; mixup_term is what flows
// back through the mixtures that reused this view, i.e. through
// u_k = lambda x_k + (1 - lambda) x_q(k) for q(k) = anchor; full is their
// sum.  pressure = ||mixup_term||.
struct MixupPathGradient {
    Vector full;
    Vector stop;
    Vector mixup_term;
    double pressure = 0.0;
};

MixupPathGradient unicon_input_gradient(const EncoderParams& params,
                                        const AugmentedBatch& batch,
                                        const UniversumBatch& uni, double tau,
                                        std::size_t anchor, int threads = 1);

}  // namespace unicon
