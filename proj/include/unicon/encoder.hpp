#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "unicon/matrix.hpp"

namespace unicon {

enum class Activation { relu, tanh_act };

Activation activation_from_string(const std::string& name);
std::string activation_to_string(Activation a);

// Fully connected encoder.  widths = [d_in, h_1, ..., h_k, d_out]; every
// layer is affine, every layer except the last is followed by the
// activation, and the last layer's output is L2-normalized.  The
// penultimate representation (probe input) is the activation output of the
// last hidden layer, or the raw input when there is no hidden layer.
struct EncoderParams {
    std::vector<Matrix> weights;  // weights[l]: widths[l+1] x widths[l]
    std::vector<Vector> biases;   // biases[l]: widths[l+1]
    Activation activation = Activation::relu;

    std::size_t layer_count() const { return weights.size(); }
    std::vector<std::size_t> widths() const;
    std::size_t parameter_count() const;
};

// Uniform(-a, a) weights with a = sqrt(6 / (fan_in + fan_out)), zero biases.
EncoderParams init_encoder(const std::vector<std::size_t>& widths,
                           Activation activation, std::uint64_t seed);

struct ForwardTrace {
    std::vector<Matrix> hidden;  // post-activation output of each hidden layer
    Matrix prenorm;              // last affine output, before normalization
    Vector prenorm_norm;         // row norms of prenorm
    Matrix z;                    // unit-norm embeddings

    // Input to the linear probe; inputs must outlive the trace when there are
    // no hidden layers.
    const Matrix& representation(const Matrix& inputs) const {
        return hidden.empty() ? inputs : hidden.back();
    }
};

ForwardTrace forward(const EncoderParams& p, const Matrix& inputs, int threads = 1);

struct ParamGradients {
    std::vector<Matrix> d_weights;
    std::vector<Vector> d_biases;
};

ParamGradients zero_gradients(const EncoderParams& p);
void accumulate(ParamGradients& into, const ParamGradients& g);

// Backpropagates d_z (gradient with respect to the unit embeddings) through
// the normalization, the layers and the activations.  d_inputs, when
// non-null, receives the gradient with respect to the input rows.
ParamGradients backward(const EncoderParams& p, const Matrix& inputs,
                        const ForwardTrace& trace, const Matrix& d_z,
                        Matrix* d_inputs = nullptr, int threads = 1);

struct CheckpointMeta {
    std::uint64_t seed = 0;
    int epoch = 0;
};

// Single-line JSON header followed by the raw little-endian float64 payload:
// all weight matrices row-major in layer order, then all bias vectors.
void save_checkpoint(const EncoderParams& p, const CheckpointMeta& meta,
                     const std::string& path);
EncoderParams load_checkpoint(const std::string& path,
                              CheckpointMeta* meta = nullptr);

}  // namespace unicon
