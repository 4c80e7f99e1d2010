#include "unicon/encoder.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "unicon/errors.hpp"
#include "unicon/rng.hpp"
#include "unicon/simd.hpp"
#include "unicon/threading.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload assumes a little-endian host");

namespace unicon {

Activation activation_from_string(const std::string& name) {
    if (name == "relu") return Activation::relu;
    if (name == "tanh") return Activation::tanh_act;
    throw config_error("unknown activation: " + name);
}

std::string activation_to_string(Activation a) {
    return a == Activation::relu ? "relu" : "tanh";
}

std::vector<std::size_t> EncoderParams::widths() const {
    std::vector<std::size_t> w;
    if (weights.empty()) return w;
    w.push_back(weights[0].cols);
    for (const Matrix& m : weights) w.push_back(m.rows);
    return w;
}

std::size_t EncoderParams::parameter_count() const {
    std::size_t n = 0;
    for (const Matrix& m : weights) n += m.data.size();
    for (const Vector& b : biases) n += b.size();
    return n;
}

EncoderParams init_encoder(const std::vector<std::size_t>& widths,
                           Activation activation, std::uint64_t seed) {
    if (widths.size() < 2) throw config_error("encoder needs at least two widths");
    for (std::size_t w : widths) {
        if (w == 0) throw config_error("encoder widths must be positive");
    }
    EncoderParams p;
    p.activation = activation;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const std::size_t fan_in = widths[l];
        const std::size_t fan_out = widths[l + 1];
        const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Matrix w(fan_out, fan_in);
        Rng rng(seed, l + 1);
        for (double& v : w.data) v = rng.uniform(-a, a);
        p.weights.push_back(std::move(w));
        p.biases.emplace_back(fan_out, 0.0);
    }
    return p;
}

namespace {

inline double act_apply(Activation a, double x) {
    return a == Activation::relu ? (x > 0.0 ? x : 0.0) : std::tanh(x);
}

// derivative written in terms of the post-activation value
inline double act_deriv(Activation a, double h) {
    return a == Activation::relu ? (h > 0.0 ? 1.0 : 0.0) : 1.0 - h * h;
}

}  // namespace

ForwardTrace forward(const EncoderParams& p, const Matrix& inputs, int threads) {
    const std::size_t layers = p.layer_count();
    if (layers == 0) throw domain_error("encoder has no layers");
    if (inputs.cols != p.weights[0].cols) {
        throw domain_error("input dim " + std::to_string(inputs.cols) +
                           " does not match encoder input width " +
                           std::to_string(p.weights[0].cols));
    }
    const std::size_t n = inputs.rows;
    ForwardTrace t;
    t.hidden.reserve(layers - 1);
    for (std::size_t l = 0; l + 1 < layers; ++l) {
        t.hidden.emplace_back(n, p.weights[l].rows);
    }
    const std::size_t out_dim = p.weights[layers - 1].rows;
    t.prenorm = Matrix(n, out_dim);
    t.prenorm_norm.resize(n);
    t.z = Matrix(n, out_dim);

    parallel_for(n, threads, [&](std::size_t lo, std::size_t hi) {
        Vector cur, next;
        for (std::size_t r = lo; r < hi; ++r) {
            cur.assign(inputs.row(r), inputs.row(r) + inputs.cols);
            for (std::size_t l = 0; l < layers; ++l) {
                const Matrix& w = p.weights[l];
                next.resize(w.rows);
                for (std::size_t j = 0; j < w.rows; ++j) {
                    next[j] = p.biases[l][j] + simd::dot(w.row(j), cur.data(), w.cols);
                }
                if (l + 1 < layers) {
                    double* h = t.hidden[l].row(r);
                    for (std::size_t j = 0; j < w.rows; ++j) {
                        h[j] = act_apply(p.activation, next[j]);
                    }
                    cur.assign(h, h + w.rows);
                } else {
                    std::memcpy(t.prenorm.row(r), next.data(), w.rows * sizeof(double));
                }
            }
            const double* v = t.prenorm.row(r);
            const double norm = std::sqrt(simd::dot(v, v, out_dim));
            if (!(norm > 1e-12) || !std::isfinite(norm)) {
                throw domain_error("encoder output for row " + std::to_string(r) +
                                   " has degenerate norm " + std::to_string(norm));
            }
            t.prenorm_norm[r] = norm;
            simd::combine(1.0 / norm, v, 0.0, v, t.z.row(r), out_dim);
        }
    });
    return t;
}

ParamGradients zero_gradients(const EncoderParams& p) {
    ParamGradients g;
    for (const Matrix& w : p.weights) g.d_weights.emplace_back(w.rows, w.cols);
    for (const Vector& b : p.biases) g.d_biases.emplace_back(b.size(), 0.0);
    return g;
}

void accumulate(ParamGradients& into, const ParamGradients& g) {
    for (std::size_t l = 0; l < g.d_weights.size(); ++l) {
        simd::axpy(1.0, g.d_weights[l].data.data(), into.d_weights[l].data.data(),
                   g.d_weights[l].data.size());
        simd::axpy(1.0, g.d_biases[l].data(), into.d_biases[l].data(),
                   g.d_biases[l].size());
    }
}

ParamGradients backward(const EncoderParams& p, const Matrix& inputs,
                        const ForwardTrace& trace, const Matrix& d_z,
                        Matrix* d_inputs, int threads) {
    const std::size_t layers = p.layer_count();
    const std::size_t n = inputs.rows;
    if (d_z.rows != n || d_z.cols != trace.z.cols) {
        throw domain_error("embedding gradient shape mismatch");
    }
    if (d_inputs) *d_inputs = Matrix(n, inputs.cols);

    const int workers = threads < 1 ? 1 : threads;
    std::vector<ParamGradients> partial;
    partial.reserve(workers);
    for (int w = 0; w < workers; ++w) partial.push_back(zero_gradients(p));
    const std::size_t chunk = (n + workers - 1) / workers;

    parallel_for(n, workers, [&](std::size_t lo, std::size_t hi) {
        ParamGradients& g = partial[lo / chunk];
        Vector dv, dh;
        for (std::size_t r = lo; r < hi; ++r) {
            const std::size_t out_dim = trace.z.cols;
            const double* z = trace.z.row(r);
            const double* gz = d_z.row(r);
            // normalization jacobian: (I - z z^T) / ||v||
            const double zg = simd::dot(z, gz, out_dim);
            dv.resize(out_dim);
            simd::combine(1.0 / trace.prenorm_norm[r], gz,
                          -zg / trace.prenorm_norm[r], z, dv.data(), out_dim);
            for (std::size_t li = layers; li-- > 0;) {
                const Matrix& w = p.weights[li];
                const double* below = li == 0 ? inputs.row(r) : trace.hidden[li - 1].row(r);
                for (std::size_t j = 0; j < w.rows; ++j) {
                    simd::axpy(dv[j], below, g.d_weights[li].row(j), w.cols);
                    g.d_biases[li][j] += dv[j];
                }
                if (li == 0 && !d_inputs) break;
                dh.assign(w.cols, 0.0);
                for (std::size_t j = 0; j < w.rows; ++j) {
                    simd::axpy(dv[j], w.row(j), dh.data(), w.cols);
                }
                if (li > 0) {
                    const double* h = trace.hidden[li - 1].row(r);
                    for (std::size_t j = 0; j < w.cols; ++j) {
                        dh[j] *= act_deriv(p.activation, h[j]);
                    }
                } else {
                    std::memcpy(d_inputs->row(r), dh.data(), dh.size() * sizeof(double));
                }
                dv = dh;
            }
        }
    });

    ParamGradients total = std::move(partial[0]);
    for (int w = 1; w < workers; ++w) accumulate(total, partial[w]);
    return total;
}

void save_checkpoint(const EncoderParams& p, const CheckpointMeta& meta,
                     const std::string& path) {
    nlohmann::json header;
    header["format"] = "unicon-checkpoint";
    header["version"] = 1;
    header["widths"] = p.widths();
    header["activation"] = activation_to_string(p.activation);
    header["seed"] = meta.seed;
    header["epoch"] = meta.epoch;
    header["count"] = p.parameter_count();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write " + path);
    out << header.dump() << '\n';
    for (const Matrix& w : p.weights) {
        out.write(reinterpret_cast<const char*>(w.data.data()),
                  static_cast<std::streamsize>(w.data.size() * sizeof(double)));
    }
    for (const Vector& b : p.biases) {
        out.write(reinterpret_cast<const char*>(b.data()),
                  static_cast<std::streamsize>(b.size() * sizeof(double)));
    }
    if (!out) throw data_error("write failed for " + path);
}

EncoderParams load_checkpoint(const std::string& path, CheckpointMeta* meta) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw data_error(path + ": missing header line");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw data_error(path + ": bad header: " + e.what());
    }
    if (header.value("format", "") != "unicon-checkpoint") {
        throw data_error(path + ": not a checkpoint file");
    }
    if (header.value("version", 0) != 1) {
        throw data_error(path + ": unsupported checkpoint version");
    }
    std::vector<std::size_t> widths;
    try {
        widths = header.at("widths").get<std::vector<std::size_t>>();
    } catch (const nlohmann::json::exception& e) {
        throw data_error(path + ": bad widths: " + e.what());
    }
    if (widths.size() < 2) throw data_error(path + ": width chain too short");
    for (std::size_t w : widths) {
        if (w == 0) throw data_error(path + ": zero width in chain");
    }
    EncoderParams p;
    p.activation = activation_from_string(header.value("activation", "relu"));
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        p.weights.emplace_back(widths[l + 1], widths[l]);
        p.biases.emplace_back(widths[l + 1], 0.0);
    }
    const std::size_t expect = p.parameter_count();
    if (header.value("count", std::size_t{0}) != expect) {
        throw data_error(path + ": parameter count disagrees with widths");
    }
    for (Matrix& w : p.weights) {
        in.read(reinterpret_cast<char*>(w.data.data()),
                static_cast<std::streamsize>(w.data.size() * sizeof(double)));
    }
    for (Vector& b : p.biases) {
        in.read(reinterpret_cast<char*>(b.data()),
                static_cast<std::streamsize>(b.size() * sizeof(double)));
    }
    if (!in) throw data_error(path + ": truncated payload");
    char extra;
    if (in.read(&extra, 1)) throw data_error(path + ": trailing bytes after payload");
    if (meta) {
        meta->seed = header.value("seed", std::uint64_t{0});
        meta->epoch = header.value("epoch", 0);
    }
    return p;
}

}  // namespace unicon
