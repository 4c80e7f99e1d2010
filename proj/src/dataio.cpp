#include "unicon/dataio.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "unicon/errors.hpp"
#include "unicon/rng.hpp"

namespace unicon {

namespace {

void validate_spec(const DatasetSpec& spec) {
    if (spec.classes < 1) throw config_error("dataset classes must be >= 1");
    if (spec.per_class < 1) throw config_error("dataset per_class must be >= 1");
    if (spec.dim < 1) throw config_error("dataset dim must be >= 1");
    if (spec.center_scale < 0.0) throw config_error("center_scale must be >= 0");
    if (spec.noise < 0.0) throw config_error("dataset noise must be >= 0");
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

bool parse_double(const std::string& s, double* out) {
    if (s.empty()) return false;
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || errno == ERANGE) return false;
    *out = v;
    return true;
}

bool parse_int(const std::string& s, long long* out) {
    if (s.empty()) return false;
    errno = 0;
    char* end = nullptr;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (end != s.c_str() + s.size() || errno == ERANGE) return false;
    *out = v;
    return true;
}

}  // namespace

LabeledBatch make_blobs(const DatasetSpec& spec) {
    validate_spec(spec);
    const std::size_t n = static_cast<std::size_t>(spec.classes) * spec.per_class;
    const std::size_t d = static_cast<std::size_t>(spec.dim);

    Matrix centers(spec.classes, d);
    Rng center_rng(spec.seed, 1);
    for (std::size_t i = 0; i < centers.data.size(); ++i) {
        centers.data[i] = spec.center_scale * center_rng.normal();
    }

    LabeledBatch out;
    out.features = Matrix(n, d);
    out.labels.resize(n);
    out.class_count = spec.classes;
    Rng noise_rng(spec.seed, 2);
    std::size_t row = 0;
    for (int c = 0; c < spec.classes; ++c) {
        for (int k = 0; k < spec.per_class; ++k, ++row) {
            double* x = out.features.row(row);
            const double* mu = centers.row(c);
            for (std::size_t j = 0; j < d; ++j) {
                x[j] = mu[j] + spec.noise * noise_rng.normal();
            }
            out.labels[row] = c;
        }
    }
    return out;
}

LabeledBatch load_csv(const std::string& path, int label_col,
                      std::map<long long, int>* label_map) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open " + path);

    std::vector<std::vector<double>> rows;
    std::vector<long long> raw_labels;
    std::string line;
    std::size_t lineno = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_fields(line);
        if (label_col < 0 || static_cast<std::size_t>(label_col) >= fields.size()) {
            throw data_error(path + ":" + std::to_string(lineno) +
                             ": label column " + std::to_string(label_col) +
                             " out of range for " + std::to_string(fields.size()) +
                             " columns");
        }
        long long lab = 0;
        double v = 0.0;
        if (!parse_int(fields[label_col], &lab)) {
            // Tolerate a single header line.
            if (lineno == 1 && rows.empty()) continue;
            throw data_error(path + ":" + std::to_string(lineno) +
                             ": label field '" + fields[label_col] +
                             "' is not an integer");
        }
        std::vector<double> feat;
        feat.reserve(fields.size() - 1);
        for (std::size_t c = 0; c < fields.size(); ++c) {
            if (c == static_cast<std::size_t>(label_col)) continue;
            if (!parse_double(fields[c], &v)) {
                throw data_error(path + ":" + std::to_string(lineno) +
                                 ": field '" + fields[c] + "' is not a number");
            }
            feat.push_back(v);
        }
        if (feat.empty()) {
            throw data_error(path + ":" + std::to_string(lineno) + ": no feature columns");
        }
        if (width == 0) {
            width = feat.size();
        } else if (feat.size() != width) {
            throw data_error(path + ":" + std::to_string(lineno) + ": expected " +
                             std::to_string(width) + " features, got " +
                             std::to_string(feat.size()));
        }
        rows.push_back(std::move(feat));
        raw_labels.push_back(lab);
    }
    if (rows.empty()) throw data_error(path + ": no data rows");

    LabeledBatch out;
    out.features = Matrix(rows.size(), width);
    out.labels.resize(rows.size());
    std::map<long long, int> mapping;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::memcpy(out.features.row(i), rows[i].data(), width * sizeof(double));
        auto it = mapping.find(raw_labels[i]);
        if (it == mapping.end()) {
            it = mapping.emplace(raw_labels[i], static_cast<int>(mapping.size())).first;
        }
        out.labels[i] = it->second;
    }
    out.class_count = static_cast<int>(mapping.size());
    if (label_map) *label_map = mapping;
    return out;
}

void save_csv(const LabeledBatch& batch, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write " + path);
    char buf[64];
    for (std::size_t i = 0; i < batch.size(); ++i) {
        out << batch.labels[i];
        const double* x = batch.features.row(i);
        for (std::size_t j = 0; j < batch.dim(); ++j) {
            std::snprintf(buf, sizeof buf, ",%.17g", x[j]);
            out << buf;
        }
        out << '\n';
    }
    if (!out) throw data_error("write failed for " + path);
}

AugmentedBatch augment(const LabeledBatch& batch, double noise_scale,
                       double drop_prob, std::uint64_t seed) {
    if (batch.size() == 0) throw domain_error("augment: empty batch");
    if (noise_scale < 0.0) throw config_error("augment noise must be >= 0");
    if (drop_prob < 0.0 || drop_prob >= 1.0) {
        throw config_error("augment drop probability must be in [0, 1)");
    }
    const std::size_t n = batch.size();
    const std::size_t d = batch.dim();
    AugmentedBatch out;
    out.views = Matrix(2 * n, d);
    out.labels.resize(2 * n);
    out.pair.resize(2 * n);
    out.origin.resize(2 * n);
    out.class_count = batch.class_count;
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t v = 0; v < 2; ++v) {
            const std::size_t r = 2 * k + v;
            Rng rng(seed, r + 1);
            double* x = out.views.row(r);
            const double* src = batch.features.row(k);
            for (std::size_t j = 0; j < d; ++j) {
                x[j] = src[j] + (noise_scale > 0.0 ? noise_scale * rng.normal() : 0.0);
            }
            if (drop_prob > 0.0) {
                for (std::size_t j = 0; j < d; ++j) {
                    if (rng.next_double() < drop_prob) x[j] = 0.0;
                }
            }
            out.labels[r] = batch.labels[k];
            out.pair[r] = 2 * k + (1 - v);
            out.origin[r] = k;
        }
    }
    return out;
}

AugmentedBatch to_block_layout(const AugmentedBatch& batch) {
    const std::size_t two_n = batch.view_count();
    if (two_n % 2 != 0) throw domain_error("to_block_layout: odd view count");
    const std::size_t n = two_n / 2;
    // new index: first views at [0, n), second views at [n, 2n)
    std::vector<std::size_t> new_of_old(two_n);
    for (std::size_t k = 0; k < n; ++k) {
        new_of_old[2 * k] = k;
        new_of_old[2 * k + 1] = n + k;
    }
    AugmentedBatch out;
    out.views = Matrix(two_n, batch.dim());
    out.labels.resize(two_n);
    out.pair.resize(two_n);
    out.origin.resize(two_n);
    out.class_count = batch.class_count;
    for (std::size_t old = 0; old < two_n; ++old) {
        const std::size_t nw = new_of_old[old];
        std::memcpy(out.views.row(nw), batch.views.row(old),
                    batch.dim() * sizeof(double));
        out.labels[nw] = batch.labels[old];
        out.origin[nw] = batch.origin[old];
        out.pair[nw] = new_of_old[batch.pair[old]];
    }
    return out;
}

LabeledBatch subset(const LabeledBatch& batch, const std::vector<std::size_t>& idx) {
    LabeledBatch out;
    out.features = Matrix(idx.size(), batch.dim());
    out.labels.resize(idx.size());
    out.class_count = batch.class_count;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= batch.size()) throw domain_error("subset: index out of range");
        std::memcpy(out.features.row(i), batch.features.row(idx[i]),
                    batch.dim() * sizeof(double));
        out.labels[i] = batch.labels[idx[i]];
    }
    return out;
}

Split stratified_split(const LabeledBatch& batch, double test_fraction,
                       std::uint64_t seed) {
    if (test_fraction <= 0.0 || test_fraction >= 1.0) {
        throw config_error("test_fraction must be in (0, 1)");
    }
    std::vector<std::vector<std::size_t>> by_class(batch.class_count);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        by_class[batch.labels[i]].push_back(i);
    }
    Split split;
    Rng rng(seed, 3);
    for (auto& members : by_class) {
        rng.shuffle(members);
        std::size_t n_test = static_cast<std::size_t>(
            std::llround(test_fraction * static_cast<double>(members.size())));
        if (n_test == 0 && members.size() > 1) n_test = 1;
        if (n_test >= members.size()) n_test = members.size() - 1;
        for (std::size_t i = 0; i < members.size(); ++i) {
            (i < n_test ? split.test : split.train).push_back(members[i]);
        }
    }
    return split;
}

}  // namespace unicon
