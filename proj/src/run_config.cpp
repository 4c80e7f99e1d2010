#include "unicon/run_config.hpp"

#include <cstdio>
#include <ctime>
#include <fstream>
#include <initializer_list>
#include <set>

#include "unicon/errors.hpp"

namespace unicon {

const char* const kArtifactVersion = "1.0.0";

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const std::string& scope,
                         std::initializer_list<const char*> allowed) {
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* key : allowed) {
            if (item.key() == key) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw config_error("unknown config key \"" +
                               (scope.empty() ? item.key() : scope + "." + item.key()) +
                               "\"");
        }
    }
}

const json* find(const json& obj, const char* key) {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

double as_double(const json& v, const std::string& name) {
    if (!v.is_number()) throw config_error(name + " must be a number");
    return v.get<double>();
}

int as_int(const json& v, const std::string& name) {
    if (!v.is_number_integer()) throw config_error(name + " must be an integer");
    return v.get<int>();
}

std::uint64_t as_u64(const json& v, const std::string& name) {
    if (!v.is_number_integer() || (v.is_number_integer() && v.get<long long>() < 0)) {
        throw config_error(name + " must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
}

bool as_bool(const json& v, const std::string& name) {
    if (!v.is_boolean()) throw config_error(name + " must be a boolean");
    return v.get<bool>();
}

std::string as_string(const json& v, const std::string& name) {
    if (!v.is_string()) throw config_error(name + " must be a string");
    return v.get<std::string>();
}

void parse_dataset(const json& obj, RunConfig& cfg) {
    reject_unknown_keys(obj, "dataset",
                        {"kind", "classes", "per_class", "dim", "center_scale",
                         "noise", "seed", "path", "label_col"});
    std::string kind = "blobs";
    if (const json* v = find(obj, "kind")) kind = as_string(*v, "dataset.kind");
    if (kind == "blobs") {
        cfg.from_csv = false;
        if (const json* v = find(obj, "classes"))
            cfg.blob_spec.classes = as_int(*v, "dataset.classes");
        if (const json* v = find(obj, "per_class"))
            cfg.blob_spec.per_class = as_int(*v, "dataset.per_class");
        if (const json* v = find(obj, "dim"))
            cfg.blob_spec.dim = as_int(*v, "dataset.dim");
        if (const json* v = find(obj, "center_scale"))
            cfg.blob_spec.center_scale = as_double(*v, "dataset.center_scale");
        if (const json* v = find(obj, "noise"))
            cfg.blob_spec.noise = as_double(*v, "dataset.noise");
        if (const json* v = find(obj, "seed"))
            cfg.blob_spec.seed = as_u64(*v, "dataset.seed");
        if (find(obj, "path") || find(obj, "label_col")) {
            throw config_error("dataset.path/label_col only apply to kind \"csv\"");
        }
    } else if (kind == "csv") {
        cfg.from_csv = true;
        const json* p = find(obj, "path");
        if (!p) throw config_error("dataset.path is required for kind \"csv\"");
        cfg.csv_path = as_string(*p, "dataset.path");
        if (const json* v = find(obj, "label_col"))
            cfg.label_col = as_int(*v, "dataset.label_col");
        for (const char* key : {"classes", "per_class", "dim", "center_scale",
                                "noise", "seed"}) {
            if (find(obj, key)) {
                throw config_error(std::string("dataset.") + key +
                                   " only applies to kind \"blobs\"");
            }
        }
    } else {
        throw config_error("dataset.kind must be \"blobs\" or \"csv\"");
    }
}

void parse_encoder(const json& obj, RunConfig& cfg) {
    reject_unknown_keys(obj, "encoder", {"widths", "activation"});
    if (const json* v = find(obj, "widths")) {
        if (!v->is_array() || v->empty()) {
            throw config_error("encoder.widths must be a non-empty array");
        }
        cfg.encoder_widths.clear();
        for (const json& w : *v) {
            const int width = as_int(w, "encoder.widths entry");
            if (width <= 0) throw config_error("encoder.widths must be positive");
            cfg.encoder_widths.push_back(static_cast<std::size_t>(width));
        }
    }
    if (const json* v = find(obj, "activation")) {
        cfg.train.activation = activation_from_string(as_string(*v, "encoder.activation"));
    }
}

void parse_loss(const json& obj, RunConfig& cfg) {
    reject_unknown_keys(obj, "loss", {"kind", "tau"});
    if (const json* v = find(obj, "kind")) {
        cfg.train.loss = loss_kind_from_string(as_string(*v, "loss.kind"));
    }
    if (const json* v = find(obj, "tau")) cfg.train.tau = as_double(*v, "loss.tau");
}

void parse_mix(const json& obj, RunConfig& cfg) {
    reject_unknown_keys(obj, "mix", {"mode", "lambda", "gamma"});
    std::string mode = "fixed";
    if (const json* v = find(obj, "mode")) mode = as_string(*v, "mix.mode");
    if (mode == "fixed") {
        cfg.train.mix.mode = MixPolicy::Mode::fixed;
        if (const json* v = find(obj, "lambda"))
            cfg.train.mix.lambda = as_double(*v, "mix.lambda");
        if (find(obj, "gamma")) {
            throw config_error("mix.gamma only applies to mode \"beta\"");
        }
    } else if (mode == "beta") {
        cfg.train.mix.mode = MixPolicy::Mode::beta;
        if (const json* v = find(obj, "gamma"))
            cfg.train.mix.gamma = as_double(*v, "mix.gamma");
        if (find(obj, "lambda")) {
            throw config_error("mix.lambda only applies to mode \"fixed\"");
        }
    } else {
        throw config_error("mix.mode must be \"fixed\" or \"beta\"");
    }
}

void parse_train(const json& obj, RunConfig& cfg) {
    reject_unknown_keys(obj, "train",
                        {"epochs", "batch_size", "lr", "warmup_epochs", "momentum",
                         "weight_decay", "augment_noise", "augment_drop",
                         "hardness_cap"});
    TrainConfig& t = cfg.train;
    if (const json* v = find(obj, "epochs")) t.epochs = as_int(*v, "train.epochs");
    if (const json* v = find(obj, "batch_size")) {
        const int b = as_int(*v, "train.batch_size");
        if (b <= 0) throw config_error("train.batch_size must be positive");
        t.batch_size = static_cast<std::size_t>(b);
    }
    if (const json* v = find(obj, "lr")) t.lr = as_double(*v, "train.lr");
    if (const json* v = find(obj, "warmup_epochs"))
        t.warmup_epochs = as_int(*v, "train.warmup_epochs");
    if (const json* v = find(obj, "momentum"))
        t.momentum = as_double(*v, "train.momentum");
    if (const json* v = find(obj, "weight_decay"))
        t.weight_decay = as_double(*v, "train.weight_decay");
    if (const json* v = find(obj, "augment_noise"))
        t.augment_noise = as_double(*v, "train.augment_noise");
    if (const json* v = find(obj, "augment_drop"))
        t.augment_drop = as_double(*v, "train.augment_drop");
    if (const json* v = find(obj, "hardness_cap")) {
        const int cap = as_int(*v, "train.hardness_cap");
        if (cap <= 0) throw config_error("train.hardness_cap must be positive");
        t.hardness_cap = static_cast<std::size_t>(cap);
    }
}

void parse_probe(const json& obj, RunConfig& cfg) {
    reject_unknown_keys(obj, "probe",
                        {"test_fraction", "iterations", "lr", "momentum", "l2"});
    ProbeConfig& p = cfg.probe;
    if (const json* v = find(obj, "test_fraction"))
        p.test_fraction = as_double(*v, "probe.test_fraction");
    if (const json* v = find(obj, "iterations"))
        p.iterations = as_int(*v, "probe.iterations");
    if (const json* v = find(obj, "lr")) p.lr = as_double(*v, "probe.lr");
    if (const json* v = find(obj, "momentum"))
        p.momentum = as_double(*v, "probe.momentum");
    if (const json* v = find(obj, "l2")) p.l2 = as_double(*v, "probe.l2");
}

}  // namespace

RunConfig parse_run_config(const nlohmann::json& doc) {
    if (!doc.is_object()) throw config_error("config root must be a JSON object");
    reject_unknown_keys(doc, "",
                        {"dataset", "encoder", "loss", "mix", "train", "probe",
                         "seed", "deterministic", "out_dir"});
    RunConfig cfg;
    cfg.document = doc;
    if (const json* v = find(doc, "dataset")) {
        if (!v->is_object()) throw config_error("dataset must be an object");
        parse_dataset(*v, cfg);
    }
    if (const json* v = find(doc, "encoder")) {
        if (!v->is_object()) throw config_error("encoder must be an object");
        parse_encoder(*v, cfg);
    }
    if (const json* v = find(doc, "loss")) {
        if (!v->is_object()) throw config_error("loss must be an object");
        parse_loss(*v, cfg);
    }
    if (const json* v = find(doc, "mix")) {
        if (!v->is_object()) throw config_error("mix must be an object");
        parse_mix(*v, cfg);
    }
    if (const json* v = find(doc, "train")) {
        if (!v->is_object()) throw config_error("train must be an object");
        parse_train(*v, cfg);
    }
    if (const json* v = find(doc, "probe")) {
        if (!v->is_object()) throw config_error("probe must be an object");
        parse_probe(*v, cfg);
    }
    if (const json* v = find(doc, "seed")) {
        cfg.train.seed = as_u64(*v, "seed");
        cfg.probe.seed = cfg.train.seed + 10;
    }
    if (const json* v = find(doc, "deterministic")) {
        cfg.train.deterministic = as_bool(*v, "deterministic");
    }
    if (const json* v = find(doc, "out_dir")) {
        cfg.out_dir = as_string(*v, "out_dir");
        if (cfg.out_dir.empty()) throw config_error("out_dir must not be empty");
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot read config file " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw config_error("invalid JSON in " + path + ": " + e.what());
    }
    return parse_run_config(doc);
}

LabeledBatch load_dataset(const RunConfig& cfg) {
    if (cfg.from_csv) return load_csv(cfg.csv_path, cfg.label_col);
    return make_blobs(cfg.blob_spec);
}

void finalize_widths(RunConfig& cfg, std::size_t input_dim) {
    cfg.train.widths.clear();
    cfg.train.widths.push_back(input_dim);
    cfg.train.widths.insert(cfg.train.widths.end(), cfg.encoder_widths.begin(),
                            cfg.encoder_widths.end());
}

std::uint64_t config_hash(const nlohmann::json& doc) {
    const std::string canon = doc.dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : canon) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string config_hash_hex(const nlohmann::json& doc) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(config_hash(doc)));
    return buf;
}

std::string iso8601_utc_now() {
    const std::time_t now = std::time(nullptr);
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

void write_manifest(const std::string& path, const ManifestInfo& info) {
    nlohmann::json outputs = nlohmann::json::object();
    for (const auto& [name, rel] : info.outputs) outputs[name] = rel;
    nlohmann::json doc{{"artifact_version", kArtifactVersion},
                       {"config_hash", info.config_hash},
                       {"seed", info.seed},
                       {"started_at", info.started_at},
                       {"finished_at", info.finished_at},
                       {"total_seconds", info.total_seconds},
                       {"outputs", outputs}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot open " + path + " for writing");
    out << doc.dump(2) << "\n";
    if (!out) throw data_error("write failed: " + path);
}

}  // namespace unicon
