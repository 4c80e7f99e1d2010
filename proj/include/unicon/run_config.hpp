#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "unicon/dataio.hpp"
#include "unicon/trainer.hpp"

namespace unicon {

// Everything a training run needs, read from one JSON document.  Unknown keys
// are rejected so typos fail loudly instead of silently using a default.
struct RunConfig {
    bool from_csv = false;
    DatasetSpec blob_spec;
    std::string csv_path;
    int label_col = 0;

    // Hidden and output widths; the input width is prepended from the data.
    std::vector<std::size_t> encoder_widths = {64, 16};

    TrainConfig train;  // train.widths is filled once the data dimension is known
    ProbeConfig probe;
    std::string out_dir = "run";

    nlohmann::json document;  // the parsed config, hashed into the manifest
};

RunConfig parse_run_config(const nlohmann::json& doc);

// Reads and parses the file; a missing or unreadable file is a config error
// that names the path.
RunConfig load_run_config(const std::string& path);

// Synthesizes or loads the configured dataset.
LabeledBatch load_dataset(const RunConfig& cfg);

// Completes train.widths as [input_dim, encoder_widths...].
void finalize_widths(RunConfig& cfg, std::size_t input_dim);

// FNV-1a over the canonical serialization (keys sorted), so two documents
// that differ only in key order hash identically.
std::uint64_t config_hash(const nlohmann::json& doc);
std::string config_hash_hex(const nlohmann::json& doc);

struct ManifestInfo {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string started_at;
    std::string finished_at;
    double total_seconds = 0.0;
    // name -> path relative to the run directory
    std::vector<std::pair<std::string, std::string>> outputs;
};

std::string iso8601_utc_now();

void write_manifest(const std::string& path, const ManifestInfo& info);

extern const char* const kArtifactVersion;

}  // namespace unicon
