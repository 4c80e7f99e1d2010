#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "unicon/diagnostics.hpp"
#include "unicon/errors.hpp"
#include "unicon/gradients.hpp"
#include "unicon/run_config.hpp"
#include "unicon/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace unicon;

namespace {

// Exit codes: 0 success, 1 failed check, 2 configuration or data problem,
// 3 training divergence.
constexpr int kOk = 0;
constexpr int kCheckFailed = 1;
constexpr int kBadConfig = 2;
constexpr int kDiverged = 3;

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    int threads = -1;
    std::int64_t seed = -1;  // negative: keep the config's seed
};

RunConfig load_and_override(const CommonFlags& flags) {
    RunConfig cfg = load_run_config(flags.config_path);
    if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
    if (flags.seed >= 0) {
        cfg.train.seed = static_cast<std::uint64_t>(flags.seed);
        cfg.probe.seed = cfg.train.seed + 10;
    }
    cfg.train.threads = flags.threads;
    cfg.probe.threads = flags.threads;
    return cfg;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw config_error("cannot create run directory " + dir);
}

int cmd_train(const CommonFlags& flags) {
    ManifestInfo manifest;
    manifest.started_at = iso8601_utc_now();
    const auto t0 = std::chrono::steady_clock::now();

    RunConfig cfg = load_and_override(flags);
    LabeledBatch data = load_dataset(cfg);
    finalize_widths(cfg, data.dim());
    ensure_dir(cfg.out_dir);

    const int every = std::max(1, cfg.train.epochs / 10);
    TrainResult result = pretrain(data, cfg.train,
                                  [&](int epoch, const EncoderParams&,
                                      const EpochRecord& row) {
                                      if (epoch % every == 0 ||
                                          epoch == cfg.train.epochs) {
                                          std::printf(
                                              "epoch %4d/%d  loss %.6f  lr %.5f\n",
                                              epoch, cfg.train.epochs, row.loss,
                                              row.lr);
                                      }
                                  });

    const fs::path dir(cfg.out_dir);
    result.record.checkpoint = "checkpoint.bin";
    CheckpointMeta meta{cfg.train.seed, cfg.train.epochs};
    save_checkpoint(result.params, meta, (dir / "checkpoint.bin").string());
    write_record_jsonl(result.record, (dir / "record.jsonl").string());
    write_hardness_csv(result.record.hardness, (dir / "hardness.csv").string());

    manifest.config_hash = config_hash_hex(cfg.document);
    manifest.seed = cfg.train.seed;
    manifest.outputs = {{"checkpoint", "checkpoint.bin"},
                        {"record", "record.jsonl"},
                        {"hardness", "hardness.csv"}};
    manifest.finished_at = iso8601_utc_now();
    manifest.total_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest((dir / "manifest.json").string(), manifest);

    std::printf("run complete: %s\n", cfg.out_dir.c_str());
    return kOk;
}

int cmd_probe(const CommonFlags& flags, const std::string& checkpoint_path,
              bool shuffle_labels, const std::string& out_file) {
    RunConfig cfg = load_and_override(flags);
    LabeledBatch data = load_dataset(cfg);
    EncoderParams params = load_checkpoint(checkpoint_path);
    cfg.probe.shuffle_labels = shuffle_labels;
    ProbeResult res = linear_probe(params, data, cfg.probe);
    json doc{{"accuracy", res.accuracy},
             {"train_accuracy", res.train_accuracy},
             {"shuffled_labels", shuffle_labels}};
    std::cout << doc.dump(2) << "\n";
    if (!out_file.empty()) {
        std::ofstream out(out_file, std::ios::binary);
        if (!out) throw data_error("cannot open " + out_file + " for writing");
        out << doc.dump(2) << "\n";
    }
    return kOk;
}

int cmd_gradcheck(const std::string& loss_name, int seeds, GradCheckSetup setup,
                  const FdSettings& fd) {
    std::vector<LossKind> kinds;
    if (loss_name == "all") {
        kinds = {LossKind::infonce, LossKind::supcon, LossKind::add,
                 LossKind::unicon, LossKind::un_uni, LossKind::supmix};
    } else {
        kinds = {loss_kind_from_string(loss_name)};
    }

    bool all_pass = true;
    json rows = json::array();
    const std::uint64_t base_seed = setup.seed;
    for (LossKind kind : kinds) {
        double max_rel = 0.0, mean_rel = 0.0;
        std::size_t non_finite = 0, params = 0;
        std::string worst;
        bool pass = true;
        for (int s = 0; s < seeds; ++s) {
            setup.seed = base_seed + static_cast<std::uint64_t>(s);
            GradCheckReport rep = gradcheck_full_path(kind, setup, fd);
            if (rep.max_rel_err > max_rel) {
                max_rel = rep.max_rel_err;
                worst = rep.worst_param;
            }
            mean_rel += rep.mean_rel_err;
            non_finite += rep.non_finite_evals;
            params = rep.parameter_count;
            pass = pass && rep.pass;
        }
        mean_rel /= static_cast<double>(seeds);
        all_pass = all_pass && pass;
        rows.push_back(json{{"loss", loss_kind_to_string(kind)},
                            {"seeds", seeds},
                            {"parameter_count", params},
                            {"max_rel_err", max_rel},
                            {"mean_rel_err", mean_rel},
                            {"non_finite_evals", non_finite},
                            {"worst_param", worst},
                            {"pass", pass}});
    }
    json doc{{"h", fd.h}, {"tol", fd.tol}, {"losses", rows}, {"pass", all_pass}};
    std::cout << doc.dump(2) << "\n";
    return all_pass ? kOk : kCheckFailed;
}

int cmd_sweep(const CommonFlags& flags, const std::string& lambda_list,
              const std::string& out_file) {
    RunConfig cfg = load_and_override(flags);
    LabeledBatch data = load_dataset(cfg);
    finalize_widths(cfg, data.dim());

    std::vector<double> lambdas;
    std::size_t pos = 0;
    while (pos < lambda_list.size()) {
        std::size_t next = lambda_list.find(',', pos);
        if (next == std::string::npos) next = lambda_list.size();
        try {
            lambdas.push_back(std::stod(lambda_list.substr(pos, next - pos)));
        } catch (const std::exception&) {
            throw config_error("bad lambda list entry \"" +
                               lambda_list.substr(pos, next - pos) + "\"");
        }
        pos = next + 1;
    }

    std::vector<SweepRow> rows = lambda_sweep(data, lambdas, cfg.train, cfg.probe);

    std::string out = out_file;
    if (out.empty()) {
        ensure_dir(cfg.out_dir);
        out = (fs::path(cfg.out_dir) / "sweep.csv").string();
    }
    write_sweep_csv(rows, out);
    std::printf("lambda,accuracy,final_loss,seconds\n");
    for (const SweepRow& row : rows) {
        std::printf("%.10g,%.10g,%.10g,%.3f\n", row.lambda, row.accuracy,
                    row.final_loss, row.seconds);
    }
    std::printf("sweep written: %s\n", out.c_str());
    return kOk;
}

int cmd_diagnose(const CommonFlags& flags, const std::string& checkpoint_path,
                 std::size_t cap) {
    RunConfig cfg = load_and_override(flags);
    LabeledBatch data = load_dataset(cfg);
    CheckpointMeta meta;
    EncoderParams params = load_checkpoint(checkpoint_path, &meta);
    ensure_dir(cfg.out_dir);
    const fs::path dir(cfg.out_dir);
    const int threads = cfg.train.threads;
    const std::uint64_t seed = cfg.train.seed ^ 0x9E3779B97F4A7C15ull;

    HardnessHistogram hist = record_hardness(params, data, cfg.train.mix, cap,
                                             meta.epoch, seed, threads);
    write_hardness_csv({hist}, (dir / "hardness.csv").string());

    MarginReport margin =
        margin_report(params, data, cfg.train.mix, seed, threads);
    json dist = json::array();
    for (std::size_t r = 0; r < margin.centroid_distance.rows; ++r) {
        json row = json::array();
        for (std::size_t s = 0; s < margin.centroid_distance.cols; ++s) {
            row.push_back(margin.centroid_distance.at(r, s));
        }
        dist.push_back(row);
    }
    json mdoc{{"class_ids", margin.class_ids},
              {"centroid_distance", dist},
              {"mean_anchor_to_own", margin.mean_anchor_to_own},
              {"mean_universum_to_nearest", margin.mean_universum_to_nearest},
              {"separation_ratio", margin.separation_ratio}};
    {
        std::ofstream out((dir / "margin.json").string(), std::ios::binary);
        if (!out) throw data_error("cannot open margin.json for writing");
        out << mdoc.dump(2) << "\n";
    }

    export_embeddings(params, data, cfg.train.mix,
                      (dir / "embeddings_samples.csv").string(),
                      (dir / "embeddings_mixtures.csv").string(), seed, threads);

    std::printf("hardness: conventional mean %.4f, universum mean %.4f\n",
                hist.conventional_mean, hist.universum_mean);
    std::printf("margin: anchor-to-own %.4f, universum-to-nearest %.4f\n",
                margin.mean_anchor_to_own, margin.mean_universum_to_nearest);
    std::printf("diagnostics written: %s\n", cfg.out_dir.c_str());
    return kOk;
}

int cmd_gen_data(const DatasetSpec& spec, const std::string& out_file) {
    LabeledBatch data = make_blobs(spec);
    save_csv(data, out_file);
    std::printf("wrote %zu samples (%d classes, dim %d): %s\n", data.size(),
                spec.classes, spec.dim, out_file.c_str());
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Contrastive training laboratory with synthetic mixture negatives"};
    app.require_subcommand(1);

    CommonFlags flags;

    auto add_common = [&](CLI::App* sub, bool with_out_dir) {
        sub->add_option("--config", flags.config_path, "JSON run configuration")
            ->required();
        sub->add_option("--threads", flags.threads,
                        "worker threads (-1: UNICON_THREADS or 1, 0: all cores)");
        sub->add_option("--seed", flags.seed, "override the config seed");
        if (with_out_dir) {
            sub->add_option("--out-dir", flags.out_dir,
                            "override the config output directory");
        }
    };

    CLI::App* train = app.add_subcommand("train", "pre-train an encoder");
    add_common(train, true);

    CLI::App* probe = app.add_subcommand(
        "probe", "linear probe of a checkpoint's frozen representation");
    add_common(probe, false);
    std::string probe_checkpoint;
    bool probe_shuffle = false;
    std::string probe_out;
    probe->add_option("--checkpoint", probe_checkpoint, "encoder checkpoint")
        ->required();
    probe->add_flag("--shuffle-labels", probe_shuffle,
                    "permute labels first (chance baseline)");
    probe->add_option("--out", probe_out, "also write the report to this file");

    CLI::App* gradcheck = app.add_subcommand(
        "gradcheck", "finite-difference certification of the full gradient path");
    std::string gc_loss = "all";
    int gc_seeds = 5;
    GradCheckSetup gc_setup;
    FdSettings gc_fd;
    bool gc_corrupt = false;
    gradcheck->add_option("--loss", gc_loss,
                          "infonce|supcon|add|unicon|un_uni|supmix|all");
    gradcheck->add_option("--seeds", gc_seeds, "random scenarios per loss")
        ->check(CLI::PositiveNumber);
    gradcheck->add_option("--samples", gc_setup.samples, "samples per scenario");
    gradcheck->add_option("--classes", gc_setup.classes, "classes per scenario");
    gradcheck->add_option("--tau", gc_setup.tau, "temperature");
    gradcheck->add_option("--lambda", gc_setup.lambda, "mixing coefficient");
    gradcheck->add_option("--step", gc_fd.h, "central-difference step");
    gradcheck->add_option("--tol", gc_fd.tol, "max relative error");
    gradcheck->add_option("--seed", gc_setup.seed, "base scenario seed");
    gradcheck->add_flag("--corrupt", gc_corrupt,
                        "sabotage one gradient entry; the check must fail");

    CLI::App* sweep = app.add_subcommand(
        "sweep", "re-train and probe across mixing coefficients");
    add_common(sweep, true);
    std::string sweep_lambdas = "0.1,0.3,0.5,0.7,0.9";
    std::string sweep_out;
    sweep->add_option("--lambdas", sweep_lambdas, "comma-separated values");
    sweep->add_option("--out", sweep_out, "CSV destination");

    CLI::App* diagnose = app.add_subcommand(
        "diagnose", "hardness, margin and embedding reports for a checkpoint");
    add_common(diagnose, true);
    std::string diag_checkpoint;
    std::size_t diag_cap = 512;
    diagnose->add_option("--checkpoint", diag_checkpoint, "encoder checkpoint")
        ->required();
    diagnose->add_option("--cap", diag_cap, "max samples in the hardness profile");

    CLI::App* gen = app.add_subcommand("gen-data", "synthesize a Gaussian blob CSV");
    DatasetSpec gen_spec;
    std::string gen_out;
    gen->add_option("--classes", gen_spec.classes, "class count");
    gen->add_option("--per-class", gen_spec.per_class, "samples per class");
    gen->add_option("--dim", gen_spec.dim, "feature dimension");
    gen->add_option("--center-scale", gen_spec.center_scale, "center spread");
    gen->add_option("--noise", gen_spec.noise, "within-class noise");
    gen->add_option("--seed", gen_spec.seed, "generator seed");
    gen->add_option("--out", gen_out, "CSV destination")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kBadConfig;
    }

    try {
        if (train->parsed()) return cmd_train(flags);
        if (probe->parsed()) {
            return cmd_probe(flags, probe_checkpoint, probe_shuffle, probe_out);
        }
        if (gradcheck->parsed()) {
            gc_setup.corrupt = gc_corrupt;
            return cmd_gradcheck(gc_loss, gc_seeds, gc_setup, gc_fd);
        }
        if (sweep->parsed()) return cmd_sweep(flags, sweep_lambdas, sweep_out);
        if (diagnose->parsed()) return cmd_diagnose(flags, diag_checkpoint, diag_cap);
        if (gen->parsed()) return cmd_gen_data(gen_spec, gen_out);
        std::fprintf(stderr, "no subcommand\n");
        return kBadConfig;
    } catch (const divergence_error& e) {
        std::fprintf(stderr, "diverged: %s (epoch %d, step %d)\n", e.what(), e.epoch,
                     e.step);
        return kDiverged;
    } catch (const config_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kBadConfig;
    } catch (const domain_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kBadConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return kCheckFailed;
    }
}
