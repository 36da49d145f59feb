// Command-line front end: dataset generation, training, identification, the
// FDD baseline, the experiment suite, and report merging.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "oma/dataset.hpp"
#include "oma/errors.hpp"
#include "oma/evaluation.hpp"
#include "oma/experiments.hpp"
#include "oma/fdd.hpp"
#include "oma/rng.hpp"
#include "oma/training.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitCheckFailed = 3;

oma::RawRetention raw_retention_from_flag(const std::string& s) {
    if (s == "none") return oma::RawRetention::None;
    if (s == "test") return oma::RawRetention::TestOnly;
    if (s == "all") return oma::RawRetention::All;
    throw oma::ConfigError("--raw must be none|test|all");
}

std::vector<const oma::DatasetRecord*> filter_split(const std::vector<oma::DatasetRecord>& records,
                                                    const std::string& split) {
    std::vector<const oma::DatasetRecord*> out;
    for (const auto& rec : records) {
        const bool take = split == "all" ||
                          (split == "train" && rec.split == oma::Split::Train) ||
                          (split == "test" && rec.split == oma::Split::Test);
        if (take) out.push_back(&rec);
    }
    if (out.empty()) throw oma::ConfigError("no records in split '" + split + "'");
    return out;
}

void write_estimates(const std::filesystem::path& prefix,
                     const std::vector<const oma::DatasetRecord*>& records,
                     const std::vector<oma::ModalEstimate>& estimates) {
    json records_json = json::array();
    std::ofstream csv(prefix.string() + ".csv");
    csv << "structure,mode,f_hat_hz,z_hat,f_target_hz,z_target,mac\n";
    for (std::size_t i = 0; i < records.size(); ++i) {
        const oma::DatasetRecord& rec = *records[i];
        const oma::ModalEstimate& est = estimates[i];
        json shapes = json::array();
        for (std::size_t r = 0; r < est.shapes.rows(); ++r) {
            json row = json::array();
            for (std::size_t c = 0; c < est.shapes.cols(); ++c) row.push_back(est.shapes(r, c));
            shapes.push_back(std::move(row));
        }
        records_json.push_back({{"index", rec.index},
                                {"frequencies", est.frequencies},
                                {"damping", est.damping},
                                {"shapes", std::move(shapes)}});
        for (std::size_t j = 0; j < est.frequencies.size(); ++j) {
            std::vector<double> est_col(est.shapes.rows()), tgt_col(est.shapes.rows());
            for (std::size_t r = 0; r < est.shapes.rows(); ++r) {
                est_col[r] = est.shapes(r, j);
                tgt_col[r] = rec.targets.shapes(r, j);
            }
            csv << rec.index << ',' << j + 1 << ',' << est.frequencies[j] << ',' << est.damping[j]
                << ',' << rec.targets.frequencies[j] << ',' << rec.targets.damping_ratios[j]
                << ',' << oma::mac(est_col, tgt_col) << '\n';
        }
    }
    std::ofstream js(prefix.string() + ".json");
    js << json{{"records", std::move(records_json)}}.dump(2) << "\n";
    if (!csv || !js) throw oma::Error("failed to write estimates to " + prefix.string());
}

int run(int argc, char** argv) {
    CLI::App app{"Population-based operational modal analysis toolkit"};
    app.require_subcommand(1);

    // ---- generate ----
    auto* generate = app.add_subcommand("generate", "Simulate a truss population dataset");
    std::string gen_config, gen_out, gen_kind = "simply_supported", gen_raw = "none";
    int gen_count = -1;
    std::uint64_t gen_seed = 0;
    bool gen_seed_set = false;
    generate->add_option("--config", gen_config, "experiment-config JSON to take settings from");
    generate->add_option("--out", gen_out, "output dataset directory")->required();
    generate->add_option("--count", gen_count, "population size");
    generate
        ->add_option_function<std::uint64_t>(
            "--seed", [&](std::uint64_t v) { gen_seed = v; gen_seed_set = true; }, "population seed")
        ->expected(1);
    generate->add_option("--kind", gen_kind, "simply_supported | cantilevered");
    generate->add_option("--raw", gen_raw, "raw time-history retention: none|test|all");

    // ---- train ----
    auto* train_cmd = app.add_subcommand("train", "Train the model on a dataset");
    std::string train_data, train_out, train_variant = "GraphSAGE";
    int train_epochs = 1000, train_batch = 64;
    std::uint64_t train_seed = 1;
    double val_fraction = 0.0;
    train_cmd->add_option("--data", train_data, "dataset directory")->required();
    train_cmd->add_option("--out", train_out, "checkpoint file to write")->required();
    train_cmd->add_option("--epochs", train_epochs, "epoch budget");
    train_cmd->add_option("--batch", train_batch, "batch size");
    train_cmd->add_option("--seed", train_seed, "training seed");
    train_cmd->add_option("--variant", train_variant, "GraphSAGE | GCN | GAT");
    train_cmd->add_option("--val-fraction", val_fraction,
                          "tail fraction of the train split held out for validation curves");

    // ---- identify ----
    auto* identify = app.add_subcommand("identify", "Identify modal properties with a checkpoint");
    std::string id_data, id_ckpt, id_out, id_split = "test";
    double id_ratio = 0.0;
    std::uint64_t id_mask_seed = 7;
    identify->add_option("--data", id_data, "dataset directory")->required();
    identify->add_option("--checkpoint", id_ckpt, "trained checkpoint")->required();
    identify->add_option("--out", id_out, "output prefix (.csv/.json)")->required();
    identify->add_option("--split", id_split, "train | test | all");
    identify->add_option("--missing-ratio", id_ratio, "fraction of nodes masked before FP");
    identify->add_option("--mask-seed", id_mask_seed, "seed of the missing-node masks");

    // ---- fdd ----
    auto* fdd_cmd = app.add_subcommand("fdd", "Run the automated FDD baseline");
    std::string fdd_data, fdd_out, fdd_split = "test";
    fdd_cmd->add_option("--data", fdd_data, "dataset directory (records need raw histories)")
        ->required();
    fdd_cmd->add_option("--out", fdd_out, "output prefix (.csv/.json)")->required();
    fdd_cmd->add_option("--split", fdd_split, "train | test | all");

    // ---- experiment ----
    auto* experiment = app.add_subcommand("experiment", "Run a named experiment end to end");
    std::string exp_name, exp_out, exp_config, exp_dataset_dir, exp_checkpoint;
    std::uint64_t exp_seed = 1;
    bool exp_paper_scale = false, exp_check = false;
    experiment
        ->add_option("name", exp_name,
                     "variants_table | ablation | missing_features | noise | train_size | "
                     "fdd_compare | cross_population")
        ->required();
    experiment->add_option("--out", exp_out, "output directory")->required();
    experiment->add_option("--config", exp_config, "experiment-config JSON");
    experiment->add_option("--seed", exp_seed, "experiment seed");
    experiment->add_flag("--paper-scale", exp_paper_scale,
                         "500-structure population and 5000-epoch budget");
    experiment->add_flag("--check", exp_check, "apply acceptance thresholds (exit 3 on failure)");
    experiment->add_option("--dataset-dir", exp_dataset_dir, "dataset cache directory");
    experiment->add_option("--checkpoint", exp_checkpoint, "reuse / persist the trained model");

    // ---- report ----
    auto* report = app.add_subcommand("report", "Merge experiment outputs into one report");
    std::vector<std::string> report_in;
    std::string report_out;
    report->add_option("--in", report_in, "experiment output directories")->required();
    report->add_option("--out", report_out, "report directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return kExitConfig;
    }

    if (generate->parsed()) {
        oma::ExperimentConfig cfg = gen_config.empty()
                                        ? oma::ExperimentConfig::desk_scale(gen_seed_set ? gen_seed : 1)
                                        : oma::load_experiment_config(gen_config);
        if (gen_count > 0) cfg.population.count = gen_count;
        if (gen_seed_set) cfg.population.seed = gen_seed;
        cfg.population.kind = oma::support_kind_from_string(gen_kind);
        const auto raw = raw_retention_from_flag(gen_raw);
        auto [manifest, records] = oma::build_dataset(cfg.population, cfg.welch, cfg.sim, raw);
        oma::save_dataset(gen_out, manifest, records);
        std::cout << "wrote " << records.size() << " records to " << gen_out << "\n";
        return kExitOk;
    }

    if (train_cmd->parsed()) {
        auto [manifest, records] = oma::load_dataset(train_data);
        std::vector<oma::GraphSample> train_set;
        for (const auto& rec : records) {
            if (rec.split == oma::Split::Train) train_set.push_back(oma::to_graph_sample(rec));
        }
        if (train_set.empty()) throw oma::EmptyDataset("dataset has no train records");
        std::vector<oma::GraphSample> val_set;
        if (val_fraction > 0.0) {
            const auto keep = static_cast<std::size_t>(
                std::llround((1.0 - val_fraction) * train_set.size()));
            val_set.assign(train_set.begin() + keep, train_set.end());
            train_set.resize(keep);
        }
        oma::ModelConfig mcfg;
        mcfg.variant = oma::gnn_variant_from_string(train_variant);
        mcfg.psd_dim = manifest.welch.bin_count();
        mcfg.modes = manifest.sim.modes;
        oma::TrainConfig tcfg;
        tcfg.epochs = train_epochs;
        tcfg.batch_size = train_batch;
        tcfg.seed = oma::derive_seed(train_seed, 44);
        oma::OmaModel model(mcfg, oma::derive_seed(train_seed, 33));
        const oma::TrainResult result =
            oma::train(model, train_set, val_set.empty() ? nullptr : &val_set, tcfg);
        oma::CheckpointMeta meta;
        meta.init_seed = oma::derive_seed(train_seed, 33);
        meta.train_seed = tcfg.seed;
        meta.epochs = train_epochs;
        meta.final_train_loss = result.train_history.back().total;
        meta.final_validation_loss = result.final_validation_loss;
        meta.train_seconds = result.wall_seconds;
        oma::save_checkpoint(train_out, model, meta);
        std::filesystem::path loss_csv(train_out);
        loss_csv.replace_extension(".loss.csv");
        oma::save_loss_history(loss_csv, result.train_history, result.val_history);
        std::cout << "trained " << train_epochs << " epochs in " << result.wall_seconds
                  << " s; final train loss " << meta.final_train_loss << "\n"
                  << "checkpoint: " << train_out << "\nloss curves: " << loss_csv.string() << "\n";
        return kExitOk;
    }

    if (identify->parsed()) {
        auto [manifest, records] = oma::load_dataset(id_data);
        auto [model, meta] = oma::load_checkpoint(id_ckpt);
        const auto selected = filter_split(records, id_split);
        std::vector<oma::ModalEstimate> estimates;
        estimates.reserve(selected.size());
        for (const auto* rec : selected) {
            if (id_ratio > 0.0) {
                const auto known = oma::missing_mask(
                    rec->structure, id_ratio,
                    oma::derive_seed(id_mask_seed, static_cast<std::uint64_t>(rec->index)));
                estimates.push_back(model.infer_single(oma::to_masked_sample(*rec, known)));
            } else {
                estimates.push_back(model.infer_single(oma::to_graph_sample(*rec)));
            }
        }
        write_estimates(id_out, selected, estimates);
        std::cout << "identified " << selected.size() << " structures -> " << id_out
                  << ".{csv,json}\n";
        return kExitOk;
    }

    if (fdd_cmd->parsed()) {
        auto [manifest, records] = oma::load_dataset(fdd_data);
        const auto selected = filter_split(records, fdd_split);
        oma::PeakPickConfig pick;
        pick.modes = manifest.sim.modes;
        std::vector<const oma::DatasetRecord*> ok_records;
        std::vector<oma::ModalEstimate> estimates;
        double seconds = 0.0;
        int failures = 0;
        for (const auto* rec : selected) {
            if (!rec->has_raw) {
                throw oma::ConfigError(
                    "record lacks raw time history; regenerate with --raw test or all");
            }
            try {
                auto id = oma::fdd_identify(rec->raw, manifest.welch, pick, oma::EfddConfig{},
                                            manifest.sim.discard_seconds);
                seconds += id.wall_seconds;
                ok_records.push_back(rec);
                estimates.push_back(std::move(id.estimate));
            } catch (const oma::InsufficientPeaks& e) {
                ++failures;
                std::cerr << "structure " << rec->index << ": " << e.what() << "\n";
            }
        }
        if (estimates.empty()) throw oma::Error("FDD failed on every structure");
        write_estimates(fdd_out, ok_records, estimates);
        std::cout << "fdd identified " << estimates.size() << " structures (" << failures
                  << " failures) in " << seconds << " s -> " << fdd_out << ".{csv,json}\n";
        return kExitOk;
    }

    if (experiment->parsed()) {
        oma::ExperimentConfig cfg;
        if (!exp_config.empty()) {
            cfg = oma::load_experiment_config(exp_config);
        } else {
            cfg = exp_paper_scale ? oma::ExperimentConfig::paper_scale(exp_seed)
                                  : oma::ExperimentConfig::desk_scale(exp_seed);
        }
        cfg.experiment = exp_name;
        if (!exp_dataset_dir.empty()) cfg.dataset_dir = exp_dataset_dir;
        if (!exp_checkpoint.empty()) cfg.checkpoint = exp_checkpoint;
        const oma::CheckOutcome outcome = oma::run_experiment(cfg, exp_out, exp_check);
        for (const std::string& n : outcome.notes) std::cout << n << "\n";
        std::cout << "results in " << exp_out << "\n";
        if (outcome.checked && !outcome.passed) return kExitCheckFailed;
        return kExitOk;
    }

    if (report->parsed()) {
        std::vector<std::filesystem::path> inputs(report_in.begin(), report_in.end());
        oma::write_report(inputs, report_out);
        std::cout << "report in " << report_out << "/report.md\n";
        return kExitOk;
    }

    return kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const oma::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}
