#include "oma/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json_io.hpp"
#include "oma/errors.hpp"
#include "oma/rng.hpp"

namespace oma {

using nlohmann::json;

namespace {

json train_to_json(const TrainConfig& c) {
    return json{{"epochs", c.epochs},
                {"batch_size", c.batch_size},
                {"seed", c.seed},
                {"lambda_shape", c.lambdas.shape},
                {"lambda_freq", c.lambdas.freq},
                {"lambda_damp", c.lambdas.damp},
                {"lr", c.adam.lr},
                {"beta1", c.adam.beta1},
                {"beta2", c.adam.beta2},
                {"eps", c.adam.eps}};
}

TrainConfig train_from_json(const json& j) {
    TrainConfig c;
    c.epochs = j.at("epochs").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.lambdas.shape = j.at("lambda_shape").get<double>();
    c.lambdas.freq = j.at("lambda_freq").get<double>();
    c.lambdas.damp = j.at("lambda_damp").get<double>();
    c.adam.lr = j.at("lr").get<double>();
    c.adam.beta1 = j.at("beta1").get<double>();
    c.adam.beta2 = j.at("beta2").get<double>();
    c.adam.eps = j.at("eps").get<double>();
    return c;
}

json experiment_to_json(const ExperimentConfig& cfg) {
    return json{{"experiment", cfg.experiment},
                {"population", io::to_json(cfg.population)},
                {"population2", io::to_json(cfg.population2)},
                {"welch", io::to_json(cfg.welch)},
                {"sim", io::to_json(cfg.sim)},
                {"model", io::to_json(cfg.model)},
                {"train", train_to_json(cfg.train)},
                {"folds", cfg.folds},
                {"kfold_epochs", cfg.kfold_epochs},
                {"missing_ratios", cfg.missing_ratios},
                {"noise_level", cfg.noise_level},
                {"train_sizes", cfg.train_sizes},
                {"size_batches", cfg.size_batches},
                {"seed", cfg.seed},
                {"dataset_dir", cfg.dataset_dir.string()},
                {"checkpoint", cfg.checkpoint.string()}};
}

ExperimentConfig experiment_from_json(const json& j) {
    ExperimentConfig cfg;
    cfg.experiment = j.at("experiment").get<std::string>();
    cfg.population = io::population_from_json(j.at("population"));
    cfg.population2 = io::population_from_json(j.at("population2"));
    cfg.welch = io::welch_from_json(j.at("welch"));
    cfg.sim = io::sim_from_json(j.at("sim"));
    cfg.model = io::model_from_json(j.at("model"));
    cfg.train = train_from_json(j.at("train"));
    cfg.folds = j.at("folds").get<int>();
    cfg.kfold_epochs = j.at("kfold_epochs").get<int>();
    cfg.missing_ratios = j.at("missing_ratios").get<std::vector<double>>();
    cfg.noise_level = j.at("noise_level").get<double>();
    cfg.train_sizes = j.at("train_sizes").get<std::vector<int>>();
    cfg.size_batches = j.at("size_batches").get<std::vector<int>>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.dataset_dir = j.value("dataset_dir", std::string{});
    cfg.checkpoint = j.value("checkpoint", std::string{});
    return cfg;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

StatsBlock summarize_block(const std::string& label,
                           const std::vector<ModalEstimate>& estimates,
                           const std::vector<const ModalSolution*>& targets) {
    std::vector<EvaluationPair> pairs;
    pairs.reserve(estimates.size());
    for (std::size_t i = 0; i < estimates.size(); ++i) {
        pairs.push_back({&estimates[i], targets[i]});
    }
    return {label, summarize(pairs)};
}

}  // namespace

ExperimentConfig ExperimentConfig::desk_scale(std::uint64_t seed) {
    ExperimentConfig cfg;
    cfg.seed = seed;
    cfg.population.count = 100;
    cfg.population.kind = SupportKind::SimplySupported;
    cfg.population.seed = derive_seed(seed, 11);
    cfg.population2 = cfg.population;
    cfg.population2.count = 20;
    cfg.population2.kind = SupportKind::Cantilevered;
    cfg.population2.seed = derive_seed(seed, 22);
    cfg.model.psd_dim = cfg.welch.bin_count();
    cfg.model.modes = cfg.sim.modes;
    cfg.train.epochs = 1000;
    cfg.train.batch_size = 64;
    cfg.train.seed = derive_seed(seed, 44);
    cfg.folds = 5;
    cfg.kfold_epochs = 250;
    cfg.train_sizes = {8, 40, 80};
    cfg.size_batches = {8, 32, 64};
    return cfg;
}

ExperimentConfig ExperimentConfig::paper_scale(std::uint64_t seed) {
    ExperimentConfig cfg = desk_scale(seed);
    cfg.population.count = 500;
    cfg.population2.count = 100;
    cfg.train.epochs = 5000;
    cfg.kfold_epochs = 5000;
    cfg.train_sizes = {40, 200, 400};
    cfg.size_batches = {8, 32, 64};
    return cfg;
}

void ExperimentConfig::validate() const {
    population.validate();
    population2.validate();
    welch.validate();
    sim.validate();
    model.validate();
    for (double r : missing_ratios) {
        if (r < 0.0 || r >= 1.0) throw ConfigError("missing ratios must be in [0, 1)");
    }
    if (noise_level < 0.0) throw ConfigError("noise level must be >= 0");
    if (train_sizes.size() != size_batches.size()) {
        throw ConfigError("train_sizes and size_batches must pair up");
    }
    const int train_split = static_cast<int>(std::lround(0.8 * population.count));
    for (int s : train_sizes) {
        if (s < 1 || s > train_split) throw ConfigError("train size exceeds the train split");
    }
    if (folds < 2) throw ConfigError("folds must be >= 2");
}

ExperimentConfig load_experiment_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open config " + file.string());
    return experiment_from_json(json::parse(in));
}

void save_experiment_config(const std::filesystem::path& file, const ExperimentConfig& cfg) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file);
    out << experiment_to_json(cfg).dump(2) << "\n";
    if (!out) throw Error("failed to write config " + file.string());
}

RunManifest make_manifest(const ExperimentConfig& cfg) {
    RunManifest m;
    m.config_json = experiment_to_json(cfg).dump();
    m.hash = hex64(fnv1a(m.config_json));
    return m;
}

// ---------------------------------------------------------------------------
// data and model preparation
// ---------------------------------------------------------------------------

namespace {

bool raw_covers(RawRetention have, RawRetention need) {
    if (need == RawRetention::None) return true;
    if (need == RawRetention::TestOnly) return have != RawRetention::None;
    return have == RawRetention::All;
}

}  // namespace

PreparedData prepare_data(const ExperimentConfig& cfg, RawRetention raw) {
    PreparedData data;
    bool loaded = false;
    if (!cfg.dataset_dir.empty() &&
        std::filesystem::exists(cfg.dataset_dir / "manifest.json")) {
        auto [manifest, records] = load_dataset(cfg.dataset_dir);
        const json want = io::to_json(cfg.population);
        const json have = io::to_json(manifest.population);
        if (want == have && io::to_json(manifest.welch) == io::to_json(cfg.welch) &&
            io::to_json(manifest.sim) == io::to_json(cfg.sim) &&
            raw_covers(manifest.raw, raw)) {
            data.manifest = std::move(manifest);
            data.records = std::move(records);
            loaded = true;
        }
    }
    if (!loaded) {
        auto [manifest, records] = build_dataset(cfg.population, cfg.welch, cfg.sim, raw);
        data.manifest = std::move(manifest);
        data.records = std::move(records);
        if (!cfg.dataset_dir.empty()) {
            save_dataset(cfg.dataset_dir, data.manifest, data.records);
        }
    }
    for (const DatasetRecord& rec : data.records) {
        if (rec.split == Split::Train) {
            data.train_samples.push_back(to_graph_sample(rec));
        } else {
            data.test_samples.push_back(to_graph_sample(rec));
            data.test_records.push_back(&rec);
        }
    }
    return data;
}

OmaModel obtain_model(const ExperimentConfig& cfg, const PreparedData& data,
                      CheckpointMeta* meta_out) {
    if (!cfg.checkpoint.empty() && std::filesystem::exists(cfg.checkpoint)) {
        auto [model, meta] = load_checkpoint(cfg.checkpoint);
        if (meta_out) *meta_out = meta;
        return model;
    }
    OmaModel model(cfg.model, derive_seed(cfg.seed, 33));
    const TrainResult result = train(model, data.train_samples, nullptr, cfg.train);
    if (meta_out) {
        meta_out->init_seed = derive_seed(cfg.seed, 33);
        meta_out->train_seed = cfg.train.seed;
        meta_out->epochs = cfg.train.epochs;
        meta_out->final_train_loss = result.train_history.back().total;
        meta_out->final_validation_loss = result.final_validation_loss;
        meta_out->train_seconds = result.wall_seconds;
    }
    if (!cfg.checkpoint.empty()) {
        CheckpointMeta meta;
        meta.init_seed = derive_seed(cfg.seed, 33);
        meta.train_seed = cfg.train.seed;
        meta.epochs = cfg.train.epochs;
        meta.final_train_loss = result.train_history.back().total;
        meta.final_validation_loss = result.final_validation_loss;
        meta.train_seconds = result.wall_seconds;
        save_checkpoint(cfg.checkpoint, model, meta);
    }
    return model;
}

// ---------------------------------------------------------------------------
// experiments
// ---------------------------------------------------------------------------

VariantsResult run_variants_table(const ExperimentConfig& cfg) {
    const PreparedData data = prepare_data(cfg, RawRetention::None);
    VariantsResult result;
    result.manifest = make_manifest(cfg);
    TrainConfig kcfg = cfg.train;
    kcfg.epochs = cfg.kfold_epochs;
    for (GnnVariant v : {GnnVariant::GCN, GnnVariant::GAT, GnnVariant::GraphSAGE}) {
        ModelConfig mcfg = cfg.model;
        mcfg.variant = v;
        result.rows.push_back({to_string(v), kfold_cv(mcfg, data.train_samples, cfg.folds, kcfg)});
    }
    return result;
}

AblationResult run_ablation(const ExperimentConfig& cfg) {
    const PreparedData data = prepare_data(cfg, RawRetention::None);
    AblationResult result;
    result.manifest = make_manifest(cfg);
    TrainConfig kcfg = cfg.train;
    kcfg.epochs = cfg.kfold_epochs;

    ModelConfig no_encoder = cfg.model;
    no_encoder.use_encoder = false;
    ModelConfig no_gnn = cfg.model;
    no_gnn.message_passing = false;
    const std::pair<std::string, ModelConfig> variants[] = {
        {"no_encoder", no_encoder}, {"no_gnn", no_gnn}, {"original", cfg.model}};
    for (const auto& [name, mcfg] : variants) {
        result.rows.push_back({name, kfold_cv(mcfg, data.train_samples, cfg.folds, kcfg)});
    }
    return result;
}

MissingFeaturesResult run_missing_features(const ExperimentConfig& cfg) {
    const PreparedData data = prepare_data(cfg, RawRetention::None);
    const OmaModel model = obtain_model(cfg, data);
    MissingFeaturesResult result;
    result.manifest = make_manifest(cfg);
    for (double ratio : cfg.missing_ratios) {
        std::vector<ModalEstimate> estimates;
        std::vector<const ModalSolution*> targets;
        for (const DatasetRecord* rec : data.test_records) {
            const std::vector<bool> known = missing_mask(
                rec->structure, ratio,
                derive_seed(cfg.seed, 55, static_cast<std::uint64_t>(rec->index)));
            estimates.push_back(model.infer_single(to_masked_sample(*rec, known)));
            targets.push_back(&rec->targets);
        }
        std::ostringstream label;
        label << "missing_" << ratio;
        result.per_ratio.push_back(summarize_block(label.str(), estimates, targets));
    }
    return result;
}

NoiseResult run_noise(const ExperimentConfig& cfg) {
    const PreparedData data = prepare_data(cfg, RawRetention::TestOnly);
    const OmaModel model = obtain_model(cfg, data);
    NoiseResult result;
    result.manifest = make_manifest(cfg);

    std::vector<ModalEstimate> clean_est, noisy_est;
    std::vector<const ModalSolution*> targets;
    for (const DatasetRecord* rec : data.test_records) {
        if (!rec->has_raw) {
            throw ConfigError("noise experiment needs raw time histories on the test split");
        }
        clean_est.push_back(model.infer_single(to_graph_sample(*rec)));
        RandomStream noise_rng(derive_seed(cfg.seed, 66, static_cast<std::uint64_t>(rec->index)));
        const TimeHistory noisy = inject_noise(rec->raw, cfg.noise_level, noise_rng);
        PsdSet psd = compute_psd_set(noisy, cfg.welch, cfg.sim.discard_seconds);
        GraphSample sample;
        sample.features = normalize_psd_set(std::move(psd)).values;
        sample.edges = rec->structure.edges;
        sample.targets = rec->targets;
        noisy_est.push_back(model.infer_single(sample));
        targets.push_back(&rec->targets);
    }
    result.clean = summarize_block("noise_free", clean_est, targets);
    result.noisy = summarize_block("noisy", noisy_est, targets);
    return result;
}

TrainSizeResult run_train_size(const ExperimentConfig& cfg) {
    const PreparedData data = prepare_data(cfg, RawRetention::None);
    TrainSizeResult result;
    result.manifest = make_manifest(cfg);
    for (std::size_t i = 0; i < cfg.train_sizes.size(); ++i) {
        const int size = cfg.train_sizes[i];
        std::vector<GraphSample> subset(data.train_samples.begin(),
                                        data.train_samples.begin() + size);
        TrainConfig tcfg = cfg.train;
        tcfg.batch_size = cfg.size_batches[i];
        OmaModel model(cfg.model, derive_seed(cfg.seed, 33, static_cast<std::uint64_t>(i)));
        train(model, subset, nullptr, tcfg);

        std::vector<ModalEstimate> estimates;
        std::vector<const ModalSolution*> targets;
        for (std::size_t t = 0; t < data.test_samples.size(); ++t) {
            estimates.push_back(model.infer_single(data.test_samples[t]));
            targets.push_back(&data.test_records[t]->targets);
        }
        result.per_size.push_back(
            summarize_block("train_" + std::to_string(size), estimates, targets));
    }
    return result;
}

FddCompareResult run_fdd_compare(const ExperimentConfig& cfg) {
    const PreparedData data = prepare_data(cfg, RawRetention::TestOnly);
    const OmaModel model = obtain_model(cfg, data);
    FddCompareResult result;
    result.manifest = make_manifest(cfg);

    // GNN identification timed from stored PSDs (normalize + forward)
    std::vector<ModalEstimate> gnn_est;
    std::vector<const ModalSolution*> targets;
    {
        const auto start = std::chrono::steady_clock::now();
        for (const DatasetRecord* rec : data.test_records) {
            gnn_est.push_back(model.infer_single(to_graph_sample(*rec)));
        }
        result.gnn_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    for (const DatasetRecord* rec : data.test_records) targets.push_back(&rec->targets);
    result.gnn = summarize_block("gnn", gnn_est, targets);

    // FDD identification from raw histories; per-structure failures are
    // recorded, not fatal
    PeakPickConfig pick;
    pick.modes = cfg.sim.modes;
    std::vector<ModalEstimate> fdd_est;
    std::vector<const ModalSolution*> fdd_targets;
    result.fdd_freq_max_err_hz.assign(static_cast<std::size_t>(cfg.sim.modes), 0.0);
    const auto start = std::chrono::steady_clock::now();
    for (const DatasetRecord* rec : data.test_records) {
        if (!rec->has_raw) {
            throw ConfigError("fdd_compare needs raw time histories on the test split");
        }
        try {
            FddIdentification id =
                fdd_identify(rec->raw, cfg.welch, pick, EfddConfig{}, cfg.sim.discard_seconds);
            for (int j = 0; j < cfg.sim.modes; ++j) {
                const double err = std::abs(id.estimate.frequencies[static_cast<std::size_t>(j)] -
                                            rec->targets.frequencies[static_cast<std::size_t>(j)]);
                result.fdd_freq_max_err_hz[static_cast<std::size_t>(j)] =
                    std::max(result.fdd_freq_max_err_hz[static_cast<std::size_t>(j)], err);
            }
            fdd_est.push_back(std::move(id.estimate));
            fdd_targets.push_back(&rec->targets);
        } catch (const InsufficientPeaks&) {
            ++result.fdd_failures;
        }
    }
    result.fdd_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!fdd_est.empty()) result.fdd = summarize_block("fdd", fdd_est, fdd_targets);
    return result;
}

CrossPopulationResult run_cross_population(const ExperimentConfig& cfg) {
    const PreparedData data = prepare_data(cfg, RawRetention::None);
    const OmaModel model = obtain_model(cfg, data);
    CrossPopulationResult result;
    result.manifest = make_manifest(cfg);

    std::vector<ModalEstimate> own_est;
    std::vector<const ModalSolution*> own_targets;
    for (std::size_t t = 0; t < data.test_samples.size(); ++t) {
        own_est.push_back(model.infer_single(data.test_samples[t]));
        own_targets.push_back(&data.test_records[t]->targets);
    }
    result.own = summarize_block("own_population", own_est, own_targets);

    auto [manifest2, records2] = build_dataset(cfg.population2, cfg.welch, cfg.sim);
    std::vector<ModalEstimate> cross_est;
    std::vector<const ModalSolution*> cross_targets;
    for (const DatasetRecord& rec : records2) {
        cross_est.push_back(model.infer_single(to_graph_sample(rec)));
        cross_targets.push_back(&rec.targets);
    }
    result.cross = summarize_block("cantilevered", cross_est, cross_targets);
    return result;
}

// ---------------------------------------------------------------------------
// table emission
// ---------------------------------------------------------------------------

void write_stats_csv(const std::filesystem::path& file, const StatsBlock& block,
                     const RunManifest& manifest) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file);
    out << "# manifest: " << manifest.hash << "\n";
    out << "# block: " << block.label << "\n";
    out << "mode,mac_mean,mac_sd,mac_min,z_err_mean,z_err_sd,z_err_max,"
           "f_err_mean,f_err_sd,f_err_max,z_err_mean_abs,f_err_mean_abs,n,n_damp\n";
    for (const PerModeStats& r : block.rows) {
        out << r.mode << ',' << r.mac_mean << ',' << r.mac_sd << ',' << r.mac_min << ','
            << r.damp_mean << ',' << r.damp_sd << ',' << r.damp_max_abs << ',' << r.freq_mean
            << ',' << r.freq_sd << ',' << r.freq_max_abs << ',' << r.mean_abs_damp << ','
            << r.mean_abs_freq << ',' << r.count << ',' << r.damp_count << '\n';
    }
    if (!out) throw Error("failed to write " + file.string());
}

void write_kfold_csv(const std::filesystem::path& file, const std::vector<VariantRow>& rows,
                     const RunManifest& manifest) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file);
    out << "# manifest: " << manifest.hash << "\n";
    out << "model,val_loss_mean,val_loss_sd,train_time_mean_s,train_time_sd_s\n";
    for (const VariantRow& r : rows) {
        out << r.name << ',' << r.kfold.loss_mean << ',' << r.kfold.loss_sd << ','
            << r.kfold.seconds_mean << ',' << r.kfold.seconds_sd << '\n';
    }
    if (!out) throw Error("failed to write " + file.string());
}

std::string stats_markdown(const StatsBlock& block) {
    std::ostringstream md;
    md << "### " << block.label << "\n\n";
    md << "| Mode | MAC mean | MAC SD | MAC min | Z err% mean | Z err% SD | Z err% max "
          "| F err% mean | F err% SD | F err% max |\n";
    md << "|---|---|---|---|---|---|---|---|---|---|\n";
    md.precision(4);
    for (const PerModeStats& r : block.rows) {
        md << "| " << r.mode << " | " << r.mac_mean << " | " << r.mac_sd << " | " << r.mac_min
           << " | " << r.damp_mean << " | " << r.damp_sd << " | " << r.damp_max_abs << " | "
           << r.freq_mean << " | " << r.freq_sd << " | " << r.freq_max_abs << " |\n";
    }
    md << "\n";
    return md.str();
}

std::string kfold_markdown(const std::string& title, const std::vector<VariantRow>& rows) {
    std::ostringstream md;
    md << "### " << title << "\n\n";
    md << "| Model | Val loss mean | Val loss SD | Train time mean (s) | Train time SD (s) |\n";
    md << "|---|---|---|---|---|\n";
    md.precision(4);
    for (const VariantRow& r : rows) {
        md << "| " << r.name << " | " << r.kfold.loss_mean << " | " << r.kfold.loss_sd << " | "
           << r.kfold.seconds_mean << " | " << r.kfold.seconds_sd << " |\n";
    }
    md << "\n";
    return md.str();
}

namespace {

void write_manifest_file(const std::filesystem::path& dir, const RunManifest& manifest) {
    std::ofstream out(dir / "manifest.json");
    out << json{{"hash", manifest.hash}, {"config", json::parse(manifest.config_json)}}.dump(2)
        << "\n";
}

void append_md(std::ostringstream& md, const StatsBlock& block) { md << stats_markdown(block); }

const PerModeStats& mode_row(const StatsBlock& block, int mode) {
    return block.rows.at(static_cast<std::size_t>(mode - 1));
}

}  // namespace

CheckOutcome run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                            bool check) {
    cfg.validate();
    std::filesystem::create_directories(out_dir);
    CheckOutcome outcome;
    outcome.checked = check;
    std::ostringstream md;
    md << "## Experiment: " << cfg.experiment << "\n\n";

    auto note = [&](bool ok, const std::string& what) {
        outcome.passed = outcome.passed && ok;
        outcome.notes.push_back(std::string(ok ? "pass: " : "FAIL: ") + what);
    };

    if (cfg.experiment == "variants_table") {
        const VariantsResult r = run_variants_table(cfg);
        write_kfold_csv(out_dir / "variants.csv", r.rows, r.manifest);
        md << kfold_markdown("GNN variant comparison", r.rows);
        write_manifest_file(out_dir, r.manifest);
        if (check) {
            const auto& gcn = r.rows[0].kfold;
            const auto& gat = r.rows[1].kfold;
            const auto& sage = r.rows[2].kfold;
            note(sage.loss_mean <= gcn.loss_mean && sage.loss_mean <= gat.loss_mean,
                 "GraphSAGE k-fold loss <= GCN and GAT");
            note(sage.seconds_mean <= gat.seconds_mean, "GraphSAGE training time <= GAT");
        }
    } else if (cfg.experiment == "ablation") {
        const AblationResult r = run_ablation(cfg);
        write_kfold_csv(out_dir / "ablation.csv", r.rows, r.manifest);
        md << kfold_markdown("Ablation study", r.rows);
        write_manifest_file(out_dir, r.manifest);
        if (check) {
            const auto& no_enc = r.rows[0].kfold;
            const auto& no_gnn = r.rows[1].kfold;
            const auto& original = r.rows[2].kfold;
            note(original.loss_mean <= no_enc.loss_mean && original.loss_mean <= no_gnn.loss_mean,
                 "original model k-fold loss <= both ablations");
        }
    } else if (cfg.experiment == "missing_features") {
        const MissingFeaturesResult r = run_missing_features(cfg);
        for (std::size_t i = 0; i < r.per_ratio.size(); ++i) {
            std::ostringstream name;
            name << "missing_" << cfg.missing_ratios[i] << ".csv";
            write_stats_csv(out_dir / name.str(), r.per_ratio[i], r.manifest);
            append_md(md, r.per_ratio[i]);
        }
        write_manifest_file(out_dir, r.manifest);
        if (check && r.per_ratio.size() >= 3) {
            const double m0 = mode_row(r.per_ratio[0], 1).mac_mean;
            const double m1 = mode_row(r.per_ratio[1], 1).mac_mean;
            const double m2 = mode_row(r.per_ratio[2], 1).mac_mean;
            note(m0 >= m1 && m1 >= m2, "mode-1 MAC decreases monotonically with missing ratio");
            note(m2 >= 0.9, "mode-1 MAC at the largest ratio >= 0.9");
            const double f0 = mode_row(r.per_ratio[0], 1).mean_abs_freq;
            const double f2 = mode_row(r.per_ratio[2], 1).mean_abs_freq;
            note(std::abs(f2 - f0) < 5.0, "mode-1 mean |F err| changes < 5 pp across ratios");
        }
    } else if (cfg.experiment == "noise") {
        const NoiseResult r = run_noise(cfg);
        write_stats_csv(out_dir / "noise_free.csv", r.clean, r.manifest);
        write_stats_csv(out_dir / "noisy.csv", r.noisy, r.manifest);
        append_md(md, r.clean);
        append_md(md, r.noisy);
        write_manifest_file(out_dir, r.manifest);
        if (check) {
            const double mac_clean = mode_row(r.clean, 1).mac_mean;
            const double mac_noisy = mode_row(r.noisy, 1).mac_mean;
            note(std::abs(mac_noisy - mac_clean) < 0.05, "mode-1 MAC shift under noise < 0.05");
            const double f_clean = mode_row(r.clean, 1).mean_abs_freq;
            const double f_noisy = mode_row(r.noisy, 1).mean_abs_freq;
            note(f_noisy - f_clean >= 3.0, "mode-1 mean |F err| grows >= 3 pp under noise");
        }
    } else if (cfg.experiment == "train_size") {
        const TrainSizeResult r = run_train_size(cfg);
        for (std::size_t i = 0; i < r.per_size.size(); ++i) {
            write_stats_csv(out_dir / (r.per_size[i].label + ".csv"), r.per_size[i], r.manifest);
            append_md(md, r.per_size[i]);
        }
        write_manifest_file(out_dir, r.manifest);
    } else if (cfg.experiment == "fdd_compare") {
        const FddCompareResult r = run_fdd_compare(cfg);
        write_stats_csv(out_dir / "gnn.csv", r.gnn, r.manifest);
        write_stats_csv(out_dir / "fdd.csv", r.fdd, r.manifest);
        {
            const std::size_t structures =
                r.gnn.rows.empty() ? 0 : static_cast<std::size_t>(r.gnn.rows.front().count);
            std::ofstream timing(out_dir / "timing.csv");
            timing << "# manifest: " << r.manifest.hash << "\n";
            timing << "method,seconds,structures,failures\n";
            timing << "gnn," << r.gnn_seconds << ',' << structures << ",0\n";
            timing << "fdd," << r.fdd_seconds << ',' << structures << ',' << r.fdd_failures
                   << "\n";
        }
        append_md(md, r.gnn);
        append_md(md, r.fdd);
        md << "GNN identification: " << r.gnn_seconds << " s; FDD identification: "
           << r.fdd_seconds << " s; FDD failures: " << r.fdd_failures << "\n\n";
        write_manifest_file(out_dir, r.manifest);
        if (check) {
            note(r.gnn_seconds * 10.0 <= r.fdd_seconds, "GNN at least 10x faster than FDD");
            const double two_df = 2.0 * cfg.welch.bin_width();
            bool freq_ok = true;
            for (int j = 0; j < std::min(3, cfg.sim.modes); ++j) {
                freq_ok = freq_ok &&
                          r.fdd_freq_max_err_hz[static_cast<std::size_t>(j)] <= two_df;
            }
            note(freq_ok && r.fdd_failures == 0, "FDD modes 1-3 within 2*df of FEM targets");
            note(mode_row(r.fdd, 1).mac_mean >= 0.999, "FDD mode-1 MAC mean >= 0.999");
        }
    } else if (cfg.experiment == "cross_population") {
        const CrossPopulationResult r = run_cross_population(cfg);
        write_stats_csv(out_dir / "own_population.csv", r.own, r.manifest);
        write_stats_csv(out_dir / "cantilevered.csv", r.cross, r.manifest);
        append_md(md, r.own);
        append_md(md, r.cross);
        write_manifest_file(out_dir, r.manifest);
        if (check) {
            note(mode_row(r.cross, 2).mac_mean >= 0.7, "cantilevered mode-2 MAC mean >= 0.7");
            note(mode_row(r.cross, 1).mac_mean < mode_row(r.own, 1).mac_mean,
                 "cross-population mode-1 MAC strictly below own-population");
        }
    } else {
        throw ConfigError("unknown experiment: " + cfg.experiment);
    }

    std::ofstream report(out_dir / "tables.md");
    report << md.str();
    return outcome;
}

void write_report(const std::vector<std::filesystem::path>& inputs,
                  const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::ostringstream md;
    md << "# Collected results\n\n";
    for (const auto& input : inputs) {
        if (!std::filesystem::exists(input)) throw ConfigError("missing input " + input.string());
        const auto tables = input / "tables.md";
        md << "<!-- from " << input.string() << " -->\n";
        if (std::filesystem::exists(tables)) {
            std::ifstream in(tables);
            md << in.rdbuf() << "\n";
        }
        const auto manifest = input / "manifest.json";
        if (std::filesystem::exists(manifest)) {
            std::ifstream in(manifest);
            const json j = json::parse(in);
            md << "manifest hash: `" << j.value("hash", "?") << "`\n\n";
        }
    }
    std::ofstream out(out_dir / "report.md");
    out << md.str();
    if (!out) throw Error("failed to write report");
}

}  // namespace oma
