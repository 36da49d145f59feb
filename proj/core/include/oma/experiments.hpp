#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "oma/dataset.hpp"
#include "oma/evaluation.hpp"
#include "oma/fdd.hpp"
#include "oma/training.hpp"

namespace oma {

/// Full description of one experiment run. Desk scale keeps every mechanism
/// of the study at a fraction of the compute; paper scale restores the
/// original population and epoch budget.
struct ExperimentConfig {
    std::string experiment;  // variants_table | ablation | missing_features | noise
                             // | train_size | fdd_compare | cross_population
    PopulationConfig population;        // simply supported
    PopulationConfig population2;       // cantilevered, for cross_population
    WelchConfig welch;
    SimConfig sim;
    ModelConfig model;
    TrainConfig train;
    int folds = 5;
    int kfold_epochs = 250;  // epoch budget of the k-fold comparison tables
    std::vector<double> missing_ratios{0.0, 0.66, 0.82};
    double noise_level = 0.10;
    std::vector<int> train_sizes;
    std::vector<int> size_batches;
    std::uint64_t seed = 1;
    std::filesystem::path dataset_dir;  // optional on-disk cache
    std::filesystem::path checkpoint;   // optional pre-trained model

    static ExperimentConfig desk_scale(std::uint64_t seed = 1);
    static ExperimentConfig paper_scale(std::uint64_t seed = 1);
    void validate() const;
};

ExperimentConfig load_experiment_config(const std::filesystem::path& file);
void save_experiment_config(const std::filesystem::path& file, const ExperimentConfig& cfg);

/// Provenance record: the canonical config JSON and its FNV-1a hash. Every
/// emitted table carries the hash.
struct RunManifest {
    std::string hash;
    std::string config_json;
};
RunManifest make_manifest(const ExperimentConfig& cfg);

struct VariantRow {
    std::string name;
    KfoldResult kfold;
};
struct VariantsResult {
    std::vector<VariantRow> rows;  // GCN, GAT, GraphSAGE
    RunManifest manifest;
};
VariantsResult run_variants_table(const ExperimentConfig& cfg);

struct AblationResult {
    std::vector<VariantRow> rows;  // no_encoder, no_gnn, original
    RunManifest manifest;
};
AblationResult run_ablation(const ExperimentConfig& cfg);

struct StatsBlock {
    std::string label;
    std::vector<PerModeStats> rows;
};

struct MissingFeaturesResult {
    std::vector<StatsBlock> per_ratio;
    RunManifest manifest;
};
MissingFeaturesResult run_missing_features(const ExperimentConfig& cfg);

struct NoiseResult {
    StatsBlock clean;
    StatsBlock noisy;
    RunManifest manifest;
};
NoiseResult run_noise(const ExperimentConfig& cfg);

struct TrainSizeResult {
    std::vector<StatsBlock> per_size;
    RunManifest manifest;
};
TrainSizeResult run_train_size(const ExperimentConfig& cfg);

struct FddCompareResult {
    StatsBlock gnn;
    StatsBlock fdd;
    double gnn_seconds = 0.0;
    double fdd_seconds = 0.0;
    int fdd_failures = 0;                      // structures with too few peaks
    std::vector<double> fdd_freq_max_err_hz;   // per mode, over successful structures
    RunManifest manifest;
};
FddCompareResult run_fdd_compare(const ExperimentConfig& cfg);

struct CrossPopulationResult {
    StatsBlock own;    // test split of the training population
    StatsBlock cross;  // cantilevered population
    RunManifest manifest;
};
CrossPopulationResult run_cross_population(const ExperimentConfig& cfg);

// ---- shared pipeline pieces ----

struct PreparedData {
    DatasetManifest manifest;
    std::vector<DatasetRecord> records;
    std::vector<GraphSample> train_samples;
    std::vector<GraphSample> test_samples;
    std::vector<const DatasetRecord*> test_records;
};

/// Builds (or loads from cfg.dataset_dir) the simply-supported dataset.
PreparedData prepare_data(const ExperimentConfig& cfg, RawRetention raw);

/// Loads cfg.checkpoint when given, otherwise trains a fresh model on the
/// train split with cfg.train.
OmaModel obtain_model(const ExperimentConfig& cfg, const PreparedData& data,
                      CheckpointMeta* meta_out = nullptr);

// ---- table emission ----

void write_stats_csv(const std::filesystem::path& file, const StatsBlock& block,
                     const RunManifest& manifest);
void write_kfold_csv(const std::filesystem::path& file, const std::vector<VariantRow>& rows,
                     const RunManifest& manifest);
std::string stats_markdown(const StatsBlock& block);
std::string kfold_markdown(const std::string& title, const std::vector<VariantRow>& rows);

struct CheckOutcome {
    bool checked = false;
    bool passed = true;
    std::vector<std::string> notes;
};

/// Runs the named experiment end to end, writes its tables (CSV + Markdown +
/// manifest.json) under out_dir, and evaluates the corresponding acceptance
/// thresholds when check is set.
CheckOutcome run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                            bool check);

/// Merges table files from previous runs into a single Markdown report.
void write_report(const std::vector<std::filesystem::path>& inputs,
                  const std::filesystem::path& out_dir);

}  // namespace oma
