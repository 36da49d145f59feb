#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "oma/fem.hpp"
#include "oma/graph_model.hpp"
#include "oma/spectral.hpp"
#include "oma/training.hpp"
#include "oma/truss.hpp"

namespace oma {

enum class Split { Train, Test };
const char* to_string(Split s);

enum class RawRetention { None, TestOnly, All };

struct SimConfig {
    double dt = 0.005;            // s
    double duration = 60.0;       // s
    double discard_seconds = 5.0; // transient dropped before Welch
    double force_rms = 1000.0;    // N per excited node
    std::pair<double, double> damping_anchor_range{0.005, 0.05};
    int modes = 4;

    void validate() const;
};

/// One simulated structure with its modal targets and PSD input. The PSD is
/// stored unnormalized; normalization happens at model-input time so masked
/// identification can rescale over known rows only.
struct DatasetRecord {
    int index = 0;
    Split split = Split::Train;
    TrussStructure structure;
    ModalSolution targets;
    PsdSet psd;
    bool has_raw = false;
    TimeHistory raw;
};

struct DatasetManifest {
    int schema = 1;
    std::uint64_t seed = 0;
    PopulationConfig population;
    WelchConfig welch;
    SimConfig sim;
    RawRetention raw = RawRetention::None;
    int count = 0;
    int train_count = 0;
};

/// Simulates a full population: mesh, modal targets (with per-structure
/// damping anchors), white-noise Newmark response, Welch PSDs. The first
/// train_fraction of the population is tagged Train, the rest Test.
std::pair<DatasetManifest, std::vector<DatasetRecord>> build_dataset(
    const PopulationConfig& population, const WelchConfig& welch, const SimConfig& sim,
    RawRetention raw = RawRetention::None, double train_fraction = 0.8);

void save_dataset(const std::filesystem::path& dir, const DatasetManifest& manifest,
                  const std::vector<DatasetRecord>& records);
std::pair<DatasetManifest, std::vector<DatasetRecord>> load_dataset(
    const std::filesystem::path& dir);

/// Seeded uniform choice of unknown nodes. At most N-1 nodes are masked and
/// every connected component keeps at least one known node.
std::vector<bool> missing_mask(const TrussStructure& structure, double ratio, std::uint64_t seed);

/// Normalized full-measurement model input.
GraphSample to_graph_sample(const DatasetRecord& record);

/// Masked input: unknown rows dropped, known rows normalized jointly, then
/// feature propagation fills the gaps.
GraphSample to_masked_sample(const DatasetRecord& record, const std::vector<bool>& known);

struct CheckpointMeta {
    std::uint64_t init_seed = 0;
    std::uint64_t train_seed = 0;
    int epochs = 0;
    double final_train_loss = 0.0;
    double final_validation_loss = 0.0;
    double train_seconds = 0.0;
};

void save_checkpoint(const std::filesystem::path& file, const OmaModel& model,
                     const CheckpointMeta& meta);
std::pair<OmaModel, CheckpointMeta> load_checkpoint(const std::filesystem::path& file);

/// Loss-curve CSV: epoch, train terms, validation terms.
void save_loss_history(const std::filesystem::path& file,
                       const std::vector<LossTerms>& train_history,
                       const std::vector<LossTerms>& val_history);

}  // namespace oma
