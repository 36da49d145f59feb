#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "oma/dataset.hpp"
#include "oma/experiments.hpp"

// End-to-end exercise of the installed command-line surface. The binary path
// comes from the build system.
#ifndef OMA_CLI_PATH
#define OMA_CLI_PATH "oma"
#endif

namespace {

namespace fs = std::filesystem;

int run_cli(const std::string& args) {
    const std::string cmd = std::string(OMA_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name)
        : path(fs::temp_directory_path() / ("oma_cli_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

// small config so the pipeline completes in seconds
void write_tiny_config(const fs::path& file) {
    oma::ExperimentConfig cfg = oma::ExperimentConfig::desk_scale(5);
    cfg.experiment = "missing_features";
    cfg.population.count = 6;
    cfg.population.node_count_range = {8, 12};
    cfg.welch.segment_length = 256;
    cfg.sim.duration = 12.0;
    cfg.sim.discard_seconds = 2.0;
    cfg.model.psd_dim = cfg.welch.bin_count();
    cfg.model.hidden_dim = 16;
    cfg.train.epochs = 3;
    cfg.kfold_epochs = 1;
    cfg.folds = 2;
    cfg.train_sizes = {2, 4};
    cfg.size_batches = {2, 4};
    oma::save_experiment_config(file, cfg);
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("unknown flags and bad subcommands exit with the config code") {
    CHECK(run_cli("--definitely-not-a-flag") == 1);
    CHECK(run_cli("nonsense-subcommand") == 1);
    CHECK(run_cli("train --data /nonexistent --out /tmp/x.ckpt") == 2);
}

TEST_CASE("generate -> train -> identify pipeline") {
    TempDir dir("pipeline");
    const fs::path config = dir.path / "config.json";
    write_tiny_config(config);

    const std::string data_dir = (dir.path / "data").string();
    REQUIRE(run_cli("generate --config " + config.string() + " --out " + data_dir +
                    " --raw test") == 0);
    auto [manifest, records] = oma::load_dataset(data_dir);
    CHECK(records.size() == 6);

    const fs::path ckpt = dir.path / "model.ckpt";
    REQUIRE(run_cli("train --data " + data_dir + " --out " + ckpt.string() +
                    " --epochs 3 --batch 4 --seed 9") == 0);
    CHECK(fs::exists(ckpt));
    // loss-curve CSV sits next to the checkpoint with one row per epoch
    fs::path loss_csv = ckpt;
    loss_csv.replace_extension(".loss.csv");
    REQUIRE(fs::exists(loss_csv));
    std::ifstream in(loss_csv);
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 1 + 3);  // header + epochs

    const fs::path est = dir.path / "estimates";
    REQUIRE(run_cli("identify --data " + data_dir + " --checkpoint " + ckpt.string() +
                    " --out " + est.string()) == 0);
    CHECK(fs::exists(est.string() + ".csv"));
    CHECK(fs::exists(est.string() + ".json"));

    // masked identification runs the feature-propagation path
    CHECK(run_cli("identify --data " + data_dir + " --checkpoint " + ckpt.string() + " --out " +
                  (dir.path / "masked").string() + " --missing-ratio 0.5") == 0);

    // FDD on the test split (raw histories retained)
    CHECK(run_cli("fdd --data " + data_dir + " --out " + (dir.path / "fdd").string()) == 0);
}

TEST_CASE("experiment subcommand writes tables and a manifest") {
    TempDir dir("experiment");
    const fs::path config = dir.path / "config.json";
    write_tiny_config(config);
    const std::string out = (dir.path / "out").string();
    REQUIRE(run_cli("experiment missing_features --config " + config.string() + " --out " + out +
                    " --dataset-dir " + (dir.path / "cache").string()) == 0);
    CHECK(fs::exists(fs::path(out) / "manifest.json"));
    CHECK(fs::exists(fs::path(out) / "tables.md"));
    CHECK(fs::exists(fs::path(out) / "missing_0.csv"));

    const std::string report_out = (dir.path / "report").string();
    REQUIRE(run_cli("report --in " + out + " --out " + report_out) == 0);
    CHECK(fs::exists(fs::path(report_out) / "report.md"));
}

TEST_SUITE_END();
