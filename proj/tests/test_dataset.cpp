#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "oma/dataset.hpp"
#include "oma/errors.hpp"
#include "oma/rng.hpp"

using namespace oma;

namespace {

// small, fast dataset: short records, low node counts, coarse spectra
struct TinySetup {
    PopulationConfig population;
    WelchConfig welch;
    SimConfig sim;

    TinySetup() {
        population.count = 6;
        population.node_count_range = {8, 14};
        population.seed = 404;
        welch.segment_length = 256;
        sim.duration = 12.0;
        sim.discard_seconds = 2.0;
    }
};

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& name)
        : path(std::filesystem::temp_directory_path() / ("oma_test_" + name)) {
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

bool records_equal(const DatasetRecord& a, const DatasetRecord& b) {
    return a.index == b.index && a.split == b.split && a.structure == b.structure &&
           a.targets == b.targets && a.psd.values == b.psd.values &&
           a.psd.freq_axis == b.psd.freq_axis && a.psd.known == b.psd.known &&
           a.psd.normalized == b.psd.normalized && a.has_raw == b.has_raw &&
           (!a.has_raw || (a.raw.dt == b.raw.dt && a.raw.channels == b.raw.channels));
}

}  // namespace

TEST_SUITE_BEGIN("dataset");

TEST_CASE("build_dataset: split tags, shapes, determinism") {
    const TinySetup setup;
    auto [manifest, records] = build_dataset(setup.population, setup.welch, setup.sim,
                                             RawRetention::TestOnly);
    REQUIRE(records.size() == 6);
    CHECK(manifest.train_count == 5);  // round(0.8 * 6)
    for (const auto& rec : records) {
        CHECK((rec.index < manifest.train_count) == (rec.split == Split::Train));
        CHECK(rec.psd.values.rows() == static_cast<std::size_t>(rec.structure.node_count()));
        CHECK(rec.psd.values.cols() == static_cast<std::size_t>(setup.welch.bin_count()));
        CHECK(rec.targets.modes == setup.sim.modes);
        CHECK(rec.has_raw == (rec.split == Split::Test));
    }
    auto [manifest2, records2] = build_dataset(setup.population, setup.welch, setup.sim,
                                               RawRetention::TestOnly);
    for (std::size_t i = 0; i < records.size(); ++i) {
        CHECK(records_equal(records[i], records2[i]));
    }
    CHECK(manifest.seed == setup.population.seed);  // seed echo
}

TEST_CASE("dataset round-trips losslessly through persistence") {
    const TinySetup setup;
    auto [manifest, records] = build_dataset(setup.population, setup.welch, setup.sim,
                                             RawRetention::TestOnly);
    TempDir dir("roundtrip");
    save_dataset(dir.path, manifest, records);
    auto [loaded_manifest, loaded] = load_dataset(dir.path);
    REQUIRE(loaded.size() == records.size());
    CHECK(loaded_manifest.seed == manifest.seed);
    CHECK(loaded_manifest.train_count == manifest.train_count);
    for (std::size_t i = 0; i < records.size(); ++i) {
        CAPTURE(i);
        CHECK(records_equal(records[i], loaded[i]));
    }
}

TEST_CASE("truncated payload raises CorruptPayload naming the record") {
    const TinySetup setup;
    auto [manifest, records] = build_dataset(setup.population, setup.welch, setup.sim);
    TempDir dir("truncated");
    save_dataset(dir.path, manifest, records);
    const auto victim = dir.path / "record_00002.oma";
    const auto size = std::filesystem::file_size(victim);
    std::filesystem::resize_file(victim, size / 2);
    try {
        load_dataset(dir.path);
        FAIL("expected CorruptPayload");
    } catch (const CorruptPayload& e) {
        CHECK(std::string(e.what()).find("record_00002") != std::string::npos);
    }
}

TEST_CASE("manifest schema is enforced") {
    const TinySetup setup;
    auto [manifest, records] = build_dataset(setup.population, setup.welch, setup.sim);
    TempDir dir("schema");
    save_dataset(dir.path, manifest, records);
    std::ofstream bad(dir.path / "manifest.json");
    bad << R"({"schema": 99, "kind": "oma-dataset"})";
    bad.close();
    CHECK_THROWS_AS(load_dataset(dir.path), SchemaMismatch);
}

TEST_CASE("missing masks: ratio zero, coverage bound, component anchors, determinism") {
    const TinySetup setup;
    const TrussStructure truss = generate_structure(setup.population, 0);
    const int n = truss.node_count();

    const auto none = missing_mask(truss, 0.0, 1);
    CHECK(std::count(none.begin(), none.end(), true) == n);

    const auto heavy = missing_mask(truss, 0.82, 2);
    const auto known = std::count(heavy.begin(), heavy.end(), true);
    CHECK(known >= 1);
    CHECK(known == n - std::min(n - 1, static_cast<int>(std::floor(0.82 * n))));

    CHECK(missing_mask(truss, 0.5, 33) == missing_mask(truss, 0.5, 33));
    CHECK(missing_mask(truss, 0.5, 33) != missing_mask(truss, 0.5, 34));
}

TEST_CASE("masked sample with an all-known mask equals the plain sample") {
    const TinySetup setup;
    auto [manifest, records] = build_dataset(setup.population, setup.welch, setup.sim);
    const DatasetRecord& rec = records.front();
    const GraphSample plain = to_graph_sample(rec);
    const GraphSample masked = to_masked_sample(rec, missing_mask(rec.structure, 0.0, 5));
    CHECK(plain.features == masked.features);  // bitwise

    const auto mask = missing_mask(rec.structure, 0.6, 5);
    const GraphSample sparse = to_masked_sample(rec, mask);
    for (int i = 0; i < rec.structure.node_count(); ++i) {
        if (!mask[static_cast<std::size_t>(i)]) continue;
        // known rows preserved exactly (up to the shared normalization factor)
        double peak = 0.0;
        for (std::size_t c = 0; c < sparse.features.cols(); ++c) {
            peak = std::max(peak, sparse.features(static_cast<std::size_t>(i), c));
        }
        CHECK(peak <= 1.0 + 1e-12);
    }
}

TEST_CASE("checkpoints reload to bitwise-identical forward outputs") {
    ModelConfig cfg;
    cfg.hidden_dim = 8;
    cfg.psd_dim = 12;
    cfg.modes = 2;
    OmaModel model(cfg, 4242);

    TempDir dir("ckpt");
    CheckpointMeta meta;
    meta.init_seed = 4242;
    meta.epochs = 17;
    save_checkpoint(dir.path / "model.ckpt", model, meta);
    auto [loaded, loaded_meta] = load_checkpoint(dir.path / "model.ckpt");
    CHECK(loaded_meta.epochs == 17);
    CHECK(loaded_meta.init_seed == 4242);

    RandomStream rng(5);
    GraphSample s;
    s.features = Tensor(5, 12);
    for (auto& v : s.features.buffer()) v = rng.uniform(0.0, 1.0);
    s.edges = {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {0, 2}};
    s.targets.modes = 2;
    s.targets.frequencies = {4.0, 9.0};
    s.targets.damping_ratios = {0.02, 0.01};
    s.targets.shapes = Tensor::constant(5, 2, 0.5);

    const ModalEstimate a = model.infer_single(s);
    const ModalEstimate b = loaded.infer_single(s);
    CHECK(a.frequencies == b.frequencies);  // bitwise
    CHECK(a.damping == b.damping);
    CHECK(a.shapes == b.shapes);
}

TEST_SUITE_END();
