#include "oma/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>

#include "json_io.hpp"
#include "oma/errors.hpp"
#include "oma/feature_propagation.hpp"
#include "oma/parallel.hpp"
#include "oma/rng.hpp"

namespace oma {

using nlohmann::json;

const char* to_string(Split s) { return s == Split::Train ? "train" : "test"; }

namespace io {

// ---------------------------------------------------------------------------
// JSON conversions
// ---------------------------------------------------------------------------

nlohmann::json to_json(const TrussStructure& t) {
    nlohmann::json j;
    j["nodes"] = t.nodes;
    j["edges"] = t.edges;
    j["youngs_modulus"] = t.youngs_modulus;
    j["area"] = t.area;
    j["density"] = t.density;
    nlohmann::json supports = nlohmann::json::array();
    for (const auto& s : t.supports) supports.push_back({s.fix_x ? 1 : 0, s.fix_y ? 1 : 0});
    j["supports"] = std::move(supports);
    j["excited_nodes"] = t.excited_nodes;
    j["bottom_nodes"] = t.bottom_nodes;
    j["left_nodes"] = t.left_nodes;
    j["triangles"] = t.triangles;
    return j;
}

TrussStructure truss_from_json(const nlohmann::json& j) {
    TrussStructure t;
    t.nodes = j.at("nodes").get<std::vector<std::array<double, 2>>>();
    t.edges = j.at("edges").get<std::vector<std::pair<int, int>>>();
    t.youngs_modulus = j.at("youngs_modulus").get<std::vector<double>>();
    t.area = j.at("area").get<std::vector<double>>();
    t.density = j.at("density").get<std::vector<double>>();
    for (const auto& s : j.at("supports")) {
        t.supports.push_back({s.at(0).get<int>() != 0, s.at(1).get<int>() != 0});
    }
    t.excited_nodes = j.at("excited_nodes").get<std::vector<int>>();
    t.bottom_nodes = j.at("bottom_nodes").get<std::vector<int>>();
    t.left_nodes = j.at("left_nodes").get<std::vector<int>>();
    t.triangles = j.at("triangles").get<std::vector<std::array<int, 3>>>();
    return t;
}

nlohmann::json to_json(const ModalSolution& m) {
    nlohmann::json shapes = nlohmann::json::array();
    for (std::size_t i = 0; i < m.shapes.rows(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < m.shapes.cols(); ++j) row.push_back(m.shapes(i, j));
        shapes.push_back(std::move(row));
    }
    return nlohmann::json{{"modes", m.modes},
                {"frequencies", m.frequencies},
                {"damping", m.damping_ratios},
                {"shapes", std::move(shapes)}};
}

ModalSolution modal_from_json(const nlohmann::json& j) {
    ModalSolution m;
    m.modes = j.at("modes").get<int>();
    m.frequencies = j.at("frequencies").get<std::vector<double>>();
    m.damping_ratios = j.at("damping").get<std::vector<double>>();
    const auto& shapes = j.at("shapes");
    const std::size_t rows = shapes.size();
    const std::size_t cols = rows > 0 ? shapes.at(0).size() : 0;
    m.shapes = Tensor(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t c = 0; c < cols; ++c) m.shapes(i, c) = shapes.at(i).at(c).get<double>();
    }
    return m;
}

nlohmann::json to_json(const PopulationConfig& c) {
    return nlohmann::json{{"count", c.count},
                {"node_count_range", c.node_count_range},
                {"bottom_span", c.boundary.bottom_span},
                {"height", c.boundary.height},
                {"top_ratio", c.boundary.top_ratio},
                {"youngs_range", c.youngs_range},
                {"kind", to_string(c.kind)},
                {"seed", c.seed}};
}

PopulationConfig population_from_json(const nlohmann::json& j) {
    PopulationConfig c;
    c.count = j.at("count").get<int>();
    c.node_count_range = j.at("node_count_range").get<std::pair<int, int>>();
    c.boundary.bottom_span = j.at("bottom_span").get<std::pair<double, double>>();
    c.boundary.height = j.at("height").get<std::pair<double, double>>();
    c.boundary.top_ratio = j.at("top_ratio").get<std::pair<double, double>>();
    c.youngs_range = j.at("youngs_range").get<std::pair<double, double>>();
    c.kind = support_kind_from_string(j.at("kind").get<std::string>());
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

nlohmann::json to_json(const WelchConfig& c) {
    return nlohmann::json{{"segment_length", c.segment_length},
                {"overlap", c.overlap},
                {"sample_rate", c.sample_rate}};
}

WelchConfig welch_from_json(const nlohmann::json& j) {
    WelchConfig c;
    c.segment_length = j.at("segment_length").get<int>();
    c.overlap = j.at("overlap").get<double>();
    c.sample_rate = j.at("sample_rate").get<double>();
    return c;
}

nlohmann::json to_json(const SimConfig& c) {
    return nlohmann::json{{"dt", c.dt},
                {"duration", c.duration},
                {"discard_seconds", c.discard_seconds},
                {"force_rms", c.force_rms},
                {"damping_anchor_range", c.damping_anchor_range},
                {"modes", c.modes}};
}

SimConfig sim_from_json(const nlohmann::json& j) {
    SimConfig c;
    c.dt = j.at("dt").get<double>();
    c.duration = j.at("duration").get<double>();
    c.discard_seconds = j.at("discard_seconds").get<double>();
    c.force_rms = j.at("force_rms").get<double>();
    c.damping_anchor_range = j.at("damping_anchor_range").get<std::pair<double, double>>();
    c.modes = j.at("modes").get<int>();
    return c;
}

const char* to_string(RawRetention r) {
    switch (r) {
        case RawRetention::None: return "none";
        case RawRetention::TestOnly: return "test_only";
        case RawRetention::All: return "all";
    }
    return "?";
}

RawRetention raw_from_string(const std::string& s) {
    if (s == "none") return RawRetention::None;
    if (s == "test_only") return RawRetention::TestOnly;
    if (s == "all") return RawRetention::All;
    throw ConfigError("unknown raw retention: " + s);
}

nlohmann::json to_json(const ModelConfig& c) {
    return nlohmann::json{{"variant", to_string(c.variant)},
                {"mp_layers", c.mp_layers},
                {"hidden_dim", c.hidden_dim},
                {"modes", c.modes},
                {"psd_dim", c.psd_dim},
                {"use_encoder", c.use_encoder},
                {"message_passing", c.message_passing}};
}

ModelConfig model_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.variant = gnn_variant_from_string(j.at("variant").get<std::string>());
    c.mp_layers = j.at("mp_layers").get<int>();
    c.hidden_dim = j.at("hidden_dim").get<int>();
    c.modes = j.at("modes").get<int>();
    c.psd_dim = j.at("psd_dim").get<int>();
    c.use_encoder = j.at("use_encoder").get<bool>();
    c.message_passing = j.at("message_passing").get<bool>();
    return c;
}

}  // namespace io


void SimConfig::validate() const {
    if (!(dt > 0.0) || !(duration > 0.0)) throw ConfigError("dt and duration must be positive");
    if (discard_seconds < 0.0 || discard_seconds >= duration) {
        throw ConfigError("discard must be in [0, duration)");
    }
    if (!(force_rms > 0.0)) throw ConfigError("force RMS must be positive");
    const auto [lo, hi] = damping_anchor_range;
    if (!(lo > 0.0) || lo > hi || hi >= 0.2) {
        throw ConfigError("damping anchor range must sit inside (0, 0.2)");
    }
    if (modes < 1) throw ConfigError("modes must be >= 1");
}

// ---------------------------------------------------------------------------
// little-endian binary helpers
// ---------------------------------------------------------------------------

namespace {

template <typename T>
void le_write(std::ostream& out, T value) {
    static_assert(sizeof(T) == 8);
    std::uint64_t bits;
    std::memcpy(&bits, &value, 8);
    if constexpr (std::endian::native == std::endian::big) {
        std::uint64_t swapped = 0;
        for (int i = 0; i < 8; ++i) swapped |= ((bits >> (8 * i)) & 0xffULL) << (8 * (7 - i));
        bits = swapped;
    }
    out.write(reinterpret_cast<const char*>(&bits), 8);
}

template <typename T>
T le_read(std::istream& in) {
    static_assert(sizeof(T) == 8);
    std::uint64_t bits = 0;
    in.read(reinterpret_cast<char*>(&bits), 8);
    if (!in) throw CorruptPayload("unexpected end of payload");
    if constexpr (std::endian::native == std::endian::big) {
        std::uint64_t swapped = 0;
        for (int i = 0; i < 8; ++i) swapped |= ((bits >> (8 * i)) & 0xffULL) << (8 * (7 - i));
        bits = swapped;
    }
    T value;
    std::memcpy(&value, &bits, 8);
    return value;
}

void write_matrix(std::ostream& out, const Tensor& t) {
    le_write<std::int64_t>(out, static_cast<std::int64_t>(t.rows()));
    le_write<std::int64_t>(out, static_cast<std::int64_t>(t.cols()));
    for (double v : t.buffer()) le_write<double>(out, v);
}

Tensor read_matrix(std::istream& in, const std::string& what) {
    const auto rows = le_read<std::int64_t>(in);
    const auto cols = le_read<std::int64_t>(in);
    if (rows < 0 || cols < 0 || rows * cols > (1LL << 32)) {
        throw CorruptPayload("implausible matrix header in " + what);
    }
    Tensor t(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
    for (auto& v : t.buffer()) v = le_read<double>(in);
    return t;
}

std::string record_filename(int index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "record_%05d.oma", index);
    return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// dataset construction
// ---------------------------------------------------------------------------

std::pair<DatasetManifest, std::vector<DatasetRecord>> build_dataset(
    const PopulationConfig& population, const WelchConfig& welch, const SimConfig& sim,
    RawRetention raw, double train_fraction) {
    population.validate();
    welch.validate();
    sim.validate();
    if (train_fraction <= 0.0 || train_fraction > 1.0) {
        throw ConfigError("train fraction must be in (0, 1]");
    }
    DatasetManifest manifest;
    manifest.seed = population.seed;
    manifest.population = population;
    manifest.welch = welch;
    manifest.sim = sim;
    manifest.raw = raw;
    manifest.count = population.count;
    manifest.train_count = static_cast<int>(std::lround(train_fraction * population.count));

    std::vector<DatasetRecord> records(static_cast<std::size_t>(population.count));
    parallel_for(static_cast<std::size_t>(population.count), [&](std::size_t i) {
        constexpr int kSaltLimit = 6;
        for (std::uint64_t salt = 0;; ++salt) {
            try {
                const TrussStructure structure =
                    generate_structure(population, static_cast<int>(i), salt);
                const std::uint64_t base =
                    derive_seed(derive_seed(population.seed, i), salt);
                RandomStream damp_rng(derive_seed(base, 101));
                const double zeta_lo = sim.damping_anchor_range.first;
                const double zeta_hi = sim.damping_anchor_range.second;
                const double zeta_a = damp_rng.uniform(zeta_lo, zeta_hi);
                const double zeta_b = damp_rng.uniform(zeta_lo, zeta_hi);
                DatasetRecord rec;
                rec.index = static_cast<int>(i);
                rec.split = static_cast<int>(i) < manifest.train_count ? Split::Train : Split::Test;
                rec.structure = structure;
                rec.targets = modal_targets(structure, sim.modes, zeta_a, zeta_b);

                auto [sys, dofs] = assemble(structure);
                const RayleighModel rayleigh = rayleigh_damping(
                    [&] {
                        const int solve_count = std::min<int>(
                            static_cast<int>(sys.stiffness.rows()), std::max(sim.modes, 4));
                        return solve_modes(sys.stiffness, sys.mass, solve_count).omega;
                    }(),
                    zeta_a, zeta_b, 0, 3);
                sys.damping = rayleigh.alpha * sys.mass + rayleigh.beta * sys.stiffness;

                RandomStream force_rng(derive_seed(base, 202));
                const Tensor forces =
                    white_noise_forces(static_cast<int>(structure.excited_nodes.size()), sim.dt,
                                       sim.duration, sim.force_rms, force_rng);
                TimeHistory history =
                    simulate_newmark(sys, dofs, structure, forces, sim.dt, sim.duration);
                rec.psd = compute_psd_set(history, welch, sim.discard_seconds);
                const bool keep_raw = raw == RawRetention::All ||
                                      (raw == RawRetention::TestOnly && rec.split == Split::Test);
                if (keep_raw) {
                    rec.has_raw = true;
                    rec.raw = std::move(history);
                }
                records[i] = std::move(rec);
                return;
            } catch (const SingularSystem&) {
                if (salt + 1 >= kSaltLimit) throw;
            } catch (const IllConditioned&) {
                if (salt + 1 >= kSaltLimit) throw;
            }
        }
    });
    return {std::move(manifest), std::move(records)};
}

// ---------------------------------------------------------------------------
// persistence
// ---------------------------------------------------------------------------

void save_dataset(const std::filesystem::path& dir, const DatasetManifest& manifest,
                  const std::vector<DatasetRecord>& records) {
    std::filesystem::create_directories(dir);
    json m{{"schema", manifest.schema},
           {"kind", "oma-dataset"},
           {"seed", manifest.seed},
           {"population", io::to_json(manifest.population)},
           {"welch", io::to_json(manifest.welch)},
           {"sim", io::to_json(manifest.sim)},
           {"raw", io::to_string(manifest.raw)},
           {"count", manifest.count},
           {"train_count", manifest.train_count}};
    std::ofstream mf(dir / "manifest.json");
    mf << m.dump(2) << "\n";
    if (!mf) throw Error("failed to write dataset manifest");

    for (const DatasetRecord& rec : records) {
        json header{{"schema", manifest.schema},
                    {"index", rec.index},
                    {"split", to_string(rec.split)},
                    {"structure", io::to_json(rec.structure)},
                    {"targets", io::to_json(rec.targets)},
                    {"psd_df", rec.psd.freq_axis.size() > 1 ? rec.psd.freq_axis[1] : 0.0},
                    {"normalized", rec.psd.normalized},
                    {"has_raw", rec.has_raw},
                    {"raw_dt", rec.raw.dt}};
        std::ofstream out(dir / record_filename(rec.index), std::ios::binary);
        out << header.dump() << "\n";
        write_matrix(out, rec.psd.values);
        if (rec.has_raw) write_matrix(out, rec.raw.channels);
        if (!out) throw Error("failed to write record " + std::to_string(rec.index));
    }
}

std::pair<DatasetManifest, std::vector<DatasetRecord>> load_dataset(
    const std::filesystem::path& dir) {
    std::ifstream mf(dir / "manifest.json");
    if (!mf) throw Error("cannot open dataset manifest in " + dir.string());
    json m = json::parse(mf);
    if (m.value("schema", -1) != 1 || m.value("kind", "") != "oma-dataset") {
        throw SchemaMismatch("unsupported dataset manifest schema");
    }
    DatasetManifest manifest;
    manifest.schema = 1;
    manifest.seed = m.at("seed").get<std::uint64_t>();
    manifest.population = io::population_from_json(m.at("population"));
    manifest.welch = io::welch_from_json(m.at("welch"));
    manifest.sim = io::sim_from_json(m.at("sim"));
    manifest.raw = io::raw_from_string(m.at("raw").get<std::string>());
    manifest.count = m.at("count").get<int>();
    manifest.train_count = m.at("train_count").get<int>();

    std::vector<DatasetRecord> records;
    records.reserve(static_cast<std::size_t>(manifest.count));
    for (int i = 0; i < manifest.count; ++i) {
        const auto path = dir / record_filename(i);
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error("missing record file " + path.string());
        std::string header_line;
        std::getline(in, header_line);
        json header = json::parse(header_line);
        if (header.value("schema", -1) != 1) {
            throw SchemaMismatch("unsupported record schema in " + path.string());
        }
        DatasetRecord rec;
        rec.index = header.at("index").get<int>();
        rec.split = header.at("split").get<std::string>() == "train" ? Split::Train : Split::Test;
        rec.structure = io::truss_from_json(header.at("structure"));
        rec.targets = io::modal_from_json(header.at("targets"));
        try {
            rec.psd.values = read_matrix(in, path.string());
            rec.has_raw = header.at("has_raw").get<bool>();
            if (rec.has_raw) {
                rec.raw.dt = header.at("raw_dt").get<double>();
                rec.raw.channels = read_matrix(in, path.string());
            }
        } catch (const CorruptPayload&) {
            throw CorruptPayload("truncated payload in " + path.string());
        }
        rec.psd.normalized = header.at("normalized").get<bool>();
        rec.psd.known.assign(rec.psd.values.rows(), true);
        const double df = header.at("psd_df").get<double>();
        rec.psd.freq_axis.resize(rec.psd.values.cols());
        for (std::size_t b = 0; b < rec.psd.freq_axis.size(); ++b) {
            rec.psd.freq_axis[b] = static_cast<double>(b) * df;
        }
        if (rec.psd.values.rows() != static_cast<std::size_t>(rec.structure.node_count())) {
            throw CorruptPayload("PSD row count does not match node count in " + path.string());
        }
        if (rec.targets.modes != manifest.sim.modes) {
            throw SchemaMismatch("target mode count differs from manifest");
        }
        rec.structure.validate();
        records.push_back(std::move(rec));
    }
    return {std::move(manifest), std::move(records)};
}

// ---------------------------------------------------------------------------
// model input assembly
// ---------------------------------------------------------------------------

std::vector<bool> missing_mask(const TrussStructure& structure, double ratio,
                               std::uint64_t seed) {
    const int n = structure.node_count();
    if (ratio < 0.0 || ratio >= 1.0) throw ConfigError("missing ratio must be in [0, 1)");
    const int target_masked = std::min(n - 1, static_cast<int>(std::floor(ratio * n)));
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    RandomStream rng(seed);
    rng.shuffle(order);
    std::vector<bool> known(static_cast<std::size_t>(n), true);
    for (int i = 0; i < target_masked; ++i) known[static_cast<std::size_t>(order[i])] = false;

    // every connected component keeps one known node
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
    for (const auto& [a, b] : structure.edges) {
        adj[static_cast<std::size_t>(a)].push_back(b);
        adj[static_cast<std::size_t>(b)].push_back(a);
    }
    std::vector<int> component(static_cast<std::size_t>(n), -1);
    int components = 0;
    for (int start = 0; start < n; ++start) {
        if (component[static_cast<std::size_t>(start)] >= 0) continue;
        std::vector<int> stack{start};
        component[static_cast<std::size_t>(start)] = components;
        while (!stack.empty()) {
            const int v = stack.back();
            stack.pop_back();
            for (int u : adj[static_cast<std::size_t>(v)]) {
                if (component[static_cast<std::size_t>(u)] < 0) {
                    component[static_cast<std::size_t>(u)] = components;
                    stack.push_back(u);
                }
            }
        }
        ++components;
    }
    std::vector<bool> has_known(static_cast<std::size_t>(components), false);
    for (int i = 0; i < n; ++i) {
        if (known[static_cast<std::size_t>(i)]) {
            has_known[static_cast<std::size_t>(component[static_cast<std::size_t>(i)])] = true;
        }
    }
    for (int c = 0; c < components; ++c) {
        if (has_known[static_cast<std::size_t>(c)]) continue;
        for (int i = 0; i < n; ++i) {
            if (component[static_cast<std::size_t>(i)] == c) {
                known[static_cast<std::size_t>(i)] = true;
                break;
            }
        }
    }
    return known;
}

GraphSample to_graph_sample(const DatasetRecord& record) {
    GraphSample sample;
    PsdSet psd = record.psd;
    psd.known.assign(psd.values.rows(), true);
    sample.features = normalize_psd_set(std::move(psd)).values;
    sample.edges = record.structure.edges;
    sample.targets = record.targets;
    return sample;
}

GraphSample to_masked_sample(const DatasetRecord& record, const std::vector<bool>& known) {
    PsdSet psd = record.psd;
    psd.known = known;
    psd = normalize_psd_set(std::move(psd));
    const FeaturePropagationResult fp = feature_propagation(
        record.structure.node_count(), record.structure.edges, psd.values, known);
    GraphSample sample;
    sample.features = fp.features;
    sample.edges = record.structure.edges;
    sample.targets = record.targets;
    return sample;
}

// ---------------------------------------------------------------------------
// checkpoints
// ---------------------------------------------------------------------------

void save_checkpoint(const std::filesystem::path& file, const OmaModel& model,
                     const CheckpointMeta& meta) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    json tensors = json::array();
    const ParamStore& params = model.params();
    for (std::size_t i = 0; i < params.size(); ++i) {
        tensors.push_back({{"name", params.name(i)},
                           {"rows", params.value(i).rows()},
                           {"cols", params.value(i).cols()}});
    }
    json header{{"schema", 1},
                {"kind", "oma-checkpoint"},
                {"model", io::to_json(model.config())},
                {"meta",
                 {{"init_seed", meta.init_seed},
                  {"train_seed", meta.train_seed},
                  {"epochs", meta.epochs},
                  {"final_train_loss", meta.final_train_loss},
                  {"final_validation_loss", meta.final_validation_loss},
                  {"train_seconds", meta.train_seconds}}},
                {"tensors", std::move(tensors)}};
    std::ofstream out(file, std::ios::binary);
    out << header.dump() << "\n";
    for (std::size_t i = 0; i < params.size(); ++i) {
        for (double v : params.value(i).buffer()) le_write<double>(out, v);
    }
    if (!out) throw Error("failed to write checkpoint " + file.string());
}

std::pair<OmaModel, CheckpointMeta> load_checkpoint(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error("cannot open checkpoint " + file.string());
    std::string header_line;
    std::getline(in, header_line);
    json header = json::parse(header_line);
    if (header.value("schema", -1) != 1 || header.value("kind", "") != "oma-checkpoint") {
        throw SchemaMismatch("unsupported checkpoint schema");
    }
    const ModelConfig cfg = io::model_from_json(header.at("model"));
    ParamStore params;
    for (const auto& t : header.at("tensors")) {
        const auto rows = t.at("rows").get<std::size_t>();
        const auto cols = t.at("cols").get<std::size_t>();
        Tensor tensor(rows, cols);
        for (auto& v : tensor.buffer()) v = le_read<double>(in);
        params.add(t.at("name").get<std::string>(), std::move(tensor));
    }
    CheckpointMeta meta;
    const json& jm = header.at("meta");
    meta.init_seed = jm.at("init_seed").get<std::uint64_t>();
    meta.train_seed = jm.at("train_seed").get<std::uint64_t>();
    meta.epochs = jm.at("epochs").get<int>();
    meta.final_train_loss = jm.at("final_train_loss").get<double>();
    meta.final_validation_loss = jm.at("final_validation_loss").get<double>();
    meta.train_seconds = jm.at("train_seconds").get<double>();
    return {OmaModel(cfg, std::move(params)), meta};
}

void save_loss_history(const std::filesystem::path& file,
                       const std::vector<LossTerms>& train_history,
                       const std::vector<LossTerms>& val_history) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file);
    out << "epoch,train_total,train_shape,train_freq,train_damp,"
           "val_total,val_shape,val_freq,val_damp\n";
    for (std::size_t e = 0; e < train_history.size(); ++e) {
        const LossTerms& t = train_history[e];
        out << e + 1 << ',' << t.total << ',' << t.shape << ',' << t.freq << ',' << t.damp;
        if (e < val_history.size()) {
            const LossTerms& v = val_history[e];
            out << ',' << v.total << ',' << v.shape << ',' << v.freq << ',' << v.damp;
        } else {
            out << ",,,,";
        }
        out << '\n';
    }
    if (!out) throw Error("failed to write loss history " + file.string());
}

}  // namespace oma
