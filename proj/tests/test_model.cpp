#include <doctest.h>

#include <cmath>
#include <numeric>

#include "oma/errors.hpp"
#include "oma/graph_model.hpp"
#include "oma/rng.hpp"
#include "oma/training.hpp"

using namespace oma;

namespace {

// synthetic sample: random PSD-like rows (max-normalized), path-plus-chords
// graph, plausible modal targets
GraphSample synthetic_sample(std::uint64_t seed, int nodes, int psd_dim, int modes) {
    RandomStream rng(seed);
    GraphSample s;
    s.features = Tensor(static_cast<std::size_t>(nodes), static_cast<std::size_t>(psd_dim));
    double peak = 0.0;
    for (auto& v : s.features.buffer()) {
        v = std::abs(rng.normal()) * 0.05;
        peak = std::max(peak, v);
    }
    for (auto& v : s.features.buffer()) v /= peak;
    for (int i = 0; i + 1 < nodes; ++i) s.edges.emplace_back(i, i + 1);
    for (int i = 0; i + 2 < nodes; i += 2) s.edges.emplace_back(i, i + 2);
    s.targets.modes = modes;
    s.targets.frequencies.resize(modes);
    s.targets.damping_ratios.resize(modes);
    for (int j = 0; j < modes; ++j) {
        s.targets.frequencies[j] = 5.0 * (j + 1) + rng.uniform(0.0, 2.0);
        s.targets.damping_ratios[j] = rng.uniform(0.01, 0.05);
    }
    s.targets.shapes = Tensor(static_cast<std::size_t>(nodes), static_cast<std::size_t>(modes));
    for (int j = 0; j < modes; ++j) {
        double column_peak = 0.0;
        for (int i = 0; i < nodes; ++i) {
            const double v = std::abs(std::sin((j + 1) * 3.14159 * (i + 1.0) / (nodes + 1.0)));
            s.targets.shapes(i, j) = v;
            column_peak = std::max(column_peak, v);
        }
        for (int i = 0; i < nodes; ++i) s.targets.shapes(i, j) /= column_peak;
    }
    return s;
}

GraphSample permuted_sample(const GraphSample& s, const std::vector<int>& perm) {
    GraphSample p;
    const int n = static_cast<int>(s.features.rows());
    p.features = Tensor(s.features.rows(), s.features.cols());
    p.targets = s.targets;
    p.targets.shapes = Tensor(s.targets.shapes.rows(), s.targets.shapes.cols());
    for (int i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < s.features.cols(); ++c) {
            p.features(perm[i], c) = s.features(i, c);
        }
        for (std::size_t j = 0; j < s.targets.shapes.cols(); ++j) {
            p.targets.shapes(perm[i], j) = s.targets.shapes(i, j);
        }
    }
    for (const auto& [a, b] : s.edges) p.edges.emplace_back(perm[a], perm[b]);
    return p;
}

ModelConfig tiny_config(GnnVariant v = GnnVariant::GraphSAGE) {
    ModelConfig cfg;
    cfg.variant = v;
    cfg.hidden_dim = 8;
    cfg.psd_dim = 16;
    cfg.modes = 2;
    return cfg;
}

}  // namespace

TEST_SUITE_BEGIN("model");

TEST_CASE("encode: shared weights give identical rows for identical inputs") {
    const ModelConfig cfg = tiny_config();
    OmaModel model(cfg, 5);
    GraphSample s = synthetic_sample(1, 4, cfg.psd_dim, cfg.modes);
    // make rows 0 and 2 identical
    for (std::size_t c = 0; c < s.features.cols(); ++c) s.features(2, c) = s.features(0, c);
    const GraphBatch batch = GraphBatch::single(s);
    Tape tape;
    const ParamNodes nodes = attach_params(tape, model.params());
    const int h1 = model.encode(tape, nodes, tape.leaf(batch.features));
    const Tensor& h = tape.value(h1);
    for (std::size_t c = 0; c < h.cols(); ++c) CHECK(h(0, c) == h(2, c));
}

TEST_CASE("message passing: empty edge set leaves only the self path (GraphSAGE)") {
    ModelConfig cfg = tiny_config();
    cfg.use_encoder = false;
    cfg.psd_dim = cfg.hidden_dim;
    OmaModel with_nbr(cfg, 7);
    GraphSample s = synthetic_sample(2, 5, cfg.psd_dim, cfg.modes);
    s.edges.clear();
    const GraphBatch batch = GraphBatch::single(s);

    // recompute with the neighbor weights zeroed: identical output expected
    OmaModel zeroed(cfg, 7);
    for (int l = 0; l < cfg.mp_layers; ++l) {
        zeroed.params().at("mp" + std::to_string(l) + ".Wnbr").fill(0.0);
    }
    auto h3_of = [&](const OmaModel& m) {
        Tape tape;
        const ParamNodes nodes = attach_params(tape, m.params());
        const int h1 = m.encode(tape, nodes, tape.leaf(batch.features));
        return tape.value(m.message_pass(tape, nodes, batch, h1));
    };
    CHECK(h3_of(with_nbr) == h3_of(zeroed));
}

TEST_CASE("message passing: two-node path with hand-set weights (GraphSAGE)") {
    ModelConfig cfg;
    cfg.variant = GnnVariant::GraphSAGE;
    cfg.mp_layers = 1;
    cfg.hidden_dim = 2;
    cfg.psd_dim = 2;
    cfg.modes = 1;
    cfg.use_encoder = false;

    ParamStore params;
    params.add("mp0.Wself", Tensor::from_rows({{1.0, 0.0}, {0.0, 2.0}}));
    params.add("mp0.Wnbr", Tensor::from_rows({{0.5, 0.5}, {-1.0, 1.0}}));
    params.add("mp0.b", Tensor::from_rows({{0.1, -0.2}}));
    // decoder heads unused here but required by the constructor contract
    OmaModel model(cfg, std::move(params));

    GraphSample s;
    s.features = Tensor::from_rows({{1.0, 2.0}, {3.0, -1.0}});
    s.edges = {{0, 1}};
    s.targets.modes = 1;
    s.targets.frequencies = {1.0};
    s.targets.damping_ratios = {0.02};
    s.targets.shapes = Tensor::from_rows({{1.0}, {0.5}});
    const GraphBatch batch = GraphBatch::single(s);

    Tape tape;
    const ParamNodes nodes = attach_params(tape, model.params());
    const int h3 = model.message_pass(tape, nodes, batch, tape.leaf(batch.features));
    const Tensor& h = tape.value(h3);
    // rows multiply from the left: h' = ReLU(x Wself + mean_nbr Wnbr + b)
    // node 0: x0 Wself = [1, 4]; x1 Wnbr = [3*0.5 + 1, 3*0.5 - 1] = [2.5, 0.5]
    //   + b = [3.6, 4.3] -> ReLU same
    CHECK(h(0, 0) == doctest::Approx(3.6));
    CHECK(h(0, 1) == doctest::Approx(4.3));
    // node 1: x1 Wself = [3, -2]; x0 Wnbr = [0.5 - 2, 0.5 + 2] = [-1.5, 2.5]
    //   + b = [1.6, 0.3] -> ReLU same
    CHECK(h(1, 0) == doctest::Approx(1.6));
    CHECK(h(1, 1) == doctest::Approx(0.3));
}

TEST_CASE("readout: single-node graph passes through; batch means are independent") {
    const ModelConfig cfg = tiny_config();
    OmaModel model(cfg, 3);
    const GraphSample one = synthetic_sample(3, 1, cfg.psd_dim, cfg.modes);
    const GraphSample other = synthetic_sample(4, 6, cfg.psd_dim, cfg.modes);

    Tape tape;
    const ParamNodes nodes = attach_params(tape, model.params());
    const GraphBatch batch = GraphBatch::from_samples({&one, &other});
    const auto fwd = model.build_forward(tape, nodes, batch);
    const Tensor& h3 = tape.value(fwd.node_final);
    const Tensor& h2 = tape.value(fwd.graph_encoding);
    for (std::size_t c = 0; c < h2.cols(); ++c) {
        CHECK(h2(0, c) == h3(0, c));  // single-node graph: mean = the node itself
    }

    // no leakage: graph 1 readout equals its single evaluation
    Tape solo_tape;
    const ParamNodes solo_nodes = attach_params(solo_tape, model.params());
    const auto solo = model.build_forward(solo_tape, solo_nodes, GraphBatch::single(other));
    const Tensor& solo_h2 = solo_tape.value(solo.graph_encoding);
    for (std::size_t c = 0; c < h2.cols(); ++c) CHECK(h2(1, c) == solo_h2(0, c));
}

TEST_CASE("forward: estimate invariants and copy consistency") {
    const ModelConfig cfg = tiny_config();
    OmaModel model(cfg, 17);
    const GraphSample s = synthetic_sample(6, 7, cfg.psd_dim, cfg.modes);
    const std::vector<const GraphSample*> copies{&s, &s, &s};
    const auto estimates = model.infer(GraphBatch::from_samples(copies));
    REQUIRE(estimates.size() == 3);
    for (const auto& est : estimates) {
        for (int j = 0; j < cfg.modes; ++j) {
            CHECK(est.frequencies[j] > 0.0);
            CHECK(est.damping[j] > 0.0);
        }
        for (double v : est.shapes.buffer()) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        CHECK(est.frequencies == estimates[0].frequencies);
        CHECK(est.shapes == estimates[0].shapes);
    }
}

TEST_CASE("batch-vs-single: bitwise identical estimates inside any batch") {
    for (GnnVariant v : {GnnVariant::GraphSAGE, GnnVariant::GCN, GnnVariant::GAT}) {
        const ModelConfig cfg = tiny_config(v);
        OmaModel model(cfg, 29);
        const GraphSample a = synthetic_sample(8, 4, cfg.psd_dim, cfg.modes);
        const GraphSample b = synthetic_sample(9, 7, cfg.psd_dim, cfg.modes);
        const GraphSample c = synthetic_sample(10, 5, cfg.psd_dim, cfg.modes);
        const auto batch_est = model.infer(GraphBatch::from_samples({&a, &b, &c}));
        const GraphSample* singles[] = {&a, &b, &c};
        for (int g = 0; g < 3; ++g) {
            const ModalEstimate solo = model.infer_single(*singles[g]);
            CHECK(batch_est[g].frequencies == solo.frequencies);  // bitwise
            CHECK(batch_est[g].damping == solo.damping);
            CHECK(batch_est[g].shapes == solo.shapes);
        }
    }
}

TEST_CASE("permutation: shapes equivariant, frequencies and damping invariant") {
    for (GnnVariant v : {GnnVariant::GraphSAGE, GnnVariant::GCN, GnnVariant::GAT}) {
        CAPTURE(to_string(v));
        const ModelConfig cfg = tiny_config(v);
        OmaModel model(cfg, 31);
        const GraphSample s = synthetic_sample(11, 7, cfg.psd_dim, cfg.modes);
        std::vector<int> perm(7);
        std::iota(perm.begin(), perm.end(), 0);
        RandomStream rng(8);
        rng.shuffle(perm);
        const GraphSample p = permuted_sample(s, perm);

        const ModalEstimate base = model.infer_single(s);
        const ModalEstimate moved = model.infer_single(p);
        for (int j = 0; j < cfg.modes; ++j) {
            CHECK(moved.frequencies[j] == doctest::Approx(base.frequencies[j]).epsilon(1e-9));
            CHECK(moved.damping[j] == doctest::Approx(base.damping[j]).epsilon(1e-9));
        }
        for (int i = 0; i < 7; ++i) {
            for (int j = 0; j < cfg.modes; ++j) {
                CHECK(moved.shapes(perm[i], j) ==
                      doctest::Approx(base.shapes(i, j)).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("loss: zero at exact agreement, hand value 0.52, positive scaling") {
    // N = 1, k = 1 instance from the loss definition
    GraphSample s;
    s.features = Tensor::from_rows({{0.5, 0.5}});
    s.edges = {};
    s.targets.modes = 1;
    s.targets.frequencies = {10.0};
    s.targets.damping_ratios = {0.02};
    s.targets.shapes = Tensor::from_rows({{1.0}});

    auto loss_for = [&](double shape_hat, double freq_ratio, double damp_ratio,
                        LossWeights weights) {
        Tape tape;
        OmaModel::ForwardNodes fwd;
        fwd.freq = tape.leaf(Tensor::from_rows({{freq_ratio * s.targets.frequencies[0]}}));
        fwd.damp = tape.leaf(Tensor::from_rows({{damp_ratio * s.targets.damping_ratios[0]}}));
        fwd.shape = tape.leaf(Tensor::from_rows({{shape_hat}}));
        const GraphBatch batch = GraphBatch::single(s);
        const LossNodes loss = build_loss(tape, fwd, batch, {&s.targets}, weights);
        return tape.scalar(loss.total);
    };

    CHECK(loss_for(1.0, 1.0, 1.0, {2.0, 1.0, 1.0}) == doctest::Approx(0.0));
    // |phi_hat| = 0.5 vs 1.0, F ratio 1.1, Z ratio 0.9, lambdas (2,1,1):
    // 2*0.25 + 0.01 + 0.01 = 0.52
    CHECK(loss_for(0.5, 1.1, 0.9, {2.0, 1.0, 1.0}) == doctest::Approx(0.52).epsilon(1e-12));
    const double base = loss_for(0.5, 1.1, 0.9, {2.0, 1.0, 1.0});
    const double scaled = loss_for(0.5, 1.1, 0.9, {6.0, 3.0, 3.0});
    CHECK(scaled == doctest::Approx(3.0 * base).epsilon(1e-12));

    SUBCASE("zero targets are rejected") {
        GraphSample bad = s;
        bad.targets.frequencies = {0.0};
        Tape tape;
        OmaModel::ForwardNodes fwd;
        fwd.freq = tape.leaf(Tensor::from_rows({{1.0}}));
        fwd.damp = tape.leaf(Tensor::from_rows({{0.02}}));
        fwd.shape = tape.leaf(Tensor::from_rows({{0.5}}));
        const GraphBatch batch = GraphBatch::single(bad);
        CHECK_THROWS_AS(build_loss(tape, fwd, batch, {&bad.targets}, LossWeights{}),
                        ZeroTarget);
    }
}

TEST_CASE("full-model gradient matches central finite differences") {
    for (GnnVariant v : {GnnVariant::GraphSAGE, GnnVariant::GCN, GnnVariant::GAT}) {
        CAPTURE(to_string(v));
        const ModelConfig cfg = tiny_config(v);
        OmaModel model(cfg, 41);
        const GraphSample s = synthetic_sample(12, 5, cfg.psd_dim, cfg.modes);
        const GraphBatch batch = GraphBatch::single(s);
        RandomStream rng(42);
        const double err = grad_check(
            [&](Tape& tape, const ParamNodes& nodes) {
                const auto fwd = model.build_forward(tape, nodes, batch);
                return build_loss(tape, fwd, batch, {&s.targets}, LossWeights{}).total;
            },
            model.params(), 80, rng);
        CHECK(err < 1e-4);
    }
}

TEST_CASE("training: singleton overfit, history length, determinism") {
    ModelConfig cfg = tiny_config();
    cfg.hidden_dim = 32;
    const GraphSample s = synthetic_sample(13, 6, cfg.psd_dim, cfg.modes);
    const std::vector<GraphSample> dataset{s};

    TrainConfig tcfg;
    tcfg.epochs = 200;
    tcfg.batch_size = 64;
    tcfg.seed = 7;

    OmaModel model(cfg, 77);
    const TrainResult result = train(model, dataset, nullptr, tcfg);
    REQUIRE(result.train_history.size() == 200);
    for (const LossTerms& t : result.train_history) CHECK(std::isfinite(t.total));
    CHECK(result.train_history.back().total <= result.train_history.front().total / 100.0);

    SUBCASE("same seed twice gives an identical trajectory") {
        OmaModel m1(cfg, 78), m2(cfg, 78);
        const TrainResult r1 = train(m1, dataset, nullptr, tcfg);
        const TrainResult r2 = train(m2, dataset, nullptr, tcfg);
        for (std::size_t e = 0; e < r1.train_history.size(); ++e) {
            CHECK(r1.train_history[e].total == r2.train_history[e].total);  // bitwise
        }
        for (std::size_t i = 0; i < m1.params().size(); ++i) {
            CHECK(m1.params().value(i) == m2.params().value(i));
        }
    }
    SUBCASE("empty dataset is rejected") {
        OmaModel m(cfg, 79);
        const std::vector<GraphSample> empty;
        CHECK_THROWS_AS(train(m, empty, nullptr, tcfg), EmptyDataset);
    }
}

TEST_CASE("kfold: split arithmetic and mean identity") {
    ModelConfig cfg = tiny_config();
    cfg.hidden_dim = 4;
    cfg.psd_dim = 6;
    TrainConfig tcfg;
    tcfg.epochs = 1;
    tcfg.batch_size = 64;
    tcfg.seed = 3;

    SUBCASE("400 records in 5 folds split 320/80") {
        std::vector<GraphSample> dataset;
        for (int i = 0; i < 400; ++i) {
            dataset.push_back(synthetic_sample(1000 + i, 3, cfg.psd_dim, cfg.modes));
        }
        const KfoldResult r = kfold_cv(cfg, dataset, 5, tcfg);
        REQUIRE(r.fold_ranges.size() == 5);
        for (int f = 0; f < 5; ++f) {
            CHECK(r.fold_ranges[f].second - r.fold_ranges[f].first == 80);
        }
        double mean = 0.0;
        for (double l : r.fold_losses) mean += l;
        mean /= 5.0;
        CHECK(r.loss_mean == doctest::Approx(mean).epsilon(1e-12));
    }
    SUBCASE("2 folds on 4 records split 2/2") {
        std::vector<GraphSample> dataset;
        for (int i = 0; i < 4; ++i) {
            dataset.push_back(synthetic_sample(2000 + i, 3, cfg.psd_dim, cfg.modes));
        }
        const KfoldResult r = kfold_cv(cfg, dataset, 2, tcfg);
        REQUIRE(r.fold_ranges.size() == 2);
        CHECK(r.fold_ranges[0] == std::pair{0, 2});
        CHECK(r.fold_ranges[1] == std::pair{2, 4});
    }
    SUBCASE("too few records") {
        std::vector<GraphSample> dataset{synthetic_sample(1, 3, cfg.psd_dim, cfg.modes)};
        CHECK_THROWS_AS(kfold_cv(cfg, dataset, 2, tcfg), TooFewRecords);
    }
}

TEST_SUITE_END();
