#include "oma/graph_model.hpp"

#include <algorithm>
#include <cmath>

#include "oma/errors.hpp"

namespace oma {

const char* to_string(GnnVariant v) {
    switch (v) {
        case GnnVariant::GraphSAGE: return "GraphSAGE";
        case GnnVariant::GCN: return "GCN";
        case GnnVariant::GAT: return "GAT";
    }
    return "?";
}

GnnVariant gnn_variant_from_string(const std::string& s) {
    if (s == "GraphSAGE" || s == "graphsage" || s == "sage") return GnnVariant::GraphSAGE;
    if (s == "GCN" || s == "gcn") return GnnVariant::GCN;
    if (s == "GAT" || s == "gat") return GnnVariant::GAT;
    throw ConfigError("unknown GNN variant: " + s);
}

void ModelConfig::validate() const {
    if (mp_layers < 1) throw ConfigError("mp_layers must be >= 1");
    if (hidden_dim < 1) throw ConfigError("hidden_dim must be >= 1");
    if (modes < 1) throw ConfigError("modes must be >= 1");
    if (psd_dim < 1) throw ConfigError("psd_dim must be >= 1");
}

int GraphBatch::graph_offset(int g) const {
    int off = 0;
    for (int i = 0; i < g; ++i) off += node_counts[i];
    return off;
}

void GraphBatch::validate() const {
    if (graph_id.size() != features.rows()) throw ShapeMismatch("graph_id size mismatch");
    int total = 0;
    for (int c : node_counts) {
        if (c <= 0) throw EmptyGraph("batch contains an empty graph");
        total += c;
    }
    if (total != node_count()) throw ShapeMismatch("node counts do not sum to batch size");
    int g = 0;
    int left = node_counts.empty() ? 0 : node_counts[0];
    for (int i = 0; i < node_count(); ++i) {
        while (left == 0 && g + 1 < graph_count()) left = node_counts[++g];
        if (graph_id[i] != g) throw ShapeMismatch("graph ids must be contiguous per graph");
        --left;
    }
    for (const auto& [a, b] : edges) {
        if (a < 0 || b < 0 || a >= node_count() || b >= node_count()) {
            throw ShapeMismatch("edge endpoint out of range");
        }
        if (graph_id[a] != graph_id[b]) throw ShapeMismatch("cross-graph edge");
    }
}

GraphBatch GraphBatch::from_samples(const std::vector<const GraphSample*>& samples) {
    if (samples.empty()) throw EmptyDataset("empty batch");
    const std::size_t width = samples.front()->features.cols();
    int total = 0;
    for (const GraphSample* s : samples) {
        if (s->features.cols() != width) throw ShapeMismatch("feature width differs across batch");
        total += static_cast<int>(s->features.rows());
    }
    GraphBatch batch;
    batch.features = Tensor(static_cast<std::size_t>(total), width);
    batch.graph_id.reserve(total);
    int offset = 0;
    for (std::size_t g = 0; g < samples.size(); ++g) {
        const GraphSample* s = samples[g];
        const int n = static_cast<int>(s->features.rows());
        std::copy(s->features.buffer().begin(), s->features.buffer().end(),
                  batch.features.buffer().begin() + static_cast<std::size_t>(offset) * width);
        for (int i = 0; i < n; ++i) batch.graph_id.push_back(static_cast<int>(g));
        for (const auto& [a, b] : s->edges) batch.edges.emplace_back(a + offset, b + offset);
        batch.node_counts.push_back(n);
        offset += n;
    }
    batch.validate();
    return batch;
}

GraphBatch GraphBatch::single(const GraphSample& sample) { return from_samples({&sample}); }

SparseMat readout_mean_matrix(const GraphBatch& batch) {
    std::vector<SparseMat::Triplet> triplets;
    triplets.reserve(batch.node_count());
    int offset = 0;
    for (int g = 0; g < batch.graph_count(); ++g) {
        const double w = 1.0 / batch.node_counts[g];
        for (int i = 0; i < batch.node_counts[g]; ++i) {
            triplets.push_back({static_cast<std::size_t>(g),
                                static_cast<std::size_t>(offset + i), w});
        }
        offset += batch.node_counts[g];
    }
    return SparseMat::from_triplets(static_cast<std::size_t>(batch.graph_count()),
                                    static_cast<std::size_t>(batch.node_count()),
                                    std::move(triplets));
}

namespace {

SparseMat neighbor_mean_matrix(const GraphBatch& batch) {
    const auto n = static_cast<std::size_t>(batch.node_count());
    std::vector<double> degree(n, 0.0);
    for (const auto& [a, b] : batch.edges) {
        degree[static_cast<std::size_t>(a)] += 1.0;
        degree[static_cast<std::size_t>(b)] += 1.0;
    }
    std::vector<SparseMat::Triplet> triplets;
    triplets.reserve(batch.edges.size() * 2);
    for (const auto& [a, b] : batch.edges) {
        const auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
        triplets.push_back({ua, ub, 1.0 / degree[ua]});
        triplets.push_back({ub, ua, 1.0 / degree[ub]});
    }
    return SparseMat::from_triplets(n, n, std::move(triplets));
}

// D^{-1/2} (A + I) D^{-1/2} with degrees counted on A + I
SparseMat gcn_norm_matrix(const GraphBatch& batch) {
    const auto n = static_cast<std::size_t>(batch.node_count());
    std::vector<double> degree(n, 1.0);  // self-loop
    for (const auto& [a, b] : batch.edges) {
        degree[static_cast<std::size_t>(a)] += 1.0;
        degree[static_cast<std::size_t>(b)] += 1.0;
    }
    std::vector<SparseMat::Triplet> triplets;
    triplets.reserve(batch.edges.size() * 2 + n);
    for (std::size_t i = 0; i < n; ++i) triplets.push_back({i, i, 1.0 / degree[i]});
    for (const auto& [a, b] : batch.edges) {
        const auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
        const double w = 1.0 / std::sqrt(degree[ua] * degree[ub]);
        triplets.push_back({ua, ub, w});
        triplets.push_back({ub, ua, w});
    }
    return SparseMat::from_triplets(n, n, std::move(triplets));
}

// directed edge list including self-loops: src -> dst
struct DirectedEdges {
    std::vector<std::size_t> src;
    std::vector<std::size_t> dst;
};

DirectedEdges directed_with_self_loops(const GraphBatch& batch) {
    DirectedEdges d;
    d.src.reserve(batch.edges.size() * 2 + batch.node_count());
    d.dst.reserve(batch.edges.size() * 2 + batch.node_count());
    for (int i = 0; i < batch.node_count(); ++i) {
        d.src.push_back(static_cast<std::size_t>(i));
        d.dst.push_back(static_cast<std::size_t>(i));
    }
    for (const auto& [a, b] : batch.edges) {
        d.src.push_back(static_cast<std::size_t>(a));
        d.dst.push_back(static_cast<std::size_t>(b));
        d.src.push_back(static_cast<std::size_t>(b));
        d.dst.push_back(static_cast<std::size_t>(a));
    }
    return d;
}

std::string layer_prefix(int layer) { return "mp" + std::to_string(layer); }

}  // namespace

OmaModel::OmaModel(const ModelConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
    cfg.validate();
    RandomStream rng(init_seed);
    const auto d = static_cast<std::size_t>(cfg.hidden_dim);
    const auto m = static_cast<std::size_t>(cfg.psd_dim);
    const auto k = static_cast<std::size_t>(cfg.modes);

    auto uniform_tensor = [&](std::size_t rows, std::size_t cols, std::size_t fan_in) {
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        Tensor t(rows, cols);
        for (auto& x : t.buffer()) x = rng.uniform(-bound, bound);
        return t;
    };

    if (cfg.use_encoder) {
        init_mlp_params(params_, "enc", MlpSpec{{m, d, d, d}, Activation::ReLU, Activation::ReLU},
                        rng);
    }
    const std::size_t mp_in = cfg.use_encoder ? d : m;
    for (int l = 0; l < cfg.mp_layers; ++l) {
        const std::size_t in = l == 0 ? mp_in : d;
        const std::string prefix = layer_prefix(l);
        switch (cfg.variant) {
            case GnnVariant::GraphSAGE:
                params_.add(prefix + ".Wself", uniform_tensor(in, d, in));
                if (cfg.message_passing) {
                    params_.add(prefix + ".Wnbr", uniform_tensor(in, d, in));
                }
                params_.add(prefix + ".b", Tensor::zeros(1, d));
                break;
            case GnnVariant::GCN:
                params_.add(prefix + ".W", uniform_tensor(in, d, in));
                params_.add(prefix + ".b", Tensor::zeros(1, d));
                break;
            case GnnVariant::GAT:
                params_.add(prefix + ".W", uniform_tensor(in, d, in));
                if (cfg.message_passing) {
                    params_.add(prefix + ".a_src", uniform_tensor(d, 1, d));
                    params_.add(prefix + ".a_dst", uniform_tensor(d, 1, d));
                }
                params_.add(prefix + ".b", Tensor::zeros(1, d));
                break;
        }
    }
    const MlpSpec head{{d, d, d, k}, Activation::ReLU, Activation::Identity};
    init_mlp_params(params_, "dec_f", head, rng);
    init_mlp_params(params_, "dec_z", head, rng);
    init_mlp_params(params_, "dec_phi", head, rng);
}

OmaModel::OmaModel(const ModelConfig& cfg, ParamStore params)
    : cfg_(cfg), params_(std::move(params)) {
    cfg.validate();
}

int OmaModel::encode(Tape& tape, const ParamNodes& params, int features) const {
    if (!cfg_.use_encoder) return features;
    const auto d = static_cast<std::size_t>(cfg_.hidden_dim);
    const MlpSpec spec{{static_cast<std::size_t>(cfg_.psd_dim), d, d, d}, Activation::ReLU,
                       Activation::ReLU};
    return mlp_forward(tape, spec, params, "enc", features);
}

int OmaModel::message_pass(Tape& tape, const ParamNodes& params, const GraphBatch& batch,
                           int h1) const {
    int h = h1;
    if (!cfg_.message_passing) {
        // ablation: node-wise MLP, no neighbor exchange
        for (int l = 0; l < cfg_.mp_layers; ++l) {
            const std::string p = layer_prefix(l);
            const std::string w = cfg_.variant == GnnVariant::GraphSAGE ? ".Wself" : ".W";
            h = tape.relu(tape.add_rowvec(tape.matmul(h, params.id(p + w)), params.id(p + ".b")));
        }
        return h;
    }
    switch (cfg_.variant) {
        case GnnVariant::GraphSAGE: {
            const SparseMat mean_adj = neighbor_mean_matrix(batch);
            for (int l = 0; l < cfg_.mp_layers; ++l) {
                const std::string p = layer_prefix(l);
                const int self_part = tape.matmul(h, params.id(p + ".Wself"));
                const int nbr_part =
                    tape.matmul(tape.sparse_matmul(mean_adj, h), params.id(p + ".Wnbr"));
                h = tape.relu(tape.add_rowvec(tape.add(self_part, nbr_part), params.id(p + ".b")));
            }
            return h;
        }
        case GnnVariant::GCN: {
            const SparseMat norm_adj = gcn_norm_matrix(batch);
            for (int l = 0; l < cfg_.mp_layers; ++l) {
                const std::string p = layer_prefix(l);
                h = tape.relu(tape.add_rowvec(
                    tape.matmul(tape.sparse_matmul(norm_adj, h), params.id(p + ".W")),
                    params.id(p + ".b")));
            }
            return h;
        }
        case GnnVariant::GAT: {
            const DirectedEdges d = directed_with_self_loops(batch);
            const auto n = static_cast<std::size_t>(batch.node_count());
            for (int l = 0; l < cfg_.mp_layers; ++l) {
                const std::string p = layer_prefix(l);
                const int wh = tape.matmul(h, params.id(p + ".W"));
                const int score_src = tape.matmul(wh, params.id(p + ".a_src"));
                const int score_dst = tape.matmul(wh, params.id(p + ".a_dst"));
                const int edge_score = tape.leaky_relu(
                    tape.add(tape.gather_rows(score_src, d.src),
                             tape.gather_rows(score_dst, d.dst)),
                    0.2);
                const int attention = tape.segment_softmax(edge_score, d.dst, n);
                const int messages = tape.mul_colvec(tape.gather_rows(wh, d.src), attention);
                const int aggregated = tape.scatter_sum_rows(messages, d.dst, n);
                h = tape.relu(tape.add_rowvec(aggregated, params.id(p + ".b")));
            }
            return h;
        }
    }
    throw ConfigError("unknown GNN variant");
}

int OmaModel::readout(Tape& tape, const GraphBatch& batch, int h3) {
    for (int c : batch.node_counts) {
        if (c == 0) throw EmptyGraph("readout over an empty graph");
    }
    return tape.sparse_matmul(readout_mean_matrix(batch), h3);
}

OmaModel::ForwardNodes OmaModel::build_forward(Tape& tape, const ParamNodes& params,
                                               const GraphBatch& batch) const {
    batch.validate();
    if (batch.features.cols() != static_cast<std::size_t>(cfg_.psd_dim)) {
        throw ShapeMismatch("batch feature width does not match model psd_dim");
    }
    const auto d = static_cast<std::size_t>(cfg_.hidden_dim);
    const auto k = static_cast<std::size_t>(cfg_.modes);
    ForwardNodes fwd;
    const int features = tape.leaf(batch.features);
    fwd.node_encoding = encode(tape, params, features);
    fwd.node_final = message_pass(tape, params, batch, fwd.node_encoding);
    fwd.graph_encoding = readout(tape, batch, fwd.node_final);

    const MlpSpec freq_head{{d, d, d, k}, Activation::ReLU, Activation::Softplus};
    const MlpSpec damp_head{{d, d, d, k}, Activation::ReLU, Activation::Softplus};
    const MlpSpec shape_head{{d, d, d, k}, Activation::ReLU, Activation::Sigmoid};
    fwd.freq = mlp_forward(tape, freq_head, params, "dec_f", fwd.graph_encoding);
    fwd.damp = mlp_forward(tape, damp_head, params, "dec_z", fwd.graph_encoding);
    fwd.shape = mlp_forward(tape, shape_head, params, "dec_phi", fwd.node_final);
    return fwd;
}

std::vector<ModalEstimate> OmaModel::infer(const GraphBatch& batch) const {
    Tape tape;
    const ParamNodes nodes = attach_params(tape, params_);
    const ForwardNodes fwd = build_forward(tape, nodes, batch);
    const Tensor& freq = tape.value(fwd.freq);
    const Tensor& damp = tape.value(fwd.damp);
    const Tensor& shape = tape.value(fwd.shape);
    const auto k = static_cast<std::size_t>(cfg_.modes);

    std::vector<ModalEstimate> out(batch.graph_count());
    int offset = 0;
    for (int g = 0; g < batch.graph_count(); ++g) {
        ModalEstimate& est = out[g];
        est.frequencies.resize(k);
        est.damping.resize(k);
        for (std::size_t j = 0; j < k; ++j) {
            est.frequencies[j] = freq(static_cast<std::size_t>(g), j);
            est.damping[j] = damp(static_cast<std::size_t>(g), j);
        }
        const int n = batch.node_counts[g];
        est.shapes = Tensor(static_cast<std::size_t>(n), k);
        for (int i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < k; ++j) {
                est.shapes(static_cast<std::size_t>(i), j) =
                    shape(static_cast<std::size_t>(offset + i), j);
            }
        }
        offset += n;
    }
    return out;
}

ModalEstimate OmaModel::infer_single(const GraphSample& sample) const {
    return infer(GraphBatch::single(sample)).front();
}

LossNodes build_loss(Tape& tape, const OmaModel::ForwardNodes& fwd, const GraphBatch& batch,
                     const std::vector<const ModalSolution*>& targets,
                     const LossWeights& weights) {
    const auto b = static_cast<std::size_t>(batch.graph_count());
    if (targets.size() != b) throw ShapeMismatch("one target per graph required");
    const Tensor& freq_value = tape.value(fwd.freq);
    const std::size_t k = freq_value.cols();

    Tensor freq_recip(b, k);
    Tensor damp_recip(b, k);
    for (std::size_t g = 0; g < b; ++g) {
        const ModalSolution& t = *targets[g];
        if (t.frequencies.size() != k || t.damping_ratios.size() != k) {
            throw ShapeMismatch("target mode count mismatch");
        }
        for (std::size_t j = 0; j < k; ++j) {
            if (t.frequencies[j] == 0.0 || t.damping_ratios[j] == 0.0) {
                throw ZeroTarget("frequency/damping targets must be nonzero");
            }
            freq_recip(g, j) = 1.0 / t.frequencies[j];
            damp_recip(g, j) = 1.0 / t.damping_ratios[j];
        }
    }
    Tensor shape_neg(static_cast<std::size_t>(batch.node_count()), k);
    {
        std::size_t row = 0;
        for (std::size_t g = 0; g < b; ++g) {
            const Tensor& phi = targets[g]->shapes;
            if (phi.rows() != static_cast<std::size_t>(batch.node_counts[g]) || phi.cols() != k) {
                throw ShapeMismatch("target shape matrix mismatch");
            }
            for (std::size_t i = 0; i < phi.rows(); ++i, ++row) {
                for (std::size_t j = 0; j < k; ++j) shape_neg(row, j) = -phi(i, j);
            }
        }
    }

    const double inv_b = 1.0 / static_cast<double>(b);
    const double inv_k = 1.0 / static_cast<double>(k);

    LossNodes loss;
    const int freq_sq = tape.square(tape.add_scalar(tape.mul_const(fwd.freq, freq_recip), -1.0));
    loss.freq_term = tape.scale(tape.sum(freq_sq), weights.freq * inv_k * inv_b);
    const int damp_sq = tape.square(tape.add_scalar(tape.mul_const(fwd.damp, damp_recip), -1.0));
    loss.damp_term = tape.scale(tape.sum(damp_sq), weights.damp * inv_k * inv_b);

    // per-graph sum of squared shape errors, scaled by lambda1 / (k N_g)
    const int shape_sq = tape.square(tape.add_const(fwd.shape, shape_neg));
    const int per_node = tape.row_sum(shape_sq);
    SparseMat graph_sum;
    {
        std::vector<SparseMat::Triplet> triplets;
        triplets.reserve(batch.node_count());
        int offset = 0;
        for (int g = 0; g < batch.graph_count(); ++g) {
            const double w = weights.shape * inv_k / batch.node_counts[g];
            for (int i = 0; i < batch.node_counts[g]; ++i) {
                triplets.push_back({static_cast<std::size_t>(g),
                                    static_cast<std::size_t>(offset + i), w});
            }
            offset += batch.node_counts[g];
        }
        graph_sum = SparseMat::from_triplets(b, static_cast<std::size_t>(batch.node_count()),
                                             std::move(triplets));
    }
    loss.shape_term = tape.scale(tape.sum(tape.sparse_matmul(graph_sum, per_node)), inv_b);

    loss.total = tape.add(tape.add(loss.shape_term, loss.freq_term), loss.damp_term);
    return loss;
}

}  // namespace oma
