#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "oma/autodiff.hpp"
#include "oma/fem.hpp"
#include "oma/nn.hpp"
#include "oma/tensor.hpp"

namespace oma {

enum class GnnVariant { GraphSAGE, GCN, GAT };

const char* to_string(GnnVariant v);
GnnVariant gnn_variant_from_string(const std::string& s);

struct ModelConfig {
    GnnVariant variant = GnnVariant::GraphSAGE;
    int mp_layers = 3;
    int hidden_dim = 64;
    int modes = 4;     // k
    int psd_dim = 513;  // M

    // ablation switches: drop the PSD encoder / replace message passing with
    // a node-wise MLP (the graph readout always stays, the frequency and
    // damping heads need it)
    bool use_encoder = true;
    bool message_passing = true;

    void validate() const;
};

/// Loss term weights: lambda1 (shapes), lambda2 (frequencies), lambda3
/// (damping ratios).
struct LossWeights {
    double shape = 2.0;
    double freq = 1.0;
    double damp = 1.0;
};

/// One structure as the model sees it: normalized PSD rows, the bar graph,
/// and the modal targets.
struct GraphSample {
    Tensor features;  // N x M
    std::vector<std::pair<int, int>> edges;
    ModalSolution targets;
};

/// Disjoint union of B graphs. Node rows are grouped per graph in order, so
/// graph g occupies a contiguous row range and no edges cross graphs.
struct GraphBatch {
    Tensor features;                        // sum(N_b) x M
    std::vector<std::pair<int, int>> edges; // union indexing
    std::vector<int> graph_id;              // per node, 0..B-1 contiguous
    std::vector<int> node_counts;           // per graph

    int node_count() const { return static_cast<int>(graph_id.size()); }
    int graph_count() const { return static_cast<int>(node_counts.size()); }
    int graph_offset(int g) const;
    void validate() const;

    static GraphBatch from_samples(const std::vector<const GraphSample*>& samples);
    static GraphBatch single(const GraphSample& sample);
};

struct ModalEstimate {
    std::vector<double> frequencies;  // k, Hz
    std::vector<double> damping;      // k
    Tensor shapes;                    // N x k, entries in [0, 1]
};

/// The PSD-to-modal-properties model: MLP encoder, message-passing trunk,
/// mean readout, and three decoder heads (frequencies and damping from the
/// graph feature via softplus, shape magnitudes from node features via
/// sigmoid).
class OmaModel {
public:
    OmaModel() = default;
    OmaModel(const ModelConfig& cfg, std::uint64_t init_seed);
    OmaModel(const ModelConfig& cfg, ParamStore params);

    const ModelConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    struct ForwardNodes {
        int node_encoding = -1;   // H1: sum(N) x D
        int graph_encoding = -1;  // H2: B x D
        int node_final = -1;      // H3: sum(N) x D
        int freq = -1;            // B x k
        int damp = -1;            // B x k
        int shape = -1;           // sum(N) x k
    };

    int encode(Tape& tape, const ParamNodes& params, int features) const;
    int message_pass(Tape& tape, const ParamNodes& params, const GraphBatch& batch, int h1) const;
    static int readout(Tape& tape, const GraphBatch& batch, int h3);

    ForwardNodes build_forward(Tape& tape, const ParamNodes& params,
                               const GraphBatch& batch) const;

    std::vector<ModalEstimate> infer(const GraphBatch& batch) const;
    ModalEstimate infer_single(const GraphSample& sample) const;

private:
    ModelConfig cfg_;
    ParamStore params_;
};

struct LossNodes {
    int total = -1;
    int shape_term = -1;
    int freq_term = -1;
    int damp_term = -1;
};

/// Eq-style objective: mean over graphs of
///   l1/(k N) sum (|Phi|-|Phi_hat|)^2 + l2/k sum (F_hat/F - 1)^2
///   + l3/k sum (Z_hat/Z - 1)^2.
LossNodes build_loss(Tape& tape, const OmaModel::ForwardNodes& fwd, const GraphBatch& batch,
                     const std::vector<const ModalSolution*>& targets, const LossWeights& weights);

/// Readout selector matrix (mean over each graph's rows).
SparseMat readout_mean_matrix(const GraphBatch& batch);

}  // namespace oma
