#include "oma/training.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "oma/errors.hpp"
#include "oma/rng.hpp"

namespace oma {

namespace {

void check_dataset(const std::vector<GraphSample>& dataset, const ModelConfig& cfg) {
    if (dataset.empty()) throw EmptyDataset("training set is empty");
    for (const GraphSample& s : dataset) {
        if (s.features.cols() != static_cast<std::size_t>(cfg.psd_dim)) {
            throw ShapeMismatch("sample feature width differs from model psd_dim");
        }
        if (s.targets.modes != cfg.modes) {
            throw ShapeMismatch("sample target mode count differs from model");
        }
    }
}

struct BatchEval {
    LossTerms terms;
    int graphs = 0;
};

BatchEval eval_batch(const OmaModel& model, const std::vector<const GraphSample*>& samples,
                     const LossWeights& lambdas, Tape& tape, LossNodes& loss_nodes,
                     ParamNodes& param_nodes) {
    const GraphBatch batch = GraphBatch::from_samples(samples);
    std::vector<const ModalSolution*> targets;
    targets.reserve(samples.size());
    for (const GraphSample* s : samples) targets.push_back(&s->targets);
    param_nodes = attach_params(tape, model.params());
    const OmaModel::ForwardNodes fwd = model.build_forward(tape, param_nodes, batch);
    loss_nodes = build_loss(tape, fwd, batch, targets, lambdas);
    BatchEval out;
    out.graphs = batch.graph_count();
    out.terms.total = tape.scalar(loss_nodes.total);
    out.terms.shape = tape.scalar(loss_nodes.shape_term);
    out.terms.freq = tape.scalar(loss_nodes.freq_term);
    out.terms.damp = tape.scalar(loss_nodes.damp_term);
    return out;
}

LossTerms weighted_mean(const std::vector<BatchEval>& evals) {
    LossTerms mean;
    int graphs = 0;
    for (const BatchEval& e : evals) {
        mean.total += e.terms.total * e.graphs;
        mean.shape += e.terms.shape * e.graphs;
        mean.freq += e.terms.freq * e.graphs;
        mean.damp += e.terms.damp * e.graphs;
        graphs += e.graphs;
    }
    if (graphs > 0) {
        mean.total /= graphs;
        mean.shape /= graphs;
        mean.freq /= graphs;
        mean.damp /= graphs;
    }
    return mean;
}

}  // namespace

LossTerms evaluate_loss(const OmaModel& model, const std::vector<GraphSample>& dataset,
                        const LossWeights& lambdas, int batch_size) {
    if (dataset.empty()) throw EmptyDataset("evaluation set is empty");
    std::vector<BatchEval> evals;
    for (std::size_t start = 0; start < dataset.size(); start += batch_size) {
        const std::size_t end = std::min(dataset.size(), start + batch_size);
        std::vector<const GraphSample*> samples;
        samples.reserve(end - start);
        for (std::size_t i = start; i < end; ++i) samples.push_back(&dataset[i]);
        Tape tape;
        LossNodes loss_nodes;
        ParamNodes param_nodes;
        evals.push_back(eval_batch(model, samples, lambdas, tape, loss_nodes, param_nodes));
    }
    return weighted_mean(evals);
}

TrainResult train(OmaModel& model, const std::vector<GraphSample>& train_set,
                  const std::vector<GraphSample>* validation, const TrainConfig& cfg) {
    check_dataset(train_set, model.config());
    if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
    if (cfg.batch_size < 1) throw ConfigError("batch size must be >= 1");

    const auto start_time = std::chrono::steady_clock::now();
    RandomStream shuffle_rng(derive_seed(cfg.seed, 0xE90C));
    TrainResult result;
    result.train_history.reserve(cfg.epochs);
    AdamState adam_state;

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        std::vector<BatchEval> epoch_evals;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<const GraphSample*> samples;
            samples.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) samples.push_back(&train_set[order[i]]);

            Tape tape;
            LossNodes loss_nodes;
            ParamNodes param_nodes;
            epoch_evals.push_back(
                eval_batch(model, samples, cfg.lambdas, tape, loss_nodes, param_nodes));
            tape.backward(loss_nodes.total);
            const std::vector<Tensor> grads = collect_grads(tape, param_nodes);
            adam_step(model.params(), grads, adam_state, cfg.adam);
        }
        result.train_history.push_back(weighted_mean(epoch_evals));
        if (validation != nullptr && !validation->empty()) {
            result.val_history.push_back(
                evaluate_loss(model, *validation, cfg.lambdas, cfg.batch_size));
        }
    }
    result.final_validation_loss = result.val_history.empty()
                                       ? std::numeric_limits<double>::quiet_NaN()
                                       : result.val_history.back().total;
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
    return result;
}

KfoldResult kfold_cv(const ModelConfig& model_cfg, const std::vector<GraphSample>& dataset,
                     int folds, const TrainConfig& cfg) {
    if (folds < 2) throw ConfigError("need at least 2 folds");
    if (static_cast<int>(dataset.size()) < folds) {
        throw TooFewRecords("fewer records than folds");
    }
    const std::size_t per_fold = dataset.size() / static_cast<std::size_t>(folds);
    KfoldResult result;
    for (int f = 0; f < folds; ++f) {
        const std::size_t lo = per_fold * static_cast<std::size_t>(f);
        const std::size_t hi =
            f == folds - 1 ? dataset.size() : lo + per_fold;  // last fold takes the remainder
        std::vector<GraphSample> train_split;
        std::vector<GraphSample> val_split;
        for (std::size_t i = 0; i < dataset.size(); ++i) {
            (i >= lo && i < hi ? val_split : train_split).push_back(dataset[i]);
        }
        OmaModel model(model_cfg, derive_seed(cfg.seed, static_cast<std::uint64_t>(f), 1));
        TrainConfig fold_cfg = cfg;
        fold_cfg.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(f), 2);
        const TrainResult r = train(model, train_split, &val_split, fold_cfg);
        result.fold_losses.push_back(r.final_validation_loss);
        result.fold_seconds.push_back(r.wall_seconds);
        result.fold_ranges.emplace_back(static_cast<int>(lo), static_cast<int>(hi));
    }
    auto stats = [](const std::vector<double>& xs) {
        double mean = 0.0;
        for (double x : xs) mean += x;
        mean /= xs.size();
        double var = 0.0;
        for (double x : xs) var += (x - mean) * (x - mean);
        var = xs.size() > 1 ? var / (xs.size() - 1) : 0.0;
        return std::pair{mean, std::sqrt(var)};
    };
    std::tie(result.loss_mean, result.loss_sd) = stats(result.fold_losses);
    std::tie(result.seconds_mean, result.seconds_sd) = stats(result.fold_seconds);
    return result;
}

}  // namespace oma
