#pragma once

#include <cstdint>
#include <vector>

#include "oma/graph_model.hpp"
#include "oma/nn.hpp"

namespace oma {

struct TrainConfig {
    int epochs = 1000;
    int batch_size = 64;
    std::uint64_t seed = 0;
    LossWeights lambdas;
    AdamConfig adam;  // paper defaults: lr 0.001, betas 0.9 / 0.999
};

struct LossTerms {
    double total = 0.0;
    double shape = 0.0;
    double freq = 0.0;
    double damp = 0.0;
};

struct TrainResult {
    std::vector<LossTerms> train_history;  // one entry per epoch
    std::vector<LossTerms> val_history;    // empty when no validation set given
    double wall_seconds = 0.0;
    double final_validation_loss = 0.0;  // NaN when no validation set
};

/// Mini-batch Adam training with seeded epoch shuffling. Single-threaded and
/// bitwise deterministic for a fixed seed.
TrainResult train(OmaModel& model, const std::vector<GraphSample>& train_set,
                  const std::vector<GraphSample>* validation, const TrainConfig& cfg);

/// Loss of the current model on a dataset (no parameter updates).
LossTerms evaluate_loss(const OmaModel& model, const std::vector<GraphSample>& dataset,
                        const LossWeights& lambdas, int batch_size = 64);

struct KfoldResult {
    std::vector<double> fold_losses;  // final validation loss per fold
    std::vector<double> fold_seconds;
    std::vector<std::pair<int, int>> fold_ranges;  // validation [lo, hi) per fold
    double loss_mean = 0.0;
    double loss_sd = 0.0;
    double seconds_mean = 0.0;
    double seconds_sd = 0.0;
};

/// K-fold cross-validation: each fold serves once as the validation split;
/// the remainder trains a freshly initialized model.
KfoldResult kfold_cv(const ModelConfig& model_cfg, const std::vector<GraphSample>& dataset,
                     int folds, const TrainConfig& cfg);

}  // namespace oma
