#pragma once

#include <span>
#include <vector>

#include "oma/fem.hpp"
#include "oma/graph_model.hpp"

namespace oma {

/// Modal Assurance Criterion: (a^T b)^2 / ((a^T a)(b^T b)). Symmetric and
/// scale-invariant; 1 for parallel vectors, 0 for orthogonal ones.
double mac(std::span<const double> a, std::span<const double> b);

/// Signed percent error: (est / target - 1) * 100.
double relative_error_percent(double est, double target);

/// Per-mode population statistics in the reporting layout: MAC
/// {mean, SD, min} and percent errors {mean, SD, max |error|}. `mean_abs_*`
/// carry the mean absolute errors used by the acceptance thresholds.
struct PerModeStats {
    int mode = 0;  // 1-based
    double mac_mean = 0.0, mac_sd = 0.0, mac_min = 0.0;
    double damp_mean = 0.0, damp_sd = 0.0, damp_max_abs = 0.0;
    double freq_mean = 0.0, freq_sd = 0.0, freq_max_abs = 0.0;
    double mean_abs_damp = 0.0;
    double mean_abs_freq = 0.0;
    int count = 0;       // result pairs contributing MAC
    int damp_count = 0;  // finite damping estimates (EFDD may be unavailable)
};

struct EvaluationPair {
    const ModalEstimate* estimate;
    const ModalSolution* target;
};

/// Population statistics per mode, paired by ascending-frequency index.
/// Standard deviations are sample (n-1) values. Non-finite damping estimates
/// are skipped and counted.
std::vector<PerModeStats> summarize(const std::vector<EvaluationPair>& results);

}  // namespace oma
