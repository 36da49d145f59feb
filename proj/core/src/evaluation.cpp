#include "oma/evaluation.hpp"

#include <cmath>

#include "oma/errors.hpp"

namespace oma {

double mac(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty()) throw ShapeMismatch("MAC needs equal-length vectors");
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    if (aa == 0.0 || bb == 0.0) throw ZeroVector("MAC of an all-zero vector");
    return (ab * ab) / (aa * bb);
}

double relative_error_percent(double est, double target) {
    if (target == 0.0) throw ZeroTarget("relative error of a zero target");
    return (est / target - 1.0) * 100.0;
}

namespace {

struct Running {
    std::vector<double> values;

    void push(double v) { values.push_back(v); }
    double mean() const {
        double m = 0.0;
        for (double v : values) m += v;
        return values.empty() ? 0.0 : m / values.size();
    }
    double sd() const {
        if (values.size() < 2) return 0.0;
        const double m = mean();
        double var = 0.0;
        for (double v : values) var += (v - m) * (v - m);
        return std::sqrt(var / (values.size() - 1));
    }
    double min() const {
        double lo = values.empty() ? 0.0 : values.front();
        for (double v : values) lo = std::min(lo, v);
        return lo;
    }
    double max_abs() const {
        double hi = 0.0;
        for (double v : values) hi = std::max(hi, std::abs(v));
        return hi;
    }
    double mean_abs() const {
        double m = 0.0;
        for (double v : values) m += std::abs(v);
        return values.empty() ? 0.0 : m / values.size();
    }
};

}  // namespace

std::vector<PerModeStats> summarize(const std::vector<EvaluationPair>& results) {
    if (results.empty()) throw Empty("no results to summarize");
    const int modes = results.front().target->modes;
    for (const EvaluationPair& p : results) {
        if (p.target->modes != modes ||
            static_cast<int>(p.estimate->frequencies.size()) != modes) {
            throw ShapeMismatch("inconsistent mode counts in result list");
        }
    }
    std::vector<PerModeStats> table(static_cast<std::size_t>(modes));
    for (int j = 0; j < modes; ++j) {
        Running macs, damp_err, freq_err;
        for (const EvaluationPair& p : results) {
            const std::size_t n = p.target->shapes.rows();
            if (p.estimate->shapes.rows() != n) throw ShapeMismatch("shape length mismatch");
            std::vector<double> est_col(n), tgt_col(n);
            for (std::size_t i = 0; i < n; ++i) {
                est_col[i] = p.estimate->shapes(i, static_cast<std::size_t>(j));
                tgt_col[i] = p.target->shapes(i, static_cast<std::size_t>(j));
            }
            macs.push(mac(est_col, tgt_col));
            freq_err.push(relative_error_percent(p.estimate->frequencies[static_cast<std::size_t>(j)],
                                                 p.target->frequencies[static_cast<std::size_t>(j)]));
            const double z_est = p.estimate->damping[static_cast<std::size_t>(j)];
            if (std::isfinite(z_est)) {
                damp_err.push(relative_error_percent(
                    z_est, p.target->damping_ratios[static_cast<std::size_t>(j)]));
            }
        }
        PerModeStats& row = table[static_cast<std::size_t>(j)];
        row.mode = j + 1;
        row.count = static_cast<int>(macs.values.size());
        row.damp_count = static_cast<int>(damp_err.values.size());
        row.mac_mean = macs.mean();
        row.mac_sd = macs.sd();
        row.mac_min = macs.min();
        row.damp_mean = damp_err.mean();
        row.damp_sd = damp_err.sd();
        row.damp_max_abs = damp_err.max_abs();
        row.mean_abs_damp = damp_err.mean_abs();
        row.freq_mean = freq_err.mean();
        row.freq_sd = freq_err.sd();
        row.freq_max_abs = freq_err.max_abs();
        row.mean_abs_freq = freq_err.mean_abs();
    }
    return table;
}

}  // namespace oma
