#include "oma/fdd.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <limits>

#include "oma/errors.hpp"

namespace oma {

double complex_mac(const Eigen::VectorXcd& u, const Eigen::VectorXcd& v) {
    const double uu = u.squaredNorm();
    const double vv = v.squaredNorm();
    if (uu == 0.0 || vv == 0.0) throw ZeroVector("MAC of a zero vector");
    const std::complex<double> uv = u.dot(v);  // conjugate dot
    return std::norm(uv) / (uu * vv);
}

SvdSpectrum svd_spectrum(const CrossPsd& cross) {
    SvdSpectrum out;
    out.freq_axis = cross.freq_axis;
    const std::size_t bins = cross.bins.size();
    if (bins == 0) throw TooShort("cross PSD has no bins");
    const auto n = static_cast<std::size_t>(cross.bins.front().rows());
    out.singular_values = Tensor(bins, n);
    out.first_vectors.resize(bins);
    out.bin_ok.assign(bins, true);
    for (std::size_t m = 0; m < bins; ++m) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(cross.bins[m]);
        if (solver.info() != Eigen::Success) {
            out.bin_ok[m] = false;
            out.first_vectors[m] = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(n));
            continue;
        }
        // eigenvalues ascending; flip to descending, clamp rounding negatives
        for (std::size_t j = 0; j < n; ++j) {
            const double v = solver.eigenvalues()(static_cast<Eigen::Index>(n - 1 - j));
            out.singular_values(m, j) = v > 0.0 ? v : 0.0;
        }
        out.first_vectors[m] = solver.eigenvectors().col(static_cast<Eigen::Index>(n - 1));
    }
    return out;
}

namespace {

struct Candidate {
    int bin;
    double prominence;
};

// scipy-style topographic prominence inside [lo, hi]
double prominence_at(std::span<const double> y, int peak, int lo, int hi) {
    double left_base = y[peak];
    for (int i = peak - 1; i >= lo; --i) {
        left_base = std::min(left_base, y[i]);
        if (y[i] > y[peak]) break;
    }
    double right_base = y[peak];
    for (int i = peak + 1; i <= hi; ++i) {
        right_base = std::min(right_base, y[i]);
        if (y[i] > y[peak]) break;
    }
    return y[peak] - std::max(left_base, right_base);
}

}  // namespace

std::vector<int> pick_peaks(std::span<const double> sv1, std::span<const double> freq_axis,
                            const PeakPickConfig& cfg) {
    if (sv1.size() != freq_axis.size() || sv1.size() < 3) {
        throw ShapeMismatch("sv1 and frequency axis must agree and hold >= 3 bins");
    }
    if (cfg.modes < 1) throw ConfigError("need at least one mode");
    const double df = freq_axis[1] - freq_axis[0];
    const double min_sep = cfg.min_separation_hz > 0.0 ? cfg.min_separation_hz : 5.0 * df;
    const double band_hi = cfg.band_hi_hz > 0.0 ? cfg.band_hi_hz : 0.98 * freq_axis.back();

    int lo = 0;
    while (lo < static_cast<int>(sv1.size()) && freq_axis[lo] < cfg.band_lo_hz) ++lo;
    int hi = static_cast<int>(sv1.size()) - 1;
    while (hi > 0 && freq_axis[hi] > band_hi) --hi;
    if (hi - lo < 2) throw InsufficientPeaks("search band too narrow", 0);

    double global_max = 0.0;
    for (int i = lo; i <= hi; ++i) global_max = std::max(global_max, sv1[i]);
    const double floor = cfg.prominence_floor * global_max;

    std::vector<Candidate> candidates;
    for (int i = std::max(lo, 1); i <= std::min(hi, static_cast<int>(sv1.size()) - 2); ++i) {
        if (!(sv1[i] > sv1[i - 1] && sv1[i] >= sv1[i + 1])) continue;
        const double prom = prominence_at(sv1, i, lo, hi);
        if (prom >= floor) candidates.push_back({i, prom});
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        return a.prominence != b.prominence ? a.prominence > b.prominence : a.bin < b.bin;
    });

    std::vector<int> picked;
    for (const Candidate& c : candidates) {
        bool clear = true;
        for (int p : picked) {
            if (std::abs(freq_axis[c.bin] - freq_axis[p]) < min_sep) {
                clear = false;
                break;
            }
        }
        if (clear) picked.push_back(c.bin);
        if (static_cast<int>(picked.size()) == cfg.modes) break;
    }
    if (static_cast<int>(picked.size()) < cfg.modes) {
        throw InsufficientPeaks("found " + std::to_string(picked.size()) + " of " +
                                    std::to_string(cfg.modes) + " peaks",
                                static_cast<int>(picked.size()));
    }
    std::sort(picked.begin(), picked.end());
    return picked;
}

Tensor fdd_mode_shapes(const SvdSpectrum& svd, const std::vector<int>& peaks) {
    const std::size_t n = static_cast<std::size_t>(svd.first_vectors.front().size());
    Tensor shapes(n, peaks.size());
    for (std::size_t j = 0; j < peaks.size(); ++j) {
        const Eigen::VectorXcd& u = svd.first_vectors[static_cast<std::size_t>(peaks[j])];
        double peak_abs = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = std::abs(u(static_cast<Eigen::Index>(i)));
            shapes(i, j) = v;
            peak_abs = std::max(peak_abs, v);
        }
        if (peak_abs > 0.0) {
            for (std::size_t i = 0; i < n; ++i) shapes(i, j) /= peak_abs;
        }
    }
    return shapes;
}

EfddResult efdd_damping(const SvdSpectrum& svd, int peak_bin, const EfddConfig& cfg) {
    EfddResult result;
    const int bins = static_cast<int>(svd.freq_axis.size());
    if (peak_bin < 0 || peak_bin >= bins) throw ConfigError("peak bin out of range");
    const Eigen::VectorXcd& ref = svd.first_vectors[static_cast<std::size_t>(peak_bin)];
    const double peak_value = svd.singular_values(static_cast<std::size_t>(peak_bin), 0);
    if (!(peak_value > 0.0)) return result;

    auto in_bell = [&](int bin) {
        if (bin < 0 || bin >= bins || !svd.bin_ok[static_cast<std::size_t>(bin)]) return false;
        const double sv = svd.singular_values(static_cast<std::size_t>(bin), 0);
        if (sv < cfg.sigma_rel_floor * peak_value) return false;
        return complex_mac(svd.first_vectors[static_cast<std::size_t>(bin)], ref) >= cfg.mac_floor;
    };
    int bell_lo = peak_bin;
    while (in_bell(bell_lo - 1)) --bell_lo;
    int bell_hi = peak_bin;
    while (in_bell(bell_hi + 1)) ++bell_hi;
    result.bell_bins = bell_hi - bell_lo + 1;
    if (result.bell_bins < cfg.min_bell_bins) return result;  // bell too narrow

    // two-sided spectrum of the isolated bell, then autocorrelation by IFFT
    const std::size_t n_fft = 2 * (static_cast<std::size_t>(bins) - 1);
    std::vector<std::complex<double>> spectrum(n_fft, 0.0);
    for (int b = bell_lo; b <= bell_hi; ++b) {
        const double v = svd.singular_values(static_cast<std::size_t>(b), 0);
        spectrum[static_cast<std::size_t>(b)] = v;
        if (b != 0 && static_cast<std::size_t>(b) != n_fft / 2) {
            spectrum[n_fft - static_cast<std::size_t>(b)] = v;
        }
    }
    const std::vector<std::complex<double>> corr = ifft(std::move(spectrum));
    const std::size_t lags = n_fft / 2;
    std::vector<double> r(lags);
    for (std::size_t i = 0; i < lags; ++i) r[i] = corr[i].real();
    if (!(std::abs(r[0]) > 0.0)) return result;
    for (auto& x : r) x /= std::abs(r[0]);

    // extrema of the decaying oscillation
    std::vector<std::size_t> extrema;
    for (std::size_t i = 1; i + 1 < lags; ++i) {
        const double a = std::abs(r[i]);
        if (a > std::abs(r[i - 1]) && a >= std::abs(r[i + 1]) && a > 1e-12) extrema.push_back(i);
        if (static_cast<int>(extrema.size()) > cfg.extremum_hi) break;
    }
    const int first = std::max(0, cfg.extremum_lo - 1);
    const int last = std::min(static_cast<int>(extrema.size()), cfg.extremum_hi);
    if (last - first < 3) return result;

    // least squares ln|r_i| = c - (delta/2) * i over the selected extrema
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    int count = 0;
    for (int i = first; i < last; ++i) {
        const double x = static_cast<double>(i);
        const double y = std::log(std::abs(r[extrema[static_cast<std::size_t>(i)]]));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++count;
    }
    const double slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);
    const double delta = -2.0 * slope;
    if (!(delta > 0.0) || !std::isfinite(delta)) return result;
    const double zeta = delta / std::sqrt(4.0 * 3.14159265358979323846 *
                                              3.14159265358979323846 +
                                          delta * delta);

    // zero crossings up to the last fitted extremum give the damped frequency
    const std::size_t span = extrema[static_cast<std::size_t>(last - 1)];
    int crossings = 0;
    for (std::size_t i = 1; i <= span; ++i) {
        if ((r[i - 1] >= 0.0) != (r[i] >= 0.0)) ++crossings;
    }
    const double df = svd.freq_axis[1] - svd.freq_axis[0];
    const double dt = 1.0 / (static_cast<double>(n_fft) * df);
    const double window_seconds = static_cast<double>(span) * dt;
    if (!(window_seconds > 0.0) || crossings == 0) return result;
    const double damped_freq = static_cast<double>(crossings) / (2.0 * window_seconds);

    result.available = true;
    result.damping = zeta;
    result.frequency = damped_freq / std::sqrt(1.0 - zeta * zeta);
    return result;
}

FddIdentification fdd_identify(const TimeHistory& history, const WelchConfig& welch_cfg,
                               const PeakPickConfig& pick_cfg, const EfddConfig& efdd_cfg,
                               double discard_seconds) {
    if (history.channel_count() < 2) throw ConfigError("FDD needs at least 2 channels");
    const auto start = std::chrono::steady_clock::now();

    const auto discard = static_cast<std::size_t>(std::llround(discard_seconds / history.dt));
    if (discard >= history.channels.cols()) throw TooShort("transient discard too long");
    Tensor trimmed(history.channels.rows(), history.channels.cols() - discard);
    for (std::size_t c = 0; c < trimmed.rows(); ++c) {
        const double* src = history.channels.data() + c * history.channels.cols() + discard;
        std::copy(src, src + trimmed.cols(), trimmed.data() + c * trimmed.cols());
    }

    const CrossPsd cross = cross_psd_matrix(trimmed, welch_cfg);
    const SvdSpectrum svd = svd_spectrum(cross);
    std::vector<double> sv1(svd.freq_axis.size());
    for (std::size_t m = 0; m < sv1.size(); ++m) sv1[m] = svd.singular_values(m, 0);
    const std::vector<int> peaks = pick_peaks(sv1, svd.freq_axis, pick_cfg);

    FddIdentification out;
    out.peak_bins = peaks;
    out.estimate.shapes = fdd_mode_shapes(svd, peaks);
    out.estimate.frequencies.resize(peaks.size());
    out.estimate.damping.resize(peaks.size());
    for (std::size_t j = 0; j < peaks.size(); ++j) {
        out.estimate.frequencies[j] = svd.freq_axis[static_cast<std::size_t>(peaks[j])];
        const EfddResult efdd = efdd_damping(svd, peaks[j], efdd_cfg);
        out.estimate.damping[j] =
            efdd.available ? efdd.damping : std::numeric_limits<double>::quiet_NaN();
    }
    out.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

}  // namespace oma
