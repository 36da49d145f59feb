#include "oma/spectral.hpp"

#include <cmath>

#include "oma/errors.hpp"

namespace oma {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::vector<double> hann_window(std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = 0.5 * (1.0 - std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n)));
    }
    return w;
}

struct SegmentPlan {
    std::size_t length;
    std::size_t hop;
    std::size_t count;
};

SegmentPlan plan_segments(std::size_t samples, const WelchConfig& cfg) {
    cfg.validate();
    const auto length = static_cast<std::size_t>(cfg.segment_length);
    if (samples < length) throw TooShort("signal shorter than one Welch segment");
    auto hop = static_cast<std::size_t>(std::lround((1.0 - cfg.overlap) * cfg.segment_length));
    if (hop == 0) hop = 1;
    return {length, hop, (samples - length) / hop + 1};
}

}  // namespace

void WelchConfig::validate() const {
    if (segment_length < 2 || !is_power_of_two(static_cast<std::size_t>(segment_length))) {
        throw BadLength("segment_length must be a power of two >= 2");
    }
    if (overlap < 0.0 || overlap >= 1.0) throw ConfigError("overlap must be in [0, 1)");
    if (!(sample_rate > 0.0)) throw ConfigError("sample rate must be positive");
}

void fft_inplace(std::vector<std::complex<double>>& data) {
    const std::size_t n = data.size();
    if (!is_power_of_two(n)) throw BadLength("FFT length must be a power of two");
    // bit-reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(data[i], data[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double angle = -2.0 * kPi / static_cast<double>(len);
        const std::complex<double> wn(std::cos(angle), std::sin(angle));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = data[i + k];
                const std::complex<double> v = data[i + k + len / 2] * w;
                data[i + k] = u + v;
                data[i + k + len / 2] = u - v;
                w *= wn;
            }
        }
    }
}

std::vector<std::complex<double>> fft(std::span<const double> signal, std::size_t n) {
    if (!is_power_of_two(n)) throw BadLength("FFT length must be a power of two");
    if (signal.size() > n) throw BadLength("signal longer than FFT length");
    std::vector<std::complex<double>> data(n);
    for (std::size_t i = 0; i < signal.size(); ++i) data[i] = signal[i];
    fft_inplace(data);
    return data;
}

std::vector<std::complex<double>> ifft(std::vector<std::complex<double>> spectrum) {
    const std::size_t n = spectrum.size();
    for (auto& x : spectrum) x = std::conj(x);
    fft_inplace(spectrum);
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& x : spectrum) x = std::conj(x) * inv;
    return spectrum;
}

std::pair<std::vector<double>, std::vector<double>> welch_psd(std::span<const double> channel,
                                                              const WelchConfig& cfg) {
    const SegmentPlan plan = plan_segments(channel.size(), cfg);
    const std::vector<double> window = hann_window(plan.length);
    double window_power = 0.0;
    for (double w : window) window_power += w * w;

    const std::size_t bins = plan.length / 2 + 1;
    std::vector<double> psd(bins, 0.0);
    std::vector<std::complex<double>> buf(plan.length);
    for (std::size_t s = 0; s < plan.count; ++s) {
        const double* seg = channel.data() + s * plan.hop;
        for (std::size_t i = 0; i < plan.length; ++i) buf[i] = seg[i] * window[i];
        fft_inplace(buf);
        for (std::size_t m = 0; m < bins; ++m) {
            psd[m] += std::norm(buf[m]);
        }
    }
    const double scale = 1.0 / (static_cast<double>(plan.count) * cfg.sample_rate * window_power);
    for (std::size_t m = 0; m < bins; ++m) {
        const bool interior = m != 0 && m != bins - 1;
        psd[m] *= scale * (interior ? 2.0 : 1.0);
    }
    std::vector<double> freq(bins);
    for (std::size_t m = 0; m < bins; ++m) freq[m] = static_cast<double>(m) * cfg.bin_width();
    return {std::move(psd), std::move(freq)};
}

CrossPsd cross_psd_matrix(const Tensor& channels, const WelchConfig& cfg) {
    const std::size_t n = channels.rows();
    const SegmentPlan plan = plan_segments(channels.cols(), cfg);
    const std::vector<double> window = hann_window(plan.length);
    double window_power = 0.0;
    for (double w : window) window_power += w * w;
    const std::size_t bins = plan.length / 2 + 1;

    // per-channel, per-segment spectra
    std::vector<std::vector<std::complex<double>>> spectra(n * plan.count);
    std::vector<std::complex<double>> buf(plan.length);
    for (std::size_t c = 0; c < n; ++c) {
        const double* row = channels.data() + c * channels.cols();
        for (std::size_t s = 0; s < plan.count; ++s) {
            const double* seg = row + s * plan.hop;
            for (std::size_t i = 0; i < plan.length; ++i) buf[i] = seg[i] * window[i];
            fft_inplace(buf);
            spectra[c * plan.count + s].assign(buf.begin(), buf.begin() + bins);
        }
    }

    CrossPsd out;
    out.freq_axis.resize(bins);
    for (std::size_t m = 0; m < bins; ++m) out.freq_axis[m] = static_cast<double>(m) * cfg.bin_width();
    out.bins.assign(bins, Eigen::MatrixXcd::Zero(n, n));
    const double base_scale =
        1.0 / (static_cast<double>(plan.count) * cfg.sample_rate * window_power);
    for (std::size_t m = 0; m < bins; ++m) {
        const bool interior = m != 0 && m != bins - 1;
        const double scale = base_scale * (interior ? 2.0 : 1.0);
        Eigen::MatrixXcd& g = out.bins[m];
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i; j < n; ++j) {
                std::complex<double> acc(0.0, 0.0);
                for (std::size_t s = 0; s < plan.count; ++s) {
                    acc += spectra[i * plan.count + s][m] * std::conj(spectra[j * plan.count + s][m]);
                }
                acc *= scale;
                g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = acc;
                if (j != i) {
                    g(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = std::conj(acc);
                } else {
                    g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) =
                        std::complex<double>(acc.real(), 0.0);
                }
            }
        }
    }
    return out;
}

TimeHistory inject_noise(const TimeHistory& history, double level, RandomStream& rng) {
    if (level < 0.0) throw ConfigError("noise level must be >= 0");
    if (level == 0.0) return history;
    TimeHistory out = history;
    const std::size_t cols = out.channels.cols();
    for (std::size_t c = 0; c < out.channels.rows(); ++c) {
        double* row = out.channels.data() + c * cols;
        double power = 0.0;
        for (std::size_t i = 0; i < cols; ++i) power += row[i] * row[i];
        const double rms = std::sqrt(power / static_cast<double>(cols));
        const double sd = level * rms;
        for (std::size_t i = 0; i < cols; ++i) row[i] += rng.normal(0.0, sd);
    }
    return out;
}

PsdSet normalize_psd_set(PsdSet psd) {
    if (psd.known.size() != psd.values.rows()) throw ShapeMismatch("known mask size mismatch");
    double peak = 0.0;
    bool any_known = false;
    for (std::size_t r = 0; r < psd.values.rows(); ++r) {
        if (!psd.known[r]) continue;
        any_known = true;
        for (std::size_t m = 0; m < psd.values.cols(); ++m) {
            peak = std::max(peak, psd.values(r, m));
        }
    }
    if (!any_known || !(peak > 0.0)) {
        throw AllZero("no positive PSD entry among known rows");
    }
    for (std::size_t r = 0; r < psd.values.rows(); ++r) {
        if (!psd.known[r]) continue;
        for (std::size_t m = 0; m < psd.values.cols(); ++m) {
            psd.values(r, m) /= peak;
        }
    }
    psd.normalized = true;
    return psd;
}

PsdSet compute_psd_set(const TimeHistory& history, const WelchConfig& cfg,
                       double discard_seconds) {
    const auto discard = static_cast<std::size_t>(std::llround(discard_seconds / history.dt));
    if (discard >= history.channels.cols()) throw TooShort("transient discard longer than signal");
    const std::size_t usable = history.channels.cols() - discard;
    PsdSet psd;
    psd.known.assign(history.channels.rows(), true);
    for (std::size_t c = 0; c < history.channels.rows(); ++c) {
        const double* row = history.channels.data() + c * history.channels.cols() + discard;
        auto [values, freq] = welch_psd(std::span<const double>(row, usable), cfg);
        if (c == 0) {
            psd.freq_axis = std::move(freq);
            psd.values = Tensor(history.channels.rows(), values.size());
        }
        for (std::size_t m = 0; m < values.size(); ++m) psd.values(c, m) = values[m];
    }
    return psd;
}

}  // namespace oma
