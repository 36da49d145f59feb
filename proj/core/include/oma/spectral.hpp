#pragma once

#include <Eigen/Dense>
#include <complex>
#include <span>
#include <vector>

#include "oma/fem.hpp"
#include "oma/rng.hpp"
#include "oma/tensor.hpp"

namespace oma {

/// Welch estimator settings. The window is Hann (the only option); overlap is
/// a fraction of the segment length.
struct WelchConfig {
    int segment_length = 1024;  // power of two
    double overlap = 0.5;
    double sample_rate = 200.0;  // Hz

    int bin_count() const { return segment_length / 2 + 1; }
    double bin_width() const { return sample_rate / segment_length; }
    void validate() const;
};

/// One-sided auto-PSD per node plus the frequency axis. `known` marks nodes
/// whose row holds a measurement; `normalized` means the known rows were
/// jointly scaled so the global maximum is 1.
struct PsdSet {
    Tensor values;                 // N x M, (m/s^2)^2 / Hz before normalization
    std::vector<double> freq_axis; // M ascending, Hz
    std::vector<bool> known;       // per node
    bool normalized = false;
};

/// Radix-2 forward DFT, in place. Throws BadLength unless size is a power of two.
void fft_inplace(std::vector<std::complex<double>>& data);

/// DFT of a real signal zero-padded to length n (power of two).
std::vector<std::complex<double>> fft(std::span<const double> signal, std::size_t n);

std::vector<std::complex<double>> ifft(std::vector<std::complex<double>> spectrum);

/// Hann-windowed overlapped averaged one-sided periodogram with
/// window-power compensation, density scaling (per Hz).
std::pair<std::vector<double>, std::vector<double>> welch_psd(std::span<const double> channel,
                                                              const WelchConfig& cfg);

/// Per-bin N x N Hermitian cross-PSD matrices; the diagonal matches welch_psd
/// of each channel.
struct CrossPsd {
    std::vector<Eigen::MatrixXcd> bins;  // M matrices, N x N
    std::vector<double> freq_axis;
};
CrossPsd cross_psd_matrix(const Tensor& channels, const WelchConfig& cfg);

/// Adds i.i.d. Gaussian noise per channel with sd = level * channel RMS.
/// level = 0 returns the input unchanged.
TimeHistory inject_noise(const TimeHistory& history, double level, RandomStream& rng);

/// Divides every known row by the single global maximum over known rows.
PsdSet normalize_psd_set(PsdSet psd);

/// Drops the leading transient then runs welch_psd on every channel.
PsdSet compute_psd_set(const TimeHistory& history, const WelchConfig& cfg,
                       double discard_seconds);

}  // namespace oma
