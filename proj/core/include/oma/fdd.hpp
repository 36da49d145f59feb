#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "oma/graph_model.hpp"
#include "oma/spectral.hpp"
#include "oma/tensor.hpp"

namespace oma {

/// Per-bin singular values (descending) and first singular vector of the
/// cross-PSD matrix. For a Hermitian PSD matrix this is its eigendecomposition.
struct SvdSpectrum {
    std::vector<double> freq_axis;
    Tensor singular_values;                    // bins x N, descending per row
    std::vector<Eigen::VectorXcd> first_vectors;  // unit norm
    std::vector<bool> bin_ok;                  // false when the solver failed
};

struct PeakPickConfig {
    int modes = 4;
    double min_separation_hz = 0.0;   // 0 -> 5 * bin width
    double prominence_floor = 0.01;   // fraction of the global sv1 max
    double band_lo_hz = 0.5;
    double band_hi_hz = 0.0;          // 0 -> 0.98 * Nyquist
};

struct EfddConfig {
    double mac_floor = 0.8;
    double sigma_rel_floor = 0.01;  // bell also ends where sv1 drops below this fraction of peak
    int extremum_lo = 2;            // autocorrelation extrema used in the decrement fit
    int extremum_hi = 10;
    int min_bell_bins = 3;
};

SvdSpectrum svd_spectrum(const CrossPsd& cross);

/// Local maxima of the first singular value curve filtered by prominence and
/// separation; the `modes` most prominent are returned ascending by frequency.
/// Throws InsufficientPeaks (carrying the found count) when too few survive.
std::vector<int> pick_peaks(std::span<const double> sv1, std::span<const double> freq_axis,
                            const PeakPickConfig& cfg);

/// |first singular vector| at each peak, columns scaled to max 1.
Tensor fdd_mode_shapes(const SvdSpectrum& svd, const std::vector<int>& peaks);

struct EfddResult {
    bool available = false;
    double damping = 0.0;    // fraction of critical
    double frequency = 0.0;  // enhanced estimate, Hz
    int bell_bins = 0;
};

/// SDOF-bell autocorrelation damping: bins around the peak stay in the bell
/// while their first singular vector keeps MAC >= mac_floor with the peak's
/// and sv1 stays above sigma_rel_floor * peak. The bell spectrum is inverse
/// transformed and a least-squares logarithmic decrement is fitted over the
/// configured extrema; zeta = delta / sqrt(4 pi^2 + delta^2). The enhanced
/// frequency comes from the autocorrelation zero-crossing count.
EfddResult efdd_damping(const SvdSpectrum& svd, int peak_bin, const EfddConfig& cfg = {});

struct FddIdentification {
    ModalEstimate estimate;   // damping entries are NaN where EFDD was unavailable
    std::vector<int> peak_bins;
    double wall_seconds = 0.0;
};

/// cross_psd_matrix -> svd_spectrum -> pick_peaks -> shapes + EFDD damping.
FddIdentification fdd_identify(const TimeHistory& history, const WelchConfig& welch_cfg,
                               const PeakPickConfig& pick_cfg, const EfddConfig& efdd_cfg = {},
                               double discard_seconds = 0.0);

/// MAC for complex vectors: |u^H v|^2 / (|u|^2 |v|^2).
double complex_mac(const Eigen::VectorXcd& u, const Eigen::VectorXcd& v);

}  // namespace oma
