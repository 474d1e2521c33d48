#pragma once

#include <array>
#include <complex>
#include <span>
#include <vector>

#include "wipin/csi.hpp"

namespace wipin::dsp {

struct ButterworthSpec {
    int order = 5;
    double cutoff = 10.0;       // Hz
    double sample_rate = 500.0; // Hz

    /// Throws InvalidSpec unless order >= 1 and 0 < cutoff < sample_rate / 2.
    void validate() const;
};

/// One biquad: H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2).
/// First-order sections carry b2 == a2 == 0.
struct Biquad {
    double b0 = 1.0, b1 = 0.0, b2 = 0.0;
    double a1 = 0.0, a2 = 0.0;
};

struct FilterCoefficients {
    std::vector<Biquad> sections;
    double gain = 1.0;
};

/// Digital Butterworth low-pass via the bilinear transform with the cutoff
/// pre-warped, factored into second-order sections (plus one first-order
/// section for odd orders). Each section is normalised to unit DC gain.
FilterCoefficients design_butterworth_lowpass(const ButterworthSpec& spec);

/// Complex response of the cascade at `frequency` Hz.
std::complex<double> frequency_response(const FilterCoefficients& coeffs, double frequency, double sample_rate);

/// Largest pole radius across all sections.
double max_pole_radius(const FilterCoefficients& coeffs);

/// Initial state of the filter.
enum class FilterInit {
    Zero,       // start from rest
    SteadyState // start as if the input had held the mean of the first warm-up block forever
};

struct LowpassOptions {
    FilterInit init = FilterInit::SteadyState;
    bool zero_phase = false; // forward-backward pass instead of causal forward-only
    std::size_t init_block = 50;
};

/// Filters one sequence in place.
void filter_sequence(const FilterCoefficients& coeffs, std::span<double> x, const LowpassOptions& opt = {});

/// Filters every subcarrier column independently and clamps the result at 0.
AmplitudeMatrix apply_lowpass(const AmplitudeMatrix& matrix, const FilterCoefficients& coeffs,
                              const LowpassOptions& opt = {});

/// Number of leading samples flagged as filter warm-up: ceil(fs / cutoff).
std::size_t warmup_samples(const ButterworthSpec& spec);

struct MitigationConfig {
    std::size_t keep_taps = 1;
    double suppression_divisor = 1000.0;

    void validate() const;
};

using Profile = std::array<double, kSubcarriers>;

/// |FFT(suppress(IFFT(profile)))|: keeps delay taps [0, keep_taps) and
/// divides the later taps by the suppression divisor.
Profile mitigate_multipath(std::span<const double, kSubcarriers> profile, const MitigationConfig& config = {});

/// Row-wise mitigate_multipath.
AmplitudeMatrix mitigate_series(const AmplitudeMatrix& matrix, const MitigationConfig& config = {});

} // namespace wipin::dsp
