#include "wipin/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "wipin/error.hpp"
#include "wipin/fft.hpp"

namespace wipin::dsp {

void ButterworthSpec::validate() const {
    if (order < 1) throw InvalidSpec("Butterworth order must be at least 1");
    if (!(sample_rate > 0.0) || !std::isfinite(sample_rate)) throw InvalidSpec("sample rate must be positive");
    if (!(cutoff > 0.0) || !(cutoff < sample_rate / 2.0))
        throw InvalidSpec("cutoff " + std::to_string(cutoff) + " Hz must lie in (0, " +
                          std::to_string(sample_rate / 2.0) + ") Hz");
}

FilterCoefficients design_butterworth_lowpass(const ButterworthSpec& spec) {
    spec.validate();
    using std::numbers::pi;
    const double fs2 = 2.0 * spec.sample_rate;
    const double warped = fs2 * std::tan(pi * spec.cutoff / spec.sample_rate);
    const int n = spec.order;

    auto to_z = [&](std::complex<double> s) { return (fs2 + s) / (fs2 - s); };

    FilterCoefficients out;
    // Upper-half-plane poles pair with their conjugates; an odd order adds
    // the real pole at -warped.
    for (int k = 0; k < n / 2; ++k) {
        const double theta = pi * (2.0 * k + n + 1.0) / (2.0 * n);
        const auto s = warped * std::complex<double>(std::cos(theta), std::sin(theta));
        const auto z = to_z(s);
        Biquad q;
        q.a1 = -2.0 * z.real();
        q.a2 = std::norm(z);
        const double g = (1.0 + q.a1 + q.a2) / 4.0;
        q.b0 = g;
        q.b1 = 2.0 * g;
        q.b2 = g;
        out.sections.push_back(q);
    }
    if (n % 2 == 1) {
        const double z = to_z({-warped, 0.0}).real();
        Biquad q;
        q.a1 = -z;
        const double g = (1.0 + q.a1) / 2.0;
        q.b0 = g;
        q.b1 = g;
        out.sections.push_back(q);
    }
    return out;
}

std::complex<double> frequency_response(const FilterCoefficients& coeffs, double frequency, double sample_rate) {
    const double w = 2.0 * std::numbers::pi * frequency / sample_rate;
    const auto z1 = std::polar(1.0, -w);
    const auto z2 = z1 * z1;
    std::complex<double> h = coeffs.gain;
    for (const auto& q : coeffs.sections) h *= (q.b0 + q.b1 * z1 + q.b2 * z2) / (1.0 + q.a1 * z1 + q.a2 * z2);
    return h;
}

double max_pole_radius(const FilterCoefficients& coeffs) {
    double r = 0.0;
    for (const auto& q : coeffs.sections) {
        // roots of z^2 + a1 z + a2
        const auto disc = std::complex<double>(q.a1 * q.a1 - 4.0 * q.a2, 0.0);
        const auto root = std::sqrt(disc);
        r = std::max({r, std::abs((-q.a1 + root) / 2.0), std::abs((-q.a1 - root) / 2.0)});
    }
    return r;
}

namespace {

// Transposed direct form II over one section.
void run_section(const Biquad& q, std::span<double> x, double level) {
    double s1 = (q.b1 - q.a1 + q.b2 - q.a2) * level;
    double s2 = (q.b2 - q.a2) * level;
    for (auto& v : x) {
        const double in = v;
        const double y = q.b0 * in + s1;
        s1 = q.b1 * in - q.a1 * y + s2;
        s2 = q.b2 * in - q.a2 * y;
        v = y;
    }
}

double block_mean(std::span<const double> x, std::size_t block) {
    const std::size_t n = std::min(block == 0 ? std::size_t{1} : block, x.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += x[i];
    return sum / static_cast<double>(n);
}

void forward_pass(const FilterCoefficients& coeffs, std::span<double> x, const LowpassOptions& opt) {
    if (x.empty()) return;
    const double level = opt.init == FilterInit::SteadyState ? block_mean(x, opt.init_block) : 0.0;
    for (const auto& q : coeffs.sections) run_section(q, x, level);
    if (coeffs.gain != 1.0)
        for (auto& v : x) v *= coeffs.gain;
}

} // namespace

void filter_sequence(const FilterCoefficients& coeffs, std::span<double> x, const LowpassOptions& opt) {
    forward_pass(coeffs, x, opt);
    if (opt.zero_phase) {
        std::reverse(x.begin(), x.end());
        forward_pass(coeffs, x, opt);
        std::reverse(x.begin(), x.end());
    }
}

AmplitudeMatrix apply_lowpass(const AmplitudeMatrix& matrix, const FilterCoefficients& coeffs,
                              const LowpassOptions& opt) {
    if (matrix.empty()) throw EmptyInput("apply_lowpass: empty amplitude matrix");
    const std::size_t rows = matrix.rows();
    AmplitudeMatrix out(rows, matrix.sample_rate());
    std::vector<double> column(rows);
    for (std::size_t c = 0; c < AmplitudeMatrix::cols(); ++c) {
        for (std::size_t r = 0; r < rows; ++r) column[r] = matrix(r, c);
        filter_sequence(coeffs, column, opt);
        for (std::size_t r = 0; r < rows; ++r) out(r, c) = std::max(0.0, column[r]);
    }
    return out;
}

std::size_t warmup_samples(const ButterworthSpec& spec) {
    return static_cast<std::size_t>(std::ceil(spec.sample_rate / spec.cutoff));
}

void MitigationConfig::validate() const {
    if (keep_taps < 1 || keep_taps > kSubcarriers) throw InvalidSpec("keep_taps must lie in [1, 30]");
    if (!(suppression_divisor >= 1.0) || !std::isfinite(suppression_divisor))
        throw InvalidSpec("suppression divisor must be finite and >= 1");
}

namespace {

const Fft& fft30() {
    static const Fft plan(kSubcarriers);
    return plan;
}

} // namespace

Profile mitigate_multipath(std::span<const double, kSubcarriers> profile, const MitigationConfig& config) {
    config.validate();
    std::array<std::complex<double>, kSubcarriers> freq{};
    for (std::size_t k = 0; k < kSubcarriers; ++k) {
        if (!std::isfinite(profile[k])) throw InvalidInput("mitigate_multipath: non-finite amplitude");
        freq[k] = profile[k];
    }
    std::array<std::complex<double>, kSubcarriers> taps{};
    const auto& fft = fft30();
    fft.inverse(freq, taps);
    const double scale = 1.0 / config.suppression_divisor;
    for (std::size_t k = config.keep_taps; k < kSubcarriers; ++k) taps[k] *= scale;
    fft.forward(taps, freq);
    Profile out{};
    for (std::size_t k = 0; k < kSubcarriers; ++k) out[k] = std::abs(freq[k]);
    return out;
}

AmplitudeMatrix mitigate_series(const AmplitudeMatrix& matrix, const MitigationConfig& config) {
    if (matrix.empty()) throw EmptyInput("mitigate_series: empty amplitude matrix");
    config.validate();
    AmplitudeMatrix out(matrix.rows(), matrix.sample_rate());
    for (std::size_t r = 0; r < matrix.rows(); ++r) {
        const auto row = mitigate_multipath(matrix.row(r), config);
        std::copy(row.begin(), row.end(), out.row(r).begin());
    }
    return out;
}

} // namespace wipin::dsp
