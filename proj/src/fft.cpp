#include "wipin/fft.hpp"

#include <cmath>
#include <numbers>

#include "wipin/error.hpp"

namespace wipin {

namespace {

std::vector<std::size_t> prime_factors(std::size_t n) {
    std::vector<std::size_t> f;
    for (std::size_t p : {std::size_t{5}, std::size_t{3}, std::size_t{2}}) {
        while (n % p == 0) {
            f.push_back(p);
            n /= p;
        }
    }
    for (std::size_t p = 7; p * p <= n; p += 2) {
        while (n % p == 0) {
            f.push_back(p);
            n /= p;
        }
    }
    if (n > 1) f.push_back(n);
    return f;
}

} // namespace

Fft::Fft(std::size_t n) : n_(n), factors_(prime_factors(n)), twiddles_(n) {
    if (n == 0) throw InvalidInput("FFT length must be positive");
    for (std::size_t k = 0; k < n; ++k) {
        const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
        twiddles_[k] = {std::cos(angle), std::sin(angle)};
    }
}

void Fft::forward(std::span<const std::complex<double>> in, std::span<std::complex<double>> out) const {
    if (in.size() != n_ || out.size() != n_) throw InvalidInput("FFT buffer length mismatch");
    transform(in.data(), out.data(), n_, 1, 0, false);
}

void Fft::inverse(std::span<const std::complex<double>> in, std::span<std::complex<double>> out) const {
    if (in.size() != n_ || out.size() != n_) throw InvalidInput("FFT buffer length mismatch");
    transform(in.data(), out.data(), n_, 1, 0, true);
    const double scale = 1.0 / static_cast<double>(n_);
    for (auto& v : out) v *= scale;
}

// Computes the length-n DFT of in[0], in[stride], ... into out[0..n).
void Fft::transform(const std::complex<double>* in, std::complex<double>* out, std::size_t n, std::size_t stride,
                    std::size_t factor_index, bool inverse) const {
    if (n == 1) {
        out[0] = in[0];
        return;
    }
    const std::size_t radix = factors_[factor_index];
    const std::size_t m = n / radix;

    // Sub-transforms of the decimated sequences land in consecutive blocks.
    for (std::size_t r = 0; r < radix; ++r)
        transform(in + r * stride, out + r * m, m, stride * radix, factor_index + 1, inverse);

    // Twiddle step for this stage: W_n^{rk} == twiddles_[r k (N/n)].
    const std::size_t tw_step = n_ / n;
    auto twiddle = [&](std::size_t e) {
        const auto w = twiddles_[(e * tw_step) % n_];
        return inverse ? std::conj(w) : w;
    };

    std::vector<std::complex<double>> tmp(radix);
    for (std::size_t k = 0; k < m; ++k) {
        for (std::size_t r = 0; r < radix; ++r) tmp[r] = out[r * m + k] * twiddle(r * k);
        switch (radix) {
        case 2:
            out[k] = tmp[0] + tmp[1];
            out[k + m] = tmp[0] - tmp[1];
            break;
        case 3: {
            const double s = (inverse ? 1.0 : -1.0) * std::sqrt(3.0) / 2.0;
            const auto sum = tmp[1] + tmp[2];
            const auto diff = tmp[1] - tmp[2];
            const auto rot = std::complex<double>(-s * diff.imag(), s * diff.real());
            out[k] = tmp[0] + sum;
            out[k + m] = tmp[0] - 0.5 * sum + rot;
            out[k + 2 * m] = tmp[0] - 0.5 * sum - rot;
            break;
        }
        default:
            // Direct DFT across the radix; covers 5 and any larger prime.
            for (std::size_t q = 0; q < radix; ++q) {
                std::complex<double> acc = tmp[0];
                for (std::size_t r = 1; r < radix; ++r) acc += tmp[r] * twiddle((r * q * m) % n);
                out[k + q * m] = acc;
            }
            break;
        }
    }
}

} // namespace wipin
