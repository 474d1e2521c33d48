#pragma once

#include <complex>
#include <span>
#include <vector>

namespace wipin {

/// Mixed-radix decimation-in-time FFT planned for one fixed length.
///
/// The length is factored into primes (30 = 5 * 3 * 2). Radix-2 and radix-3
/// stages use explicit butterflies, any other prime factor a direct DFT
/// stage. Twiddles are tabulated at plan time.
///
/// Conventions: forward X[k] = sum x[n] e^{-2 pi i nk/N}; inverse carries the
/// 1/N factor so inverse(forward(x)) == x.
class Fft {
public:
    explicit Fft(std::size_t n);

    std::size_t size() const noexcept { return n_; }
    const std::vector<std::size_t>& factors() const noexcept { return factors_; }

    void forward(std::span<const std::complex<double>> in, std::span<std::complex<double>> out) const;
    void inverse(std::span<const std::complex<double>> in, std::span<std::complex<double>> out) const;

private:
    void transform(const std::complex<double>* in, std::complex<double>* out, std::size_t n, std::size_t stride,
                   std::size_t factor_index, bool inverse) const;

    std::size_t n_;
    std::vector<std::size_t> factors_;
    std::vector<std::complex<double>> twiddles_;  // e^{-2 pi i k/N}, k in [0, N)
};

} // namespace wipin
