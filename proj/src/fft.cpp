#include "lemole/fft.hpp"

#include <cmath>

#include "lemole/errors.hpp"

namespace lemole {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// In-place iterative radix-2 Cooley-Tukey. sign = -1 forward, +1 inverse
// (inverse here is unnormalized; callers divide by n).
void fft_pow2(std::vector<cplx>& a, int sign) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = sign * 2.0 * kPi / static_cast<double>(len);
        const cplx wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const cplx u = a[i + k];
                const cplx v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

// Bluestein's algorithm: expresses a length-n DFT as a convolution, which is
// evaluated with power-of-two FFTs. Handles any n.
std::vector<cplx> fft_bluestein(const std::vector<cplx>& a, int sign) {
    const std::size_t n = a.size();
    const std::size_t m = next_pow2(2 * n - 1);

    // Chirp e^{sign*pi*i*k^2/n}; k^2 mod 2n keeps the angle argument small.
    std::vector<cplx> chirp(n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t k2 = (k * k) % (2 * n);
        const double ang = sign * kPi * static_cast<double>(k2) / static_cast<double>(n);
        chirp[k] = cplx(std::cos(ang), std::sin(ang));
    }

    std::vector<cplx> u(m, cplx(0.0, 0.0));
    std::vector<cplx> v(m, cplx(0.0, 0.0));
    for (std::size_t k = 0; k < n; ++k) u[k] = a[k] * chirp[k];
    v[0] = std::conj(chirp[0]);
    for (std::size_t k = 1; k < n; ++k) v[k] = v[m - k] = std::conj(chirp[k]);

    fft_pow2(u, -1);
    fft_pow2(v, -1);
    for (std::size_t k = 0; k < m; ++k) u[k] *= v[k];
    fft_pow2(u, +1);

    std::vector<cplx> out(n);
    const double scale = 1.0 / static_cast<double>(m);
    for (std::size_t k = 0; k < n; ++k) out[k] = u[k] * scale * chirp[k];
    return out;
}

std::vector<cplx> fft_any(std::vector<cplx> a, int sign) {
    if (a.size() <= 1) return a;
    if (is_pow2(a.size())) {
        fft_pow2(a, sign);
        return a;
    }
    return fft_bluestein(a, sign);
}

} // namespace

std::vector<cplx> fft(std::vector<cplx> a) { return fft_any(std::move(a), -1); }

std::vector<cplx> ifft(std::vector<cplx> a) {
    const std::size_t n = a.size();
    auto out = fft_any(std::move(a), +1);
    const double scale = n ? 1.0 / static_cast<double>(n) : 1.0;
    for (auto& v : out) v *= scale;
    return out;
}

std::vector<cplx> rfft(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<cplx> a(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = cplx(x[i], 0.0);
    auto full = fft_any(std::move(a), -1);
    full.resize(n / 2 + 1);
    return full;
}

std::vector<double> irfft(const std::vector<cplx>& spectrum, std::size_t n) {
    const std::size_t bins = n / 2 + 1;
    if (spectrum.size() != bins)
        fail(ErrorCode::LengthMismatch, "irfft expects floor(n/2)+1 bins");
    std::vector<cplx> full(n);
    for (std::size_t k = 0; k < bins; ++k) full[k] = spectrum[k];
    for (std::size_t k = bins; k < n; ++k) full[k] = std::conj(spectrum[n - k]);
    auto t = ifft(std::move(full));
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = t[i].real();
    return out;
}

std::vector<double> rfft_adjoint(const std::vector<cplx>& spectrum_grad, std::size_t n) {
    const std::size_t bins = n / 2 + 1;
    if (spectrum_grad.size() != bins)
        fail(ErrorCode::LengthMismatch, "rfft_adjoint expects floor(n/2)+1 bins");
    // x_grad[t] = Re( sum_k conj(g_k) e^{-2*pi*i*k*t/n} ): one forward DFT of
    // the zero-padded conjugated cotangent.
    std::vector<cplx> g(n, cplx(0.0, 0.0));
    for (std::size_t k = 0; k < bins; ++k) g[k] = std::conj(spectrum_grad[k]);
    auto t = fft_any(std::move(g), -1);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = t[i].real();
    return out;
}

std::vector<cplx> irfft_adjoint(const std::vector<double>& signal_grad) {
    const std::size_t n = signal_grad.size();
    if (n == 0) fail(ErrorCode::LengthMismatch, "irfft_adjoint on empty signal");
    const std::size_t bins = n / 2 + 1;
    auto spec = rfft(signal_grad);
    std::vector<cplx> out(bins);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t k = 0; k < bins; ++k) {
        const bool boundary = (k == 0) || (n % 2 == 0 && k == n / 2);
        const double w = boundary ? inv_n : 2.0 * inv_n;
        out[k] = boundary ? cplx(spec[k].real() * w, 0.0) : spec[k] * w;
    }
    return out;
}

} // namespace lemole
