#ifndef LEMOLE_FFT_HPP
#define LEMOLE_FFT_HPP

#include <complex>
#include <cstddef>
#include <vector>

namespace lemole {

using cplx = std::complex<double>;

/// Unnormalized forward DFT, any length: X_k = sum_t x_t e^{-2*pi*i*k*t/n}.
std::vector<cplx> fft(std::vector<cplx> a);

/// Inverse DFT including the 1/n factor.
std::vector<cplx> ifft(std::vector<cplx> a);

/// Real FFT: returns the floor(n/2)+1 non-redundant bins of the unnormalized
/// forward transform. rfft of a constant c over n points has DC bin n*c.
std::vector<cplx> rfft(const std::vector<double>& x);

/// Inverse real FFT onto n points. Expects floor(n/2)+1 bins; the imaginary
/// parts of the DC and (even n) Nyquist bins are ignored, matching the
/// Hermitian-extension definition. Includes the 1/n factor.
std::vector<double> irfft(const std::vector<cplx>& spectrum, std::size_t n);

/// Adjoint of rfft as a real-linear map R^n -> R^{2K}: maps a spectrum
/// cotangent back to signal space.
std::vector<double> rfft_adjoint(const std::vector<cplx>& spectrum_grad, std::size_t n);

/// Adjoint of irfft: maps a signal cotangent of length n to spectrum space.
/// Interior bins pick up a factor 2/n, DC and Nyquist 1/n, with the DC and
/// Nyquist imaginary parts zeroed (they do not influence irfft output).
std::vector<cplx> irfft_adjoint(const std::vector<double>& signal_grad);

} // namespace lemole

#endif // LEMOLE_FFT_HPP
