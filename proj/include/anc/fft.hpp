#pragma once

#include <complex>
#include <span>
#include <vector>

// Thin wrappers over FFTW's real transforms. Plans are built with
// FFTW_ESTIMATE so the chosen algorithm, and therefore the rounding, is the
// same on every run.
namespace anc::fft {

/// Unnormalised real-to-complex DFT; returns len/2 + 1 bins.
std::vector<std::complex<double>> forward_real(std::span<const double> x);

/// Inverse of forward_real for a length-`n` real signal, scaled by 1/n so
/// inverse_real(forward_real(x), len(x)) == x up to rounding.
std::vector<double> inverse_real(std::span<const std::complex<double>> spectrum, std::size_t n);

}  // namespace anc::fft
