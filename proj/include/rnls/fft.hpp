#pragma once

#include <span>

#include "rnls/field.hpp"

namespace rnls::fft {

/// Unnormalized forward DFT over all axes of `grid` (exp(-i k x) convention).
void forward(const Grid& grid, std::span<const cplx> in, std::span<cplx> out);
/// Inverse DFT including the 1/n^dim normalization.
void inverse(const Grid& grid, std::span<const cplx> in, std::span<cplx> out);

/// One-dimensional transforms of length n, used for per-axis work.
void forward_1d(int n, std::span<const cplx> in, std::span<cplx> out);
void inverse_1d(int n, std::span<const cplx> in, std::span<cplx> out);

}  // namespace rnls::fft
