#pragma once

#include <complex>
#include <stdexcept>
#include <vector>

#include "grid.hpp"

namespace nlpme {

/// Raised when the symbol quadrature cannot reach its tolerance.
class QuadratureError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class OperatorMode { exact_symbol, regularized_symbol, regularized_kernel };

/// One nonlocal operator instance: order s, regularization epsilon, kernel
/// normalization constant, and how the operator is realized.
struct FracOperatorSpec {
  double s = 0.5;
  double epsilon = 0.0;
  double c_norm = 0.0; // <= 0 selects the standard constant for (dim, s)
  OperatorMode mode = OperatorMode::exact_symbol;

  void validate(int dim) const;
};

/// Standard normalization 4^s Gamma(N/2+s) / (pi^{N/2} |Gamma(-s)|), the
/// constant for which the singular-integral form reproduces the Fourier
/// symbol |xi|^{2s} exactly.
double fraclap_normalization(int dim, double s);

/// Per-frequency values of a real, |xi|-radial Fourier multiplier.
struct SymbolTable {
  GridPtr grid;
  std::vector<double> values; // one entry per flat mode index
};

struct SymbolQuadratureResult {
  double value = 0.0;
  double abs_error = 0.0;
};

/// S_{L^s_eps}(xi) = c_norm * \int (1 - cos(z.xi)) (|z|^2+eps^2)^{-(N+2s)/2} dz,
/// reduced to a radial integral (cosine average in 2D) and evaluated by
/// adaptive Gauss-Kronrod panels split at |z| = eps and |z| = pi/|xi|, with
/// the oscillatory tail summed by Fourier/series-accelerated quadrature.
/// Relative tolerance 1e-9; failure to converge throws QuadratureError.
SymbolQuadratureResult regularized_symbol_point(double xi_mag, double s, double epsilon,
                                                int dim, double c_norm);

/// Tabulate the regularized symbol on every grid frequency. S(0) = 0.
SymbolTable regularized_symbol(const Grid& grid, double s, double epsilon, double c_norm = 0.0);

// ---------------------------------------------------------------------------
// Exact-symbol multiplier operators. All act spectrally; outputs are real.
// ---------------------------------------------------------------------------

/// (-Delta)^s u, symbol |xi|^{2s}. s in (0,1]; s = 1 is the classical
/// Laplacian (kept for oracles).
Field apply_frac_laplacian(const Field& field, double s);

/// (-Delta)^{-s} u, symbol |xi|^{-2s} with the zero mode set to 0 (the
/// pressure is defined up to a constant). Rejected for dim = 1, s >= 1/2
/// where the Riesz potential is ill defined; use the nonlocal gradient.
Field apply_inverse_frac_laplacian(const Field& field, double s);

/// Component `axis` of the nonlocal gradient grad (-Delta)^{-s} u. Symbol
/// i xi_axis |xi|^{-2s}; in 1D this is i sign(xi) |xi|^{1-2s}, well defined
/// for every s in (0,1). Odd symbol: Nyquist mode zeroed.
Field apply_nonlocal_gradient(const Field& field, double s, int axis);

enum class HalfOperator {
  positive_half,     // (-Delta)^{s/2},     symbol |xi|^s
  negative_half,     // (-Delta)^{-s/2},    symbol |xi|^{-s}, zero mode -> 0
  one_minus_s_half,  // (-Delta)^{(1-s)/2}, symbol |xi|^{1-s}
};

Field apply_half_operator(const Field& field, HalfOperator kind, double s);

/// e^{delta t Laplacian} u, symbol exp(-delta t |xi|^2). Mass exact.
Field apply_heat_semigroup(const Field& field, double delta, double t);

// ---------------------------------------------------------------------------
// The regularized operator L^s_eps with its square root.
// ---------------------------------------------------------------------------

/// L^s_eps[u](x) = c \int (u(x)-u(y)) (|x-y|^2+eps^2)^{-(N+2s)/2} dy on the
/// torus, realized either through the quadrature symbol or through the
/// tabulated periodized kernel (3^N images) as a circulant convolution.
/// Symbol tables are precomputed at construction; application to distinct
/// fields is safe concurrently.
class RegularizedOperator {
public:
  RegularizedOperator(GridPtr grid, FracOperatorSpec spec);

  const FracOperatorSpec& spec() const { return spec_; }
  const SymbolTable& symbol() const { return symbol_; }

  Field apply(const Field& field) const;

  /// (L^s_eps)^{1/2}: multiplier sqrt(S). Satisfies
  /// <u, L u> = ||L^{1/2} u||_2^2 by construction.
  Field apply_sqrt(const Field& field) const;

  /// ||J^s_eps||_{L^1(R^N)} in closed form.
  double kernel_l1() const;

  /// Kernel mass lost to the 3^N-image truncation of the periodization
  /// (upper bound): the kernel decays like |z|^{-N-2s}, so the discarded
  /// images carry at most this much of ||J||_1.
  double image_tail_bound() const;

private:
  GridPtr grid_;
  FracOperatorSpec spec_;
  SymbolTable symbol_;
  std::vector<std::complex<double>> multiplier_;
  std::vector<std::complex<double>> sqrt_multiplier_;
};

} // namespace nlpme
