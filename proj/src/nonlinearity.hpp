#pragma once

#include <stdexcept>

namespace nlpme {

enum class MobilityKind { power, shifted_power, log_mobility };

/// The mobility family G'(u) multiplying the pressure gradient in the flux:
/// power u^{m-1}, shifted power (u+mu)^{m-1}, logarithmic 1/(1+u).
struct NonlinearitySpec {
  MobilityKind kind = MobilityKind::power;
  double m = 2.0;
  double mu = 0.0;

  void validate() const;

  /// G'(u) for u >= 0; negative u rejected.
  double mobility(double u) const;

  /// max of G' over [0, u_max]: the power families are nondecreasing, the
  /// logarithmic mobility peaks at u = 0.
  double mobility_bound(double u_max) const;
};

struct PsiPair {
  double psi;
  double big_psi;
};

/// The companion pair of the L^p energy machinery,
///   psi(z)  = \int_0^z zeta^{p-2} (zeta+mu)^{m-1} dzeta,
///   Psi(z)  = \int_0^z zeta^{(p-2)/2} (zeta+mu)^{(m-1)/2} dzeta,
/// closed forms for mu = 0, adaptive quadrature (rel. tol 1e-10) otherwise.
PsiPair psi_pair(double z, double p, double m, double mu);

/// Density of the first energy: u^{3-m} away from the log branches,
/// u log u at m = 2 (limit 0 at u = 0), u - log u at m = 3 (+inf at u = 0).
/// 0^{3-m} is 0 for m < 3; for m > 3 the density blows up at u = 0.
double first_energy_density(double u, double m);

/// Evaluators bound to one (p, m, mu) parameter set.
class EnergyFunctions {
public:
  EnergyFunctions(double p, double m, double mu);

  double p() const { return p_; }
  double m() const { return m_; }
  double mu() const { return mu_; }

  double psi(double z) const { return psi_pair(z, p_, m_, mu_).psi; }
  double big_psi(double z) const { return psi_pair(z, p_, m_, mu_).big_psi; }

private:
  double p_;
  double m_;
  double mu_;
};

} // namespace nlpme
