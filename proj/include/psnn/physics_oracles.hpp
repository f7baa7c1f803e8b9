#pragma once

// Independent numerical validators for the closed-form activation
// probabilities in neuron_models.hpp:
//   - RK4 integration of the single-photon moment equations (TSP),
//   - Gillespie simulation of the two-state quantum-dot telegraph process (SET),
//   - Poisson photon-count Monte Carlo (SPD).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "psnn/errors.hpp"
#include "psnn/neuron_models.hpp"
#include "psnn/random.hpp"

namespace psnn {

/// (varpi^10(a^dagger), varpi^10(b^dagger)) at a given time. The b-mode
/// occupation factorizes as |wb|^2 and is bounded by one.
struct MomentState {
  std::complex<double> wa{0.0, 0.0};
  std::complex<double> wb{0.0, 0.0};
  double time = 0.0;

  double occupation() const { return std::norm(wb); }
};

struct OccupationSample {
  double time;
  double occupation;
};

namespace detail {

// Exponentially decaying single-photon envelope xi(t) = sqrt(zeta) e^{-zeta t / 2}.
inline double photon_envelope(double zeta, double t) {
  return t < 0 ? 0.0 : std::sqrt(zeta) * std::exp(-0.5 * zeta * t);
}

struct MomentDerivative {
  std::complex<double> dwa;
  std::complex<double> dwb;
};

// d/dt [wa, wb] = [[-kappa/2, i alpha], [i alpha, -gamma/2]] [wa, wb] + [-sqrt(kappa) xi(t), 0]
inline MomentDerivative moment_rhs(const TspParams& p, double alpha, double t,
                                   std::complex<double> wa, std::complex<double> wb) {
  const std::complex<double> i_alpha(0.0, alpha);
  return {-0.5 * p.kappa * wa + i_alpha * wb - std::sqrt(p.kappa) * photon_envelope(p.zeta, t),
          i_alpha * wa - 0.5 * p.gamma * wb};
}

}  // namespace detail

/// Fixed-step classical RK4 integration of the moment ODE from vacuum at
/// t = 0 to params.t. The step is params.t / ceil(params.t / dt), i.e. the
/// largest uniform step not exceeding dt. Returns one sample per step
/// including the initial state; the last sample is the oracle value of
/// tsp_probability(params, alpha).
inline std::vector<OccupationSample> fsme_integrate(const TspParams& params, double alpha, double dt) {
  params.validate();
  if (!(std::isfinite(alpha))) throw DomainError("fsme_integrate: alpha must be finite");
  if (!(dt > 0) || dt > params.t / 100.0 * (1.0 + 1e-12))
    throw DomainError("fsme_integrate: dt must satisfy 0 < dt <= t/100");

  const auto steps = static_cast<std::size_t>(std::ceil(params.t / dt - 1e-9));
  const double h = params.t / static_cast<double>(steps);

  std::vector<OccupationSample> trajectory;
  trajectory.reserve(steps + 1);
  MomentState s;
  trajectory.push_back({0.0, 0.0});
  for (std::size_t n = 0; n < steps; ++n) {
    const double t0 = static_cast<double>(n) * h;
    const auto k1 = detail::moment_rhs(params, alpha, t0, s.wa, s.wb);
    const auto k2 = detail::moment_rhs(params, alpha, t0 + 0.5 * h, s.wa + 0.5 * h * k1.dwa,
                                       s.wb + 0.5 * h * k1.dwb);
    const auto k3 = detail::moment_rhs(params, alpha, t0 + 0.5 * h, s.wa + 0.5 * h * k2.dwa,
                                       s.wb + 0.5 * h * k2.dwb);
    const auto k4 = detail::moment_rhs(params, alpha, t0 + h, s.wa + h * k3.dwa, s.wb + h * k3.dwb);
    s.wa += h / 6.0 * (k1.dwa + 2.0 * k2.dwa + 2.0 * k3.dwa + k4.dwa);
    s.wb += h / 6.0 * (k1.dwb + 2.0 * k2.dwb + 2.0 * k3.dwb + k4.dwb);
    s.time = static_cast<double>(n + 1) * h;
    const double occ = s.occupation();
    if (!(occ <= 1.0 + 1e-6))
      throw PhysicsViolationError("fsme_integrate: b-mode occupation " + std::to_string(occ) +
                                  " exceeds 1 at t=" + std::to_string(s.time));
    trajectory.push_back({s.time, occ});
  }
  return trajectory;
}

/// Final b-mode occupation of fsme_integrate.
inline double fsme_occupation(const TspParams& params, double alpha, double dt) {
  return fsme_integrate(params, alpha, dt).back().occupation;
}

/// Two-state quantum dot coupled to source and drain leads.
struct TelegraphConfig {
  double gamma_s = 1.0;          ///< source coupling Gamma_S
  double gamma_d = 1.0;          ///< drain coupling Gamma_D
  double epsilon_over_kt = 0.0;  ///< dot level in units of k_B T
  double horizon = 5e4;          ///< total simulated time
  double burn_in = 5.0;          ///< initial time discarded from the average

  double total_rate() const { return gamma_s + gamma_d; }

  /// Default burn-in: ten relaxation times 1/Gamma.
  static TelegraphConfig with_defaults(double epsilon_over_kt, double gamma_s, double gamma_d,
                                       double horizon) {
    return {gamma_s, gamma_d, epsilon_over_kt, horizon, 10.0 / (gamma_s + gamma_d)};
  }

  void validate() const {
    if (!(gamma_s > 0 && gamma_d > 0)) throw DomainError("TelegraphConfig: couplings must be > 0");
    if (std::isnan(epsilon_over_kt)) throw DomainError("TelegraphConfig: dot level is NaN");
    if (!(burn_in >= 0 && horizon > burn_in && std::isfinite(horizon)))
      throw DomainError("TelegraphConfig: need horizon > burn_in >= 0");
  }
};

/// Fermi-Dirac occupation n_F = 1 / (1 + e^{eps/kT}).
inline double fermi_occupation(double epsilon_over_kt) {
  return 1.0 - set_probability(epsilon_over_kt);
}

/// Gillespie simulation of the dot occupation with tunnelling-in rate
/// Gamma (1 - n_F) and tunnelling-out rate Gamma n_F. Returns the fraction
/// of [burn_in, horizon] spent occupied; its expectation is sigmoid(eps/kT).
inline double telegraph_simulate(const TelegraphConfig& config, RandomStream& rng) {
  config.validate();
  const double gamma = config.total_rate();
  const double n_f = fermi_occupation(config.epsilon_over_kt);
  const double rate_in = gamma * (1.0 - n_f);
  const double rate_out = gamma * n_f;

  const auto waiting_time = [&rng](double rate) {
    if (rate <= 0.0) return std::numeric_limits<double>::infinity();
    return -std::log1p(-uniform01(rng)) / rate;
  };

  bool occupied = false;
  double t = 0.0;
  double occupied_time = 0.0;
  while (t < config.horizon) {
    const double next = t + waiting_time(occupied ? rate_out : rate_in);
    const double lo = std::max(t, config.burn_in);
    const double hi = std::min(next, config.horizon);
    if (occupied && hi > lo) occupied_time += hi - lo;
    t = next;
    occupied = !occupied;
  }
  return occupied_time / (config.horizon - config.burn_in);
}

/// Fraction of K Poisson(lambda) photon counts with at least one photon;
/// its expectation is 1 - e^{-lambda}.
inline double poisson_click_rate(double lambda, std::uint64_t trials, RandomStream& rng) {
  if (!(lambda >= 0) || !std::isfinite(lambda))
    throw DomainError("poisson_click_rate: lambda must be a finite non-negative number");
  if (trials == 0) throw DomainError("poisson_click_rate: K must be >= 1");
  if (lambda == 0.0) return 0.0;
  std::poisson_distribution<std::uint64_t> counts(lambda);
  std::uint64_t clicks = 0;
  for (std::uint64_t k = 0; k < trials; ++k) clicks += counts(rng) >= 1 ? 1 : 0;
  return static_cast<double>(clicks) / static_cast<double>(trials);
}

}  // namespace psnn
