#pragma once

// Activation probabilities of the three physical stochastic neurons and the
// Bernoulli sampling interface they share.
//
//   SPD  single-photon detector, coherent encoding:  p(z) = 1 - exp(-z^2)
//   SET  single-electron transistor (dot occupation): p(z) = sigmoid(z)
//   TSP  true single photon, b-mode occupation after a rectangular coupling
//        pulse of strength alpha = z driven by an exponential single photon.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <string_view>

#include "psnn/errors.hpp"
#include "psnn/random.hpp"

namespace psnn {

/// Physical parameters of the TSP neuron. Defaults are the values used for
/// the MNIST experiments: t = 0.21, gamma = 0.02, kappa = 30, zeta = 10.7.
struct TspParams {
  double t = 0.21;      ///< dimensionless evolution (pulse) time
  double gamma = 0.02;  ///< b-mode (mechanical) decay rate
  double kappa = 30.0;  ///< a-mode (cavity) decay rate
  double zeta = 10.7;   ///< temporal decay rate of the single-photon pulse

  void validate() const {
    if (!(std::isfinite(t) && t > 0)) throw DomainError("TspParams: t must be > 0");
    if (!(std::isfinite(kappa) && kappa > 0)) throw DomainError("TspParams: kappa must be > 0");
    if (!(std::isfinite(zeta) && zeta > 0)) throw DomainError("TspParams: zeta must be > 0");
    if (!(std::isfinite(gamma) && gamma >= 0)) throw DomainError("TspParams: gamma must be >= 0");
  }

  /// Delta = sqrt((gamma - kappa)^2 - 16 alpha^2); imaginary in the oscillatory regime.
  std::complex<double> delta(double alpha) const {
    const double d = gamma - kappa;
    return std::sqrt(std::complex<double>(d * d - 16.0 * alpha * alpha, 0.0));
  }

  /// u = gamma + kappa - 2 zeta.
  double u() const { return gamma + kappa - 2.0 * zeta; }

  friend bool operator==(const TspParams&, const TspParams&) = default;
};

/// Sign of the exponent in the second relaxation term of the closed-form TSP
/// occupation. The two published forms disagree; only one solves the moment
/// ODE (see physics_oracles.hpp and the FSME tests).
enum class TspExponentVariant {
  positive,  ///< (1 - e^{+t(Delta+u)/4}) / (Delta+u)
  negative,  ///< (1 - e^{-t(Delta+u)/4}) / (Delta+u)
};

/// Variant selected against the RK4 integration of the moment equations.
inline constexpr TspExponentVariant kSelectedTspVariant = TspExponentVariant::negative;

inline std::string_view to_string(TspExponentVariant v) {
  return v == TspExponentVariant::positive ? "exp(+t(Delta+u)/4)" : "exp(-t(Delta+u)/4)";
}

namespace detail {

inline void require_finite(double z, const char* what) {
  if (!std::isfinite(z)) throw DomainError(std::string(what) + ": pre-activation must be finite");
}

// (1 - e^{s x}) / x, with the removable singularity at x = 0 (limit -s)
// handled by its Taylor series.
inline std::complex<double> relaxation_term(std::complex<double> x, double s) {
  if (std::abs(x) < 1e-10) return -s - 0.5 * s * s * x;
  return (1.0 - std::exp(s * x)) / x;
}

// Bracket / Delta for the closed-form occupation.
inline std::complex<double> tsp_bracket_over_delta(const TspParams& p, std::complex<double> delta,
                                                   TspExponentVariant variant) {
  const double s = p.t / 4.0;
  const double u = p.u();
  const std::complex<double> first = relaxation_term(delta - u, s);
  const std::complex<double> second = variant == TspExponentVariant::negative
                                          ? -relaxation_term(-delta - u, s)
                                          : relaxation_term(delta + u, s);
  return (first + second) / delta;
}

// Complex value of 64 alpha^2 zeta kappa / Delta^2 [..]^2 e^{-t zeta}, before
// any reality or range check.
inline std::complex<double> tsp_occupation_complex(const TspParams& p, double alpha,
                                                   TspExponentVariant variant) {
  if (alpha == 0.0) return {0.0, 0.0};
  const double d = p.gamma - p.kappa;
  const double delta_sq = d * d - 16.0 * alpha * alpha;
  std::complex<double> ratio;
  // For the negative variant bracket/Delta is an even function of Delta, i.e.
  // analytic in Delta^2; near Delta = 0 average two symmetric offsets in
  // Delta^2 to avoid the 0/0 cancellation.
  constexpr double kDeltaSqGuard = 1e-8;
  if (variant == TspExponentVariant::negative && std::abs(delta_sq) < kDeltaSqGuard) {
    const double h = 2.0 * kDeltaSqGuard;
    const auto lo = std::sqrt(std::complex<double>(delta_sq - h, 0.0));
    const auto hi = std::sqrt(std::complex<double>(delta_sq + h, 0.0));
    ratio = 0.5 * (tsp_bracket_over_delta(p, lo, variant) + tsp_bracket_over_delta(p, hi, variant));
  } else {
    ratio = tsp_bracket_over_delta(p, std::sqrt(std::complex<double>(delta_sq, 0.0)), variant);
  }
  return 64.0 * alpha * alpha * p.zeta * p.kappa * ratio * ratio * std::exp(-p.t * p.zeta);
}

}  // namespace detail

/// Click probability of a coherently driven single-photon detector.
inline double spd_probability(double z) {
  detail::require_finite(z, "spd_probability");
  return -std::expm1(-z * z);
}

/// Steady-state dot occupation, sigmoid(z) with k_B T folded into z.
inline double set_probability(double z) {
  detail::require_finite(z, "set_probability");
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// Unchecked complex value of the closed-form TSP occupation for either exponent
/// variant. Used to compare variants against the ODE oracle.
inline std::complex<double> tsp_occupation_raw(const TspParams& params, double alpha,
                                               TspExponentVariant variant) {
  return detail::tsp_occupation_complex(params, alpha, variant);
}

/// b-mode occupation <b^dagger b> for coupling alpha = z.
///
/// Evaluated in complex arithmetic throughout. Throws
/// InternalConsistencyError if the imaginary residual exceeds 1e-9 or the
/// value leaves [-1e-9, 1 + 1e-9]; tiny excursions are clamped into [0, 1].
inline double tsp_probability(const TspParams& params, double z,
                              TspExponentVariant variant = kSelectedTspVariant) {
  detail::require_finite(z, "tsp_probability");
  params.validate();
  const std::complex<double> v = detail::tsp_occupation_complex(params, z, variant);
  if (!(std::abs(v.imag()) < 1e-9))
    throw InternalConsistencyError("tsp_probability: imaginary residual " +
                                   std::to_string(v.imag()) + " at z=" + std::to_string(z));
  const double p = v.real();
  if (!(p >= -1e-9 && p <= 1.0 + 1e-9))
    throw InternalConsistencyError("tsp_probability: value " + std::to_string(p) +
                                   " outside [0,1] at z=" + std::to_string(z));
  return std::clamp(p, 0.0, 1.0);
}

enum class NeuronKind { spd, set, tsp };

inline std::string_view to_string(NeuronKind k) {
  switch (k) {
    case NeuronKind::spd: return "SPD";
    case NeuronKind::set: return "SET";
    case NeuronKind::tsp: return "TSP";
  }
  return "?";
}

inline NeuronKind parse_neuron_kind(std::string_view s) {
  if (s == "SPD") return NeuronKind::spd;
  if (s == "SET") return NeuronKind::set;
  if (s == "TSP") return NeuronKind::tsp;
  throw ConfigError("unknown neuron model '" + std::string(s) + "' (expected SPD, SET or TSP)");
}

/// Step of the central difference used for the TSP derivative.
inline constexpr double kTspDerivativeStep = 1e-4;

/// Tagged activation-probability family.
class NeuronModel {
 public:
  static NeuronModel spd() { return NeuronModel(NeuronKind::spd, {}); }
  static NeuronModel set() { return NeuronModel(NeuronKind::set, {}); }
  static NeuronModel tsp(const TspParams& params = {}) {
    params.validate();
    return NeuronModel(NeuronKind::tsp, params);
  }
  static NeuronModel of_kind(NeuronKind kind, const TspParams& params = {}) {
    return kind == NeuronKind::tsp ? tsp(params) : NeuronModel(kind, {});
  }

  NeuronKind kind() const { return kind_; }
  /// Only meaningful for TSP models.
  const TspParams& tsp_params() const { return tsp_; }
  std::string_view name() const { return to_string(kind_); }

  double probability(double z) const {
    switch (kind_) {
      case NeuronKind::spd: return spd_probability(z);
      case NeuronKind::set: return set_probability(z);
      case NeuronKind::tsp: return tsp_probability(tsp_, z);
    }
    return 0.0;
  }

  /// dp/dz; analytic for SPD and SET, central difference for TSP.
  double derivative(double z) const {
    detail::require_finite(z, "probability_derivative");
    switch (kind_) {
      case NeuronKind::spd: return 2.0 * z * std::exp(-z * z);
      case NeuronKind::set: {
        const double s = set_probability(z);
        return s * (1.0 - s);
      }
      case NeuronKind::tsp: {
        const double h = kTspDerivativeStep;
        return (tsp_probability(tsp_, z + h) - tsp_probability(tsp_, z - h)) / (2.0 * h);
      }
    }
    return 0.0;
  }

  friend bool operator==(const NeuronModel& a, const NeuronModel& b) {
    return a.kind_ == b.kind_ && (a.kind_ != NeuronKind::tsp || a.tsp_ == b.tsp_);
  }

 private:
  NeuronModel(NeuronKind kind, const TspParams& params) : kind_(kind), tsp_(params) {}

  NeuronKind kind_;
  TspParams tsp_;
};

inline double activation_probability(const NeuronModel& model, double z) {
  return model.probability(z);
}

inline double probability_derivative(const NeuronModel& model, double z) {
  return model.derivative(z);
}

/// Sample mean of K Bernoulli trials. Stored as a click count so that the
/// mean always lies on the lattice {0, 1/K, ..., 1}.
struct EmpiricalActivation {
  std::uint32_t clicks = 0;
  std::uint32_t trials = 1;

  double mean() const { return static_cast<double>(clicks) / static_cast<double>(trials); }
};

/// Number of successes in `trials` Bernoulli(p) draws from `rng`.
inline std::uint32_t bernoulli_count(double p, std::uint32_t trials, RandomStream& rng) {
  std::uint32_t clicks = 0;
  for (std::uint32_t k = 0; k < trials; ++k) clicks += uniform01(rng) < p ? 1u : 0u;
  return clicks;
}

/// K independent physical trials of a neuron at pre-activation z.
inline EmpiricalActivation sample_activation(const NeuronModel& model, double z, std::uint32_t trials,
                                             RandomStream& rng) {
  if (trials == 0) throw DomainError("sample_activation: K must be >= 1");
  const double p = model.probability(z);
  return {bernoulli_count(p, trials, rng), trials};
}

}  // namespace psnn
