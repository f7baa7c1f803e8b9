#pragma once

// Physics validation report: closed-form activation probabilities checked
// against the independent oracles in physics_oracles.hpp.

#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "psnn/neuron_models.hpp"
#include "psnn/physics_oracles.hpp"
#include "psnn/random.hpp"

namespace psnn {

struct ValidationCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct TspVariantResult {
  TspExponentVariant variant;
  double max_deviation;  // +inf when the variant is non-finite or complex anywhere
};

struct TelegraphRow {
  double epsilon_over_kt, expected, simulated;
};

struct PoissonRow {
  double lambda, expected, simulated, sigma;
};

struct PhysicsReport {
  std::vector<TspVariantResult> tsp_variants;
  TspExponentVariant selected_variant = kSelectedTspVariant;
  double tsp_max_deviation = 0.0;
  double tsp_alpha_at_max = 0.0;
  std::vector<double> rk4_dts, rk4_errors;
  double rk4_slope = 0.0;
  std::vector<TelegraphRow> telegraph;
  std::vector<PoissonRow> poisson;
  std::vector<ValidationCheck> checks;

  bool passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return !checks.empty();
  }
};

struct PhysicsValidationOptions {
  TspParams tsp{};
  double alpha_min = -50.0, alpha_max = 50.0, alpha_step = 0.1;
  double oracle_dt = 1e-5;
  double tsp_tolerance = 1e-6;
  double convergence_alpha = 10.0;
  std::vector<double> convergence_dts{1e-3, 5e-4, 2.5e-4};
  double convergence_reference_dt = 1e-6;
  double slope_tolerance = 0.3;
  double telegraph_horizon = 5e4;
  double telegraph_tolerance = 0.01;
  std::vector<double> poisson_lambdas{0.01, 0.1, 0.25, 0.5, std::log(2.0), 1.0, 1.5, 2.0, 3.0, 5.0};
  std::uint64_t poisson_trials = 1'000'000;
  double poisson_sigmas = 4.0;
  std::uint64_t seed = 1;
};

namespace detail {

inline std::string sci(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

/// Least-squares slope of log(err) against log(dt).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace detail

inline PhysicsReport run_physics_validation(const PhysicsValidationOptions& opt = {}) {
  PhysicsReport rep;

  // (1) TSP closed form against the RK4 moment integration, both exponent variants.
  std::vector<double> alphas, oracle;
  const auto n_alpha = static_cast<int>(std::lround((opt.alpha_max - opt.alpha_min) / opt.alpha_step));
  for (int i = 0; i <= n_alpha; ++i) {
    const double a = opt.alpha_min + opt.alpha_step * i;
    alphas.push_back(a);
    oracle.push_back(fsme_occupation(opt.tsp, a, opt.oracle_dt));
  }
  for (auto variant : {TspExponentVariant::positive, TspExponentVariant::negative}) {
    double worst = 0.0, at = 0.0;
    for (std::size_t i = 0; i < alphas.size(); ++i) {
      const std::complex<double> v = tsp_occupation_raw(opt.tsp, alphas[i], variant);
      const double dev = std::isfinite(v.real()) && std::isfinite(v.imag()) && std::abs(v.imag()) < 1e-9
                             ? std::abs(v.real() - oracle[i])
                             : std::numeric_limits<double>::infinity();
      if (!(dev <= worst)) {
        worst = dev;
        at = alphas[i];
      }
    }
    rep.tsp_variants.push_back({variant, worst});
    if (variant == kSelectedTspVariant) {
      rep.tsp_max_deviation = worst;
      rep.tsp_alpha_at_max = at;
    }
  }
  TspExponentVariant best = rep.tsp_variants.front().variant;
  double best_dev = rep.tsp_variants.front().max_deviation;
  for (const auto& v : rep.tsp_variants)
    if (v.max_deviation < best_dev) {
      best = v.variant;
      best_dev = v.max_deviation;
    }
  rep.selected_variant = kSelectedTspVariant;
  rep.checks.push_back({"tsp_variant_selection", best == kSelectedTspVariant,
                        "oracle prefers " + std::string(to_string(best)) + ", library uses " +
                            std::string(to_string(kSelectedTspVariant))});
  rep.checks.push_back({"tsp_closed_form_vs_rk4", rep.tsp_max_deviation < opt.tsp_tolerance,
                        "max |analytic - oracle| = " + detail::sci(rep.tsp_max_deviation) + " at alpha = " +
                            detail::sci(rep.tsp_alpha_at_max) + " (tolerance " + detail::sci(opt.tsp_tolerance) + ")"});

  // RK4 self-convergence.
  const double ref = fsme_occupation(opt.tsp, opt.convergence_alpha, opt.convergence_reference_dt);
  for (double dt : opt.convergence_dts) {
    rep.rk4_dts.push_back(dt);
    rep.rk4_errors.push_back(std::abs(fsme_occupation(opt.tsp, opt.convergence_alpha, dt) - ref));
  }
  rep.rk4_slope = detail::loglog_slope(rep.rk4_dts, rep.rk4_errors);
  rep.checks.push_back({"rk4_convergence_order", std::abs(rep.rk4_slope - 4.0) <= opt.slope_tolerance,
                        "log-log slope " + detail::sci(rep.rk4_slope)});

  // (2) Telegraph process against the sigmoid.
  bool telegraph_ok = true;
  double telegraph_worst = 0.0;
  for (int e = -5; e <= 5; ++e) {
    RandomStream rng = derive_stream(opt.seed, StreamPurpose::oracle, {1, static_cast<std::uint64_t>(e + 100)});
    const auto cfg = TelegraphConfig::with_defaults(e, 1.0, 1.0, opt.telegraph_horizon);
    TelegraphRow row{static_cast<double>(e), set_probability(e), telegraph_simulate(cfg, rng)};
    telegraph_worst = std::max(telegraph_worst, std::abs(row.simulated - row.expected));
    telegraph_ok = telegraph_ok && std::abs(row.simulated - row.expected) <= opt.telegraph_tolerance;
    rep.telegraph.push_back(row);
  }
  rep.checks.push_back({"telegraph_vs_sigmoid", telegraph_ok,
                        "max deviation " + detail::sci(telegraph_worst) + " over 11 levels"});

  // (3) Poisson photon counting against 1 - e^{-lambda}.
  bool poisson_ok = true;
  double poisson_worst = 0.0;
  for (std::size_t i = 0; i < opt.poisson_lambdas.size(); ++i) {
    const double lambda = opt.poisson_lambdas[i];
    RandomStream rng = derive_stream(opt.seed, StreamPurpose::oracle, {2, i});
    const double p = spd_probability(std::sqrt(lambda));
    PoissonRow row{lambda, p, poisson_click_rate(lambda, opt.poisson_trials, rng),
                   std::sqrt(p * (1.0 - p) / static_cast<double>(opt.poisson_trials))};
    const double z = row.sigma > 0 ? std::abs(row.simulated - p) / row.sigma : 0.0;
    poisson_worst = std::max(poisson_worst, z);
    poisson_ok = poisson_ok && std::abs(row.simulated - p) <= opt.poisson_sigmas * row.sigma;
    rep.poisson.push_back(row);
  }
  rep.checks.push_back({"poisson_vs_spd", poisson_ok,
                        "max deviation " + detail::sci(poisson_worst) + " sigma over " +
                            std::to_string(opt.poisson_lambdas.size()) + " rates"});
  return rep;
}

inline void print_physics_report(std::ostream& out, const PhysicsReport& rep) {
  char line[200];
  out << "TSP closed form vs RK4 moment integration\n";
  for (const auto& v : rep.tsp_variants)
    out << "  variant " << to_string(v.variant) << ": max |dev| = " << detail::sci(v.max_deviation) << '\n';
  out << "  selected variant: " << to_string(rep.selected_variant) << '\n';
  out << "RK4 self-convergence\n";
  for (std::size_t i = 0; i < rep.rk4_dts.size(); ++i) {
    std::snprintf(line, sizeof line, "  dt %.2e  error %.3e\n", rep.rk4_dts[i], rep.rk4_errors[i]);
    out << line;
  }
  std::snprintf(line, sizeof line, "  slope %.3f\n", rep.rk4_slope);
  out << line;
  out << "Telegraph occupation vs sigmoid\n  eps/kT  sigmoid    simulated\n";
  for (const auto& r : rep.telegraph) {
    std::snprintf(line, sizeof line, "  %+5.1f   %.6f   %.6f\n", r.epsilon_over_kt, r.expected, r.simulated);
    out << line;
  }
  out << "Poisson click rate vs 1 - exp(-lambda)\n  lambda    expected   simulated  sigma\n";
  for (const auto& r : rep.poisson) {
    std::snprintf(line, sizeof line, "  %-8.4f  %.6f   %.6f   %.2e\n", r.lambda, r.expected, r.simulated, r.sigma);
    out << line;
  }
  for (const auto& c : rep.checks) out << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
}

/// p(z) for the three neuron models over their characteristic z ranges:
/// [-3,3] SPD, [-5,5] SET, [-50,50] TSP.
inline void write_activation_curves(std::ostream& out, std::size_t points = 401, const TspParams& tsp = {}) {
  out << "neuron,z,p\n";
  struct Range {
    NeuronModel model;
    double lo, hi;
  };
  char line[96];
  for (const Range& r : {Range{NeuronModel::spd(), -3, 3}, Range{NeuronModel::set(), -5, 5},
                         Range{NeuronModel::tsp(tsp), -50, 50}}) {
    for (std::size_t i = 0; i < points; ++i) {
      const double z = r.lo + (r.hi - r.lo) * static_cast<double>(i) / static_cast<double>(points - 1);
      std::snprintf(line, sizeof line, "%s,%.6f,%.12f\n", std::string(r.model.name()).c_str(), z, r.model.probability(z));
      out << line;
    }
  }
}

}  // namespace psnn
