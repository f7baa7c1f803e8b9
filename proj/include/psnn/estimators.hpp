#pragma once

// Backward-pass gradient rules for stochastic layers.
//
// Hidden layers (element-wise):
//   TP  dL/dz = p'(z) * upstream            (true probability derivative)
//   EG  dL/dz = hhat (1 - hhat) * upstream  (sigmoid derivative at the sample mean)
//   ST  dL/dz = upstream                    (identity surrogate)
//
// Output heads:
//   softmax + CE, TP:  p - y
//   softmax + CE, EG:  J(ps)^T (-y / ps),  J(p) = diag(p) - p p^T, ps smoothed
//   softmax + CE, ST:  phat - y
//   linear + MSE:      (2 / n_out) (h - y)
//
// All functions accept a single column vector or a batch with one sample per
// column; shapes of paired arguments must agree exactly.

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "psnn/errors.hpp"
#include "psnn/neuron_models.hpp"

namespace psnn {

enum class GradientRule { tp, eg, st };
enum class OutputHead { softmax_ce, linear_mse };

inline std::string_view to_string(GradientRule r) {
  switch (r) {
    case GradientRule::tp: return "TP";
    case GradientRule::eg: return "EG";
    case GradientRule::st: return "ST";
  }
  return "?";
}

inline std::string_view to_string(OutputHead h) {
  return h == OutputHead::softmax_ce ? "SOFTMAX_CE" : "LINEAR_MSE";
}

inline GradientRule parse_gradient_rule(std::string_view s) {
  if (s == "TP") return GradientRule::tp;
  if (s == "EG") return GradientRule::eg;
  if (s == "ST") return GradientRule::st;
  throw ConfigError("unknown gradient rule '" + std::string(s) + "' (expected TP, EG or ST)");
}

inline OutputHead parse_output_head(std::string_view s) {
  if (s == "SOFTMAX_CE") return OutputHead::softmax_ce;
  if (s == "LINEAR_MSE") return OutputHead::linear_mse;
  throw ConfigError("unknown output head '" + std::string(s) + "' (expected SOFTMAX_CE or LINEAR_MSE)");
}

inline constexpr double kDefaultSmoothingEpsilon = 1e-12;

struct EstimatorConfig {
  GradientRule hidden_rule = GradientRule::tp;
  GradientRule output_rule = GradientRule::tp;
  OutputHead output_head = OutputHead::softmax_ce;
  double smoothing_epsilon = kDefaultSmoothingEpsilon;

  /// Throws ConfigError for combinations the estimators cannot support.
  void validate(const NeuronModel& model) const {
    if (hidden_rule == GradientRule::eg && model.kind() != NeuronKind::set)
      throw ConfigError("EG hidden rule needs an autonomous representation p'(z) = g(p(z)); only SET "
                        "neurons qualify, got " + std::string(model.name()));
    if (output_rule == GradientRule::eg && output_head != OutputHead::softmax_ce)
      throw ConfigError("EG output rule requires the SOFTMAX_CE head");
    if (!(smoothing_epsilon > 0.0 && smoothing_epsilon < 1.0))
      throw ConfigError("smoothing epsilon must lie in (0, 1)");
  }

  friend bool operator==(const EstimatorConfig&, const EstimatorConfig&) = default;
};

/// Per-layer gradients. dL_dz keeps one column per sample; dL_dW and dL_db
/// are batch means.
struct LayerGradSignal {
  Eigen::MatrixXd dL_dz;
  Eigen::MatrixXd dL_dW;
  Eigen::VectorXd dL_db;
};

namespace detail {

template <typename A, typename B>
void require_same_shape(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(what) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()) + ")");
}

template <typename P>
void require_simplex(const Eigen::MatrixBase<P>& p, const char* what, bool strictly_positive = false) {
  for (Eigen::Index c = 0; c < p.cols(); ++c) {
    const auto col = p.col(c);
    if (!col.allFinite() || std::abs(col.sum() - 1.0) > 1e-9 || (col.array() < 0.0).any())
      throw DomainError(std::string(what) + ": column " + std::to_string(c) +
                        " is not a probability vector");
    if (strictly_positive && (col.array() <= 0.0).any())
      throw DomainError(std::string(what) + ": zero entry in column " + std::to_string(c) +
                        "; degenerate Jacobian, smooth the probabilities first");
  }
}

}  // namespace detail

/// TP hidden rule: exact activation derivative at the stored pre-activation.
template <typename Z, typename U>
Eigen::MatrixXd hidden_backward_tp(const NeuronModel& model, const Eigen::MatrixBase<Z>& z,
                                   const Eigen::MatrixBase<U>& upstream) {
  detail::require_same_shape(z, upstream, "hidden_backward_tp");
  Eigen::MatrixXd out(z.rows(), z.cols());
  for (Eigen::Index c = 0; c < z.cols(); ++c)
    for (Eigen::Index r = 0; r < z.rows(); ++r) out(r, c) = model.derivative(z(r, c)) * upstream(r, c);
  return out;
}

/// EG hidden rule for sigmoid-like neurons. With K = 1 every hhat is 0 or 1
/// and the result is identically zero.
template <typename H, typename U>
Eigen::MatrixXd hidden_backward_eg(const Eigen::MatrixBase<H>& hhat, const Eigen::MatrixBase<U>& upstream) {
  detail::require_same_shape(hhat, upstream, "hidden_backward_eg");
  if (!((hhat.array() >= 0.0) && (hhat.array() <= 1.0)).all())
    throw DomainError("hidden_backward_eg: empirical activation outside [0,1]");
  return (hhat.array() * (1.0 - hhat.array()) * upstream.array()).matrix();
}

/// ST hidden rule: identity surrogate.
template <typename U>
Eigen::MatrixXd hidden_backward_st(const Eigen::MatrixBase<U>& upstream) {
  return upstream;
}

/// Mix with the uniform distribution: (1 - eps) p + eps / C.
template <typename P>
Eigen::MatrixXd smooth_probs(const Eigen::MatrixBase<P>& phat, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw DomainError("smooth_probs: epsilon must lie in (0,1)");
  detail::require_simplex(phat, "smooth_probs");
  const double c = static_cast<double>(phat.rows());
  return ((1.0 - epsilon) * phat.array() + epsilon / c).matrix();
}

/// Softmax of each column, max-shifted.
template <typename Z>
Eigen::MatrixXd softmax(const Eigen::MatrixBase<Z>& z) {
  Eigen::MatrixXd out(z.rows(), z.cols());
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    const double m = z.col(c).maxCoeff();
    out.col(c) = (z.col(c).array() - m).exp().matrix();
    out.col(c) /= out.col(c).sum();
  }
  return out;
}

/// Empirical softmax Jacobian diag(p) - p p^T of one probability vector.
inline Eigen::MatrixXd softmax_jacobian(const Eigen::Ref<const Eigen::VectorXd>& p) {
  Eigen::MatrixXd j = -p * p.transpose();
  j.diagonal() += p;
  return j;
}

/// J^T (-y / p) with J = diag(p) - p p^T, evaluated literally for each column.
/// Zero Jacobian entries annihilate their term (0 * inf = 0), so an
/// unsmoothed one-hot p yields the exact zero vector the degenerate Jacobian
/// implies rather than NaN.
template <typename P, typename Y>
Eigen::MatrixXd softmax_jacobian_product(const Eigen::MatrixBase<P>& p, const Eigen::MatrixBase<Y>& y) {
  detail::require_same_shape(p, y, "softmax_jacobian_product");
  const Eigen::Index n = p.rows();
  Eigen::MatrixXd out(n, p.cols());
  for (Eigen::Index c = 0; c < p.cols(); ++c) {
    const Eigen::VectorXd pc = p.col(c);
    const Eigen::MatrixXd j = softmax_jacobian(pc);
    for (Eigen::Index i = 0; i < n; ++i) {
      double acc = 0.0;
      for (Eigen::Index r = 0; r < n; ++r) {
        if (j(r, i) == 0.0 || y(r, c) == 0.0) continue;
        acc += j(r, i) * (-y(r, c) / pc(r));
      }
      out(i, c) = acc;
    }
  }
  return out;
}

/// TP softmax-CE output rule.
template <typename P, typename Y>
Eigen::MatrixXd output_backward_softmax_tp(const Eigen::MatrixBase<P>& p, const Eigen::MatrixBase<Y>& y) {
  detail::require_same_shape(p, y, "output_backward_softmax_tp");
  return p - y;
}

/// EG softmax-CE output rule through the smoothed empirical Jacobian. The
/// explicit product is checked against the closed form ps - y (valid for
/// one-hot y) to 1e-12.
template <typename P, typename Y>
Eigen::MatrixXd output_backward_softmax_eg(const Eigen::MatrixBase<P>& phat_smoothed,
                                           const Eigen::MatrixBase<Y>& y) {
  detail::require_same_shape(phat_smoothed, y, "output_backward_softmax_eg");
  detail::require_simplex(phat_smoothed, "output_backward_softmax_eg", true);
  Eigen::MatrixXd grad = softmax_jacobian_product(phat_smoothed, y);
  const double residual = (grad - (phat_smoothed - y)).cwiseAbs().maxCoeff();
  if (!(residual <= 1e-12))
    throw InternalConsistencyError("output_backward_softmax_eg: Jacobian product deviates from ps - y by " +
                                   std::to_string(residual));
  return grad;
}

/// ST softmax-CE output rule on the (possibly raw, unsmoothed) sampled output.
template <typename P, typename Y>
Eigen::MatrixXd output_backward_softmax_st(const Eigen::MatrixBase<P>& phat, const Eigen::MatrixBase<Y>& y) {
  detail::require_same_shape(phat, y, "output_backward_softmax_st");
  return phat - y;
}

/// Gradient of mean((h - y)^2) over the n_out outputs of one sample.
template <typename H, typename Y>
Eigen::MatrixXd output_backward_linear_mse(const Eigen::MatrixBase<H>& h, const Eigen::MatrixBase<Y>& y,
                                           Eigen::Index n_out) {
  detail::require_same_shape(h, y, "output_backward_linear_mse");
  if (n_out <= 0) throw ShapeError("output_backward_linear_mse: n_out must be positive");
  return (2.0 / static_cast<double>(n_out)) * (h - y);
}

/// Whether p'(z) is a function of p(z) on the grid: every pair with
/// |p(z1) - p(z2)| < 1e-9 must have |p'(z1) - p'(z2)| < 1e-6.
inline bool check_autonomous_representation(const std::function<double(double)>& probability,
                                            const std::function<double(double)>& derivative,
                                            std::span<const double> grid) {
  if (grid.size() < 2) throw DomainError("check_autonomous_representation: grid needs >= 2 points");
  std::vector<double> p(grid.size()), dp(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    p[i] = probability(grid[i]);
    dp[i] = derivative(grid[i]);
  }
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t j = i + 1; j < grid.size(); ++j)
      if (std::abs(p[i] - p[j]) < 1e-9 && !(std::abs(dp[i] - dp[j]) < 1e-6)) return false;
  return true;
}

inline bool check_autonomous_representation(const NeuronModel& model, std::span<const double> grid) {
  return check_autonomous_representation([&](double z) { return model.probability(z); },
                                         [&](double z) { return model.derivative(z); }, grid);
}

}  // namespace psnn
