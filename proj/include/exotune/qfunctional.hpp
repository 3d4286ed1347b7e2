#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace exotune {

using Rng = std::mt19937_64;

enum class BasisFamily { kPolynomial };

/// Polynomial basis over a D-dimensional action with total degree <= order.
///
/// Monomials are laid out in one canonical order used everywhere:
///   1. the constant monomial;
///   2. pure powers of each axis, axis by axis, degree ascending
///      (a1, a1^2, ..., a1^O, a2, ..., a2^O, ...);
///   3. mixed monomials (two or more axes), degree ascending, and within a
///      degree in descending lexicographic order of the exponent tuple.
/// For D=2, O=2 this gives [1, a1, a1^2, a2, a2^2, a1*a2]. For D=1 it is the
/// usual [1, a, a^2, ...].
class BasisSpec {
 public:
  BasisSpec(int order, int action_dim, BasisFamily family = BasisFamily::kPolynomial);

  int order() const { return order_; }
  int action_dim() const { return action_dim_; }
  int k() const { return static_cast<int>(exponents_.size()); }
  BasisFamily family() const { return family_; }

  /// Exponent tuple of monomial i (length action_dim).
  const std::vector<int>& exponents(int i) const { return exponents_[i]; }

  bool operator==(const BasisSpec& other) const {
    return order_ == other.order_ && action_dim_ == other.action_dim_ && family_ == other.family_;
  }

 private:
  int order_;
  int action_dim_;
  BasisFamily family_;
  std::vector<std::vector<int>> exponents_;
};

/// C(s): one coefficient per basis monomial.
struct CoefficientVector {
  Eigen::VectorXd values;
};

/// Phi(a): monomials of the (normalized) action. values[0] == 1.
struct ActionFeatures {
  Eigen::VectorXd values;
};

struct ActionBounds {
  Eigen::VectorXd low;
  Eigen::VectorXd high;

  ActionBounds(Eigen::VectorXd low_in, Eigen::VectorXd high_in);
  static ActionBounds uniform(int dim, double low, double high);

  int dim() const { return static_cast<int>(low.size()); }
  bool contains(const Eigen::VectorXd& action) const;
  /// Affine map of a raw action onto [-1, 1] per axis.
  Eigen::VectorXd normalize(const Eigen::VectorXd& action) const;
  Eigen::VectorXd denormalize(const Eigen::VectorXd& unit_action) const;
};

/// binomial(order + action_dim, action_dim).
std::int64_t coefficient_count(int order, int action_dim);

ActionFeatures action_features(const Eigen::VectorXd& action, const BasisSpec& spec);

/// Feature rows for a set of actions (one action per column of `actions`).
/// Result is M x k.
Eigen::MatrixXd action_feature_matrix(const Eigen::MatrixXd& actions, const BasisSpec& spec);

double evaluate_q(const CoefficientVector& coeffs, const ActionFeatures& features);

/// One matrix-vector product: row i of the result is evaluate_q(coeffs, row i).
Eigen::VectorXd evaluate_q_batch(const CoefficientVector& coeffs,
                                 const Eigen::MatrixXd& feature_matrix);

struct SampledMax {
  Eigen::VectorXd action;  // raw (denormalized) action
  double q_value = 0.0;
};

/// Draws `sample_count` uniform actions from `bounds`, evaluates the
/// functional on their normalized features and returns the best one.
/// Ties go to the lowest sample index.
SampledMax argmax_sampled(const CoefficientVector& coeffs, const BasisSpec& spec,
                          const ActionBounds& bounds, int sample_count, Rng& rng);

/// Uniform sample of `count` raw actions from `bounds`, one per column.
Eigen::MatrixXd sample_actions(const ActionBounds& bounds, int count, Rng& rng);

}  // namespace exotune
