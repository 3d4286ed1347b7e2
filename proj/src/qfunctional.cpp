#include "exotune/qfunctional.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace exotune {
namespace {

// All exponent tuples of length `dim` with exactly `degree` total, in
// descending lexicographic order.
void enumerate_degree(int dim, int degree, std::vector<int>& prefix,
                      std::vector<std::vector<int>>& out) {
  const int pos = static_cast<int>(prefix.size());
  if (pos == dim - 1) {
    prefix.push_back(degree);
    out.push_back(prefix);
    prefix.pop_back();
    return;
  }
  for (int e = degree; e >= 0; --e) {
    prefix.push_back(e);
    enumerate_degree(dim, degree - e, prefix, out);
    prefix.pop_back();
  }
}

double ipow(double x, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= x;
  return r;
}

double uniform01(Rng& rng) {
  // 53 random mantissa bits, [0, 1).
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

BasisSpec::BasisSpec(int order, int action_dim, BasisFamily family)
    : order_(order), action_dim_(action_dim), family_(family) {
  if (order < 0) throw std::invalid_argument("basis order must be >= 0");
  if (action_dim < 1) throw std::invalid_argument("action dimension must be >= 1");

  exponents_.emplace_back(action_dim, 0);
  for (int axis = 0; axis < action_dim; ++axis) {
    for (int e = 1; e <= order; ++e) {
      std::vector<int> exps(action_dim, 0);
      exps[axis] = e;
      exponents_.push_back(std::move(exps));
    }
  }
  for (int degree = 2; degree <= order; ++degree) {
    std::vector<std::vector<int>> tuples;
    std::vector<int> prefix;
    enumerate_degree(action_dim, degree, prefix, tuples);
    for (auto& t : tuples) {
      int nonzero = 0;
      for (int e : t) nonzero += (e != 0);
      if (nonzero >= 2) exponents_.push_back(std::move(t));
    }
  }
}

ActionBounds::ActionBounds(Eigen::VectorXd low_in, Eigen::VectorXd high_in)
    : low(std::move(low_in)), high(std::move(high_in)) {
  if (low.size() != high.size() || low.size() == 0) {
    throw std::invalid_argument("action bounds must have matching non-zero dimension");
  }
  for (Eigen::Index i = 0; i < low.size(); ++i) {
    if (!(low[i] < high[i]) || !std::isfinite(low[i]) || !std::isfinite(high[i])) {
      throw std::invalid_argument("action bounds require finite low < high");
    }
  }
}

ActionBounds ActionBounds::uniform(int dim, double low, double high) {
  return ActionBounds(Eigen::VectorXd::Constant(dim, low), Eigen::VectorXd::Constant(dim, high));
}

bool ActionBounds::contains(const Eigen::VectorXd& action) const {
  if (action.size() != low.size()) return false;
  return (action.array() >= low.array()).all() && (action.array() <= high.array()).all();
}

Eigen::VectorXd ActionBounds::normalize(const Eigen::VectorXd& action) const {
  return (2.0 * (action - low).array() / (high - low).array() - 1.0).matrix();
}

Eigen::VectorXd ActionBounds::denormalize(const Eigen::VectorXd& unit_action) const {
  return (low.array() + (unit_action.array() + 1.0) * 0.5 * (high - low).array()).matrix();
}

std::int64_t coefficient_count(int order, int action_dim) {
  if (order < 0) throw std::invalid_argument("order must be >= 0");
  if (action_dim < 1) throw std::invalid_argument("action_dim must be >= 1");
  // binomial(order + dim, dim) via the multiplicative formula; every
  // intermediate is itself a binomial coefficient, so division is exact.
  std::int64_t result = 1;
  for (int i = 1; i <= action_dim; ++i) {
    result = result * (order + i) / i;
  }
  return result;
}

ActionFeatures action_features(const Eigen::VectorXd& action, const BasisSpec& spec) {
  if (action.size() != spec.action_dim()) {
    throw std::invalid_argument("action has dimension " + std::to_string(action.size()) +
                                ", basis expects " + std::to_string(spec.action_dim()));
  }
  if (!action.allFinite()) throw std::invalid_argument("action must be finite");
  ActionFeatures out{Eigen::VectorXd(spec.k())};
  for (int i = 0; i < spec.k(); ++i) {
    const auto& exps = spec.exponents(i);
    double v = 1.0;
    for (int d = 0; d < spec.action_dim(); ++d) v *= ipow(action[d], exps[d]);
    out.values[i] = v;
  }
  return out;
}

Eigen::MatrixXd action_feature_matrix(const Eigen::MatrixXd& actions, const BasisSpec& spec) {
  if (actions.rows() != spec.action_dim()) {
    throw std::invalid_argument("action matrix rows must equal the basis action dimension");
  }
  Eigen::MatrixXd phi(actions.cols(), spec.k());
  for (Eigen::Index m = 0; m < actions.cols(); ++m) {
    phi.row(m) = action_features(actions.col(m), spec).values.transpose();
  }
  return phi;
}

double evaluate_q(const CoefficientVector& coeffs, const ActionFeatures& features) {
  if (coeffs.values.size() != features.values.size()) {
    throw std::invalid_argument("coefficient and feature lengths differ");
  }
  return coeffs.values.dot(features.values);
}

Eigen::VectorXd evaluate_q_batch(const CoefficientVector& coeffs,
                                 const Eigen::MatrixXd& feature_matrix) {
  if (feature_matrix.cols() != coeffs.values.size()) {
    throw std::invalid_argument("feature matrix must have k columns");
  }
  return feature_matrix * coeffs.values;
}

Eigen::MatrixXd sample_actions(const ActionBounds& bounds, int count, Rng& rng) {
  if (count < 1) throw std::invalid_argument("sample count must be >= 1");
  Eigen::MatrixXd out(bounds.dim(), count);
  for (int m = 0; m < count; ++m) {
    for (int d = 0; d < bounds.dim(); ++d) {
      out(d, m) = bounds.low[d] + uniform01(rng) * (bounds.high[d] - bounds.low[d]);
    }
  }
  return out;
}

SampledMax argmax_sampled(const CoefficientVector& coeffs, const BasisSpec& spec,
                          const ActionBounds& bounds, int sample_count, Rng& rng) {
  if (bounds.dim() != spec.action_dim()) {
    throw std::invalid_argument("bounds dimension does not match basis");
  }
  if (coeffs.values.size() != spec.k()) {
    throw std::invalid_argument("coefficient vector length does not match basis");
  }
  const Eigen::MatrixXd raw = sample_actions(bounds, sample_count, rng);
  Eigen::MatrixXd unit(raw.rows(), raw.cols());
  for (Eigen::Index m = 0; m < raw.cols(); ++m) unit.col(m) = bounds.normalize(raw.col(m));
  const Eigen::VectorXd q = evaluate_q_batch(coeffs, action_feature_matrix(unit, spec));

  Eigen::Index best = 0;
  for (Eigen::Index m = 1; m < q.size(); ++m) {
    if (q[m] > q[best]) best = m;
  }
  return SampledMax{raw.col(best), q[best]};
}

}  // namespace exotune
