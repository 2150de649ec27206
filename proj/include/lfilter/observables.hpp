#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>

#include "lfilter/sparse_operator.hpp"
#include "lfilter/state.hpp"

namespace lfilter {

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
};

/// <H> and <H^2> - <H>^2 of a state under a Hermitian operator. The variance
/// is computed as ||(H - <H>) v||^2, which is nonnegative by construction;
/// roundoff negatives beyond -1e-12 cannot occur and are clipped anyway.
template <LinearMap Op>
Moments energy_moments(const Op& op, const Vector& v) {
  if (v.size() != op.dim()) throw std::invalid_argument("energy_moments: dimension mismatch");
  const double nsq = v.squaredNorm();
  if (!(nsq > 0.0)) throw std::invalid_argument("energy_moments: zero state");
  Vector hv = op.apply(v);
  const double mean = v.dot(hv).real() / nsq;
  hv -= mean * v;
  double var = hv.squaredNorm() / nsq;
  if (var < 0.0) var = 0.0;
  return {mean, var};
}

/// Von Neumann entropy (nats) across the cut after the first `cut` sites.
/// Schmidt values below 1e-12 are excluded.
inline double entanglement_entropy(const Vector& v, int cut) {
  const int n = sites_of_dim(v.size());
  if (cut <= 0 || cut >= n) throw std::invalid_argument("entanglement_entropy: invalid cut");
  const Eigen::Index rows = Eigen::Index{1} << cut;
  const Eigen::Index cols = Eigen::Index{1} << (n - cut);
  // site 0 is the most significant bit, so the left block indexes rows
  Eigen::Map<const Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(
      v.data(), rows, cols);
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& sv = svd.singularValues();
  const double nsq = v.squaredNorm();
  double entropy = 0.0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv[i] < 1e-12) continue;
    const double p = sv[i] * sv[i] / nsq;
    entropy -= p * std::log(p);
  }
  return entropy < 0.0 ? 0.0 : entropy;
}

}  // namespace lfilter
