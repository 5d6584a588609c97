#pragma once

// Dynamic mode decomposition with control.
//
// Given snapshot pairs x_{k+1} ~ A x_k + B u_k, the stacked matrix
// [X; U] is truncated to rank p and X' to rank r. With
//   G = X' V~ S~^-1,
// the reduced operators are
//   A~ = U^T G U~_x^T U^    (r x r)
//   B~ = U^T G U~_u^T       (r x q)
// and the modes are the exact-DMD reconstruction Phi = G U~_x^T U^ W, where
// A~ W = W diag(lambda).

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dmdgraph/embedding.hpp"
#include "dmdgraph/error.hpp"

namespace dmdgraph {

/// Singular values below this fraction of the largest are treated as zero.
inline constexpr double kRankTolerance = 1e-14;

/// Truncation rank: an explicit count or a cumulative-energy fraction of the
/// squared singular values.
struct RankSpec {
  enum class Kind { Count, Energy };

  Kind kind = Kind::Energy;
  double value = 0.9999;

  static RankSpec count(Eigen::Index n) { return {Kind::Count, static_cast<double>(n)}; }
  static RankSpec energy(double fraction) { return {Kind::Energy, fraction}; }

  bool is_count() const { return kind == Kind::Count; }

  void validate() const {
    if (is_count()) {
      if (!(value >= 1.0) || value != std::floor(value))
        throw Error(ErrorKind::Config, "rank count must be a positive integer");
    } else if (!(value > 0.0 && value <= 1.0)) {
      throw Error(ErrorKind::Config, "energy fraction must lie in (0, 1]");
    }
  }

  friend bool operator==(const RankSpec&, const RankSpec&) = default;
};

struct DmdcConfig {
  RankSpec rank_state = RankSpec::energy(0.9999);
  RankSpec rank_joint = RankSpec::energy(0.9999);
};

template <typename Scalar>
Eigen::Index numerical_rank(const Vec<Scalar>& singular_values) {
  if (singular_values.size() == 0 || !(singular_values(0) > Scalar(0))) return 0;
  const Scalar floor = Scalar(kRankTolerance) * singular_values(0);
  return (singular_values.array() >= floor).count();
}

/// Energy specs resolve to the smallest k whose leading k squared singular
/// values reach the fraction, capped at the numerical rank.
template <typename Scalar>
Eigen::Index resolve_rank(const RankSpec& spec, const Vec<Scalar>& singular_values) {
  spec.validate();
  if (spec.is_count()) return static_cast<Eigen::Index>(spec.value);
  const Eigen::Index available = numerical_rank(singular_values);
  if (available == 0) return 0;
  const Vec<Scalar> energy = singular_values.array().square();
  const Scalar target = Scalar(spec.value) * energy.sum();
  Scalar acc = 0;
  for (Eigen::Index k = 0; k < available; ++k) {
    acc += energy(k);
    if (acc >= target) return k + 1;
  }
  return available;
}

template <typename Scalar = double>
struct DmdcModel {
  using Complex = std::complex<Scalar>;
  using CMat = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic>;
  using CVec = Eigen::Matrix<Complex, Eigen::Dynamic, 1>;

  Mat<Scalar> a_tilde;   // r x r
  Mat<Scalar> b_tilde;   // r x q
  CVec eigenvalues;      // r, descending modulus
  CMat eigenvectors;     // r x r, unit columns, first nonzero entry real positive
  CMat phi;              // d x r
  Vec<Scalar> sing_vals_joint;
  Vec<Scalar> sing_vals_state;
  Mat<Scalar> u_hat;     // d x r, orthonormal columns
  SnapshotOffsets<Scalar> offsets;
  Scalar eigen_residual = 0;  // ||A~ W - W diag(lambda)||_F / ||A~||_F

  Eigen::Index dim() const { return u_hat.rows(); }
  Eigen::Index rank_state() const { return a_tilde.rows(); }
  Eigen::Index rank_joint() const { return sing_vals_joint.size(); }
  Eigen::Index inputs() const { return b_tilde.cols(); }
};

namespace detail {

// Flips each column so that its largest-magnitude entry is positive.
template <typename Scalar>
void fix_column_signs(Mat<Scalar>& basis) {
  for (Eigen::Index j = 0; j < basis.cols(); ++j) {
    Eigen::Index arg = 0;
    basis.col(j).cwiseAbs().maxCoeff(&arg);
    if (basis(arg, j) < Scalar(0)) basis.col(j) = -basis.col(j);
  }
}

template <typename Scalar>
void normalize_eigenvector(Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>& w) {
  w /= w.norm();
  const Scalar tol = Scalar(1e-12) * w.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const Scalar mag = std::abs(w(i));
    if (mag > tol) {
      w *= std::conj(w(i)) / mag;
      w(i) = std::complex<Scalar>(std::abs(w(i)), Scalar(0));
      break;
    }
  }
}

}  // namespace detail

template <typename Scalar>
DmdcModel<Scalar> fit(const CenteredSnapshots<Scalar>& data, const DmdcConfig& config) {
  using Model = DmdcModel<Scalar>;
  using Complex = typename Model::Complex;
  const auto& s = data.snapshots;
  s.validate();
  config.rank_state.validate();
  config.rank_joint.validate();

  const Eigen::Index d = s.dim();
  const Eigen::Index q = s.inputs();
  const Eigen::Index m = s.count();

  if (config.rank_joint.is_count() && static_cast<Eigen::Index>(config.rank_joint.value) > m) {
    throw Error(ErrorKind::Config, "infeasible rank: joint rank " +
                                       std::to_string(static_cast<Eigen::Index>(config.rank_joint.value)) +
                                       " exceeds snapshot count " + std::to_string(m));
  }

  Mat<Scalar> omega(d + q, m);
  omega << s.x, s.u;
  Eigen::BDCSVD<Mat<Scalar>> joint(omega, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::BDCSVD<Mat<Scalar>> state(s.x_next, Eigen::ComputeThinU);

  const Eigen::Index p = resolve_rank(config.rank_joint, Vec<Scalar>(joint.singularValues()));
  Eigen::Index r = resolve_rank(config.rank_state, Vec<Scalar>(state.singularValues()));
  if (!config.rank_state.is_count()) r = std::min(r, p);

  if (p == 0 || r == 0)
    throw Error(ErrorKind::Numerical, "rank deficiency: snapshot data is identically zero");
  if (config.rank_joint.is_count() || config.rank_state.is_count()) {
    if (!(r <= p && p <= d + q && r <= std::min(d, m))) {
      throw Error(ErrorKind::Config, "infeasible ranks r=" + std::to_string(r) + ", p=" +
                                         std::to_string(p) + " for d=" + std::to_string(d) +
                                         ", q=" + std::to_string(q) + ", m=" + std::to_string(m) +
                                         " (need 1 <= r <= p <= d+q and r <= min(d, m))");
    }
  }
  if (m < p) throw Error(ErrorKind::Config, "infeasible rank: fewer snapshots than joint rank");

  const auto& sv_joint = joint.singularValues();
  const auto& sv_state = state.singularValues();
  if (!(sv_joint(p - 1) > Scalar(0) && sv_joint(p - 1) >= Scalar(kRankTolerance) * sv_joint(0))) {
    throw Error(ErrorKind::Numerical, "rank deficiency in [X; U]: singular value " +
                                          std::to_string(p) + " is below tolerance; use a smaller joint rank");
  }
  if (!(sv_state(r - 1) > Scalar(0) && sv_state(r - 1) >= Scalar(kRankTolerance) * sv_state(0))) {
    throw Error(ErrorKind::Numerical, "rank deficiency in X': singular value " + std::to_string(r) +
                                          " is below tolerance; use a smaller state rank");
  }

  Model model;
  model.sing_vals_joint = sv_joint.head(p);
  model.sing_vals_state = sv_state.head(r);
  model.offsets = data.offsets;

  const Mat<Scalar> u_tilde = joint.matrixU().leftCols(p);
  const auto u_x = u_tilde.topRows(d);
  const auto u_u = u_tilde.bottomRows(q);
  model.u_hat = state.matrixU().leftCols(r);
  detail::fix_column_signs(model.u_hat);

  // G = X' V~ S~^-1 (d x p)
  const Mat<Scalar> g = s.x_next * joint.matrixV().leftCols(p) *
                        model.sing_vals_joint.cwiseInverse().asDiagonal();
  const Mat<Scalar> g_basis = g * (u_x.transpose() * model.u_hat);  // d x r
  model.a_tilde = model.u_hat.transpose() * g_basis;
  model.b_tilde = model.u_hat.transpose() * g * u_u.transpose();

  Eigen::EigenSolver<Mat<Scalar>> eig(model.a_tilde, true);
  if (eig.info() != Eigen::Success)
    throw Error(ErrorKind::Numerical, "eigendecomposition of the reduced operator failed");

  const auto raw_values = eig.eigenvalues();
  const auto raw_vectors = eig.eigenvectors();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(r));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    const Scalar ma = std::abs(raw_values(a));
    const Scalar mb = std::abs(raw_values(b));
    if (ma != mb) return ma > mb;
    if (raw_values(a).imag() != raw_values(b).imag()) return raw_values(a).imag() > raw_values(b).imag();
    return raw_values(a).real() > raw_values(b).real();
  });

  model.eigenvalues.resize(r);
  model.eigenvectors.resize(r, r);
  for (Eigen::Index j = 0; j < r; ++j) {
    const auto src = order[static_cast<std::size_t>(j)];
    model.eigenvalues(j) = raw_values(src);
    typename Model::CVec w = raw_vectors.col(src);
    detail::normalize_eigenvector(w);
    model.eigenvectors.col(j) = w;
  }

  model.phi = g_basis.template cast<Complex>() * model.eigenvectors;

  const typename Model::CMat residual = model.a_tilde.template cast<Complex>() * model.eigenvectors -
                                        model.eigenvectors * model.eigenvalues.asDiagonal();
  const Scalar scale = model.a_tilde.norm();
  model.eigen_residual = scale > Scalar(0) ? residual.norm() / scale : residual.norm();
  return model;
}

template <typename Scalar>
DmdcModel<Scalar> fit(const SnapshotSet<Scalar>& snapshots, const DmdcConfig& config) {
  return fit(uncentered(snapshots), config);
}

/// x' = U^ (A~ U^T (x - offset) + B~ (u - u_offset)) + offset
template <typename Scalar, typename XDerived, typename UDerived>
Vec<Scalar> predict_one_step(const DmdcModel<Scalar>& model, const Eigen::MatrixBase<XDerived>& x,
                             const Eigen::MatrixBase<UDerived>& u) {
  if (x.size() != model.dim() || u.size() != model.inputs()) {
    throw Error(ErrorKind::Data, "shape mismatch: model expects state of length " +
                                     std::to_string(model.dim()) + " and input of length " +
                                     std::to_string(model.inputs()));
  }
  const Vec<Scalar> reduced = model.a_tilde * (model.u_hat.transpose() * (x - model.offsets.state)) +
                              model.b_tilde * (u - model.offsets.input);
  return model.u_hat * reduced + model.offsets.state;
}

/// Root-mean-square one-step error over every entry of x_next, with the
/// snapshots given in original (uncentered) units.
template <typename Scalar>
Scalar one_step_rmse(const DmdcModel<Scalar>& model, const SnapshotSet<Scalar>& raw) {
  if (raw.dim() != model.dim() || raw.inputs() != model.inputs())
    throw Error(ErrorKind::Data, "snapshot shape does not match model");
  const Mat<Scalar> x = raw.x.colwise() - model.offsets.state;
  const Mat<Scalar> u = raw.u.colwise() - model.offsets.input;
  const Mat<Scalar> predicted =
      (model.u_hat * (model.a_tilde * (model.u_hat.transpose() * x) + model.b_tilde * u)).colwise() +
      model.offsets.state;
  return std::sqrt((predicted - raw.x_next).squaredNorm() / static_cast<Scalar>(predicted.size()));
}

/// Entrywise modulus of the mode matrix.
template <typename Scalar>
Mat<Scalar> mode_magnitude(const DmdcModel<Scalar>& model) {
  return model.phi.cwiseAbs();
}

template <typename Scalar = double>
struct ModePhase {
  Mat<Scalar> phase;  // radians in (-pi, pi]
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> masked;
};

/// Entrywise argument of the mode matrix. Entries with modulus below 1e-12
/// of the largest modulus carry no meaningful phase; they are set to 0 and
/// marked in the mask.
template <typename Scalar>
ModePhase<Scalar> mode_phase(const DmdcModel<Scalar>& model) {
  const Mat<Scalar> magnitude = mode_magnitude(model);
  const Scalar cutoff = Scalar(1e-12) * (magnitude.size() ? magnitude.maxCoeff() : Scalar(0));
  ModePhase<Scalar> out;
  out.phase.resize(model.phi.rows(), model.phi.cols());
  out.masked.resize(model.phi.rows(), model.phi.cols());
  const Scalar pi = std::acos(Scalar(-1));
  for (Eigen::Index j = 0; j < model.phi.cols(); ++j) {
    for (Eigen::Index i = 0; i < model.phi.rows(); ++i) {
      const bool masked = !(magnitude(i, j) >= cutoff) || magnitude(i, j) == Scalar(0);
      out.masked(i, j) = masked;
      Scalar angle = masked ? Scalar(0) : std::arg(model.phi(i, j));
      if (angle <= -pi) angle = pi;
      out.phase(i, j) = angle;
    }
  }
  return out;
}

/// Plot-ready magnitude and phase surfaces, rows = embedding coordinate,
/// columns = mode.
struct ModeSurface {
  Eigen::MatrixXd magnitude;
  Eigen::MatrixXd phase;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> masked;
};

template <typename Scalar>
ModeSurface mode_surface(const DmdcModel<Scalar>& model) {
  const ModePhase<Scalar> ph = mode_phase(model);
  return {mode_magnitude(model).template cast<double>(), ph.phase.template cast<double>(), ph.masked};
}

}  // namespace dmdgraph
