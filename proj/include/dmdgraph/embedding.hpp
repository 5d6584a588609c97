#pragma once

// Delay (Hankel) embedding of a scalar voltage trace into snapshot pairs.

#include <string>

#include <Eigen/Dense>

#include "dmdgraph/battery_sim.hpp"
#include "dmdgraph/error.hpp"

namespace dmdgraph {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// States x, one-step-advanced states x_next (both d x m) and inputs u (q x m).
template <typename Scalar = double>
struct SnapshotSet {
  Mat<Scalar> x;
  Mat<Scalar> x_next;
  Mat<Scalar> u;

  Eigen::Index dim() const { return x.rows(); }
  Eigen::Index count() const { return x.cols(); }
  Eigen::Index inputs() const { return u.rows(); }

  /// Throws Error(Data) when shapes disagree.
  void validate() const {
    if (x.rows() != x_next.rows() || x.cols() != x_next.cols())
      throw Error(ErrorKind::Data, "x and x_next must have identical shape");
    if (u.cols() != x.cols())
      throw Error(ErrorKind::Data, "u must have one column per snapshot");
    if (x.rows() == 0 || x.cols() == 0)
      throw Error(ErrorKind::Data, "empty snapshot set");
  }
};

/// Per-row means removed by center_snapshots.
template <typename Scalar = double>
struct SnapshotOffsets {
  Vec<Scalar> state;
  Vec<Scalar> input;
};

template <typename Scalar = double>
struct CenteredSnapshots {
  SnapshotSet<Scalar> snapshots;
  SnapshotOffsets<Scalar> offsets;
};

/// Column k of x holds v_k .. v_{k+d-1}; x_next is the same window one
/// sample later; u_k = i_{k+d-1}, the input acting on the transition. The
/// number of snapshots is m = L - d.
template <typename VDerived, typename IDerived>
SnapshotSet<typename VDerived::Scalar> build_snapshots(const Eigen::MatrixBase<VDerived>& voltage,
                                                       const Eigen::MatrixBase<IDerived>& current,
                                                       Eigen::Index d) {
  using Scalar = typename VDerived::Scalar;
  const Eigen::Index length = voltage.size();
  if (d < 1) throw Error(ErrorKind::Config, "embedding dimension must be >= 1");
  if (current.size() != length)
    throw Error(ErrorKind::Data, "voltage and current series differ in length");
  if (length < d + 1) {
    throw Error(ErrorKind::Data, "insufficient data: embedding dimension " + std::to_string(d) +
                                     " needs at least " + std::to_string(d + 1) +
                                     " samples, got " + std::to_string(length));
  }
  const Eigen::Index m = length - d;
  SnapshotSet<Scalar> s;
  s.x.resize(d, m);
  s.x_next.resize(d, m);
  s.u.resize(1, m);
  for (Eigen::Index k = 0; k < m; ++k) {
    s.x.col(k) = voltage.segment(k, d);
    s.x_next.col(k) = voltage.segment(k + 1, d);
    s.u(0, k) = current(k + d - 1);
  }
  return s;
}

inline SnapshotSet<double> build_snapshots(const sim::TimeSeries& series, Eigen::Index d) {
  return build_snapshots(series.voltages(), series.currents(), d);
}

/// Removes the per-row mean of x from both x and x_next, and the per-row mean
/// of u from u.
namespace detail {

// Row means clamped to the row range, so a constant row centers to exact zeros.
template <typename Scalar>
Vec<Scalar> row_means(const Mat<Scalar>& m) {
  return m.rowwise().mean().cwiseMax(m.rowwise().minCoeff()).cwiseMin(m.rowwise().maxCoeff());
}

}  // namespace detail

template <typename Scalar>
CenteredSnapshots<Scalar> center_snapshots(const SnapshotSet<Scalar>& s) {
  CenteredSnapshots<Scalar> out;
  out.offsets.state = detail::row_means(s.x);
  out.offsets.input = detail::row_means(s.u);
  out.snapshots.x = s.x.colwise() - out.offsets.state;
  out.snapshots.x_next = s.x_next.colwise() - out.offsets.state;
  out.snapshots.u = s.u.colwise() - out.offsets.input;
  return out;
}

template <typename Scalar>
SnapshotSet<Scalar> uncenter_snapshots(const CenteredSnapshots<Scalar>& c) {
  SnapshotSet<Scalar> s;
  s.x = c.snapshots.x.colwise() + c.offsets.state;
  s.x_next = c.snapshots.x_next.colwise() + c.offsets.state;
  s.u = c.snapshots.u.colwise() + c.offsets.input;
  return s;
}

/// Wraps raw snapshots with zero offsets, for fitting without centering.
template <typename Scalar>
CenteredSnapshots<Scalar> uncentered(SnapshotSet<Scalar> s) {
  CenteredSnapshots<Scalar> out;
  out.offsets.state = Vec<Scalar>::Zero(s.x.rows());
  out.offsets.input = Vec<Scalar>::Zero(s.u.rows());
  out.snapshots = std::move(s);
  return out;
}

}  // namespace dmdgraph
