#pragma once

// Graph signatures of a mode-magnitude matrix read as a weighted adjacency
// matrix: adaptive-threshold connectivity and the node-strength dispersion
// ("modularity proxy").
//
// Rectangular d x r matrices are supported; every n^2 normalization becomes
// n_rows * n_cols. Sums run over sorted values so that every metric is
// exactly invariant under row and column permutations.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dmdgraph/dmdc.hpp"
#include "dmdgraph/error.hpp"

namespace dmdgraph {

inline constexpr double kDefaultEpsilon = 1e-12;

template <typename Scalar = double>
class WeightedGraph {
 public:
  /// Throws Error(Domain) on negative or non-finite weights.
  explicit WeightedGraph(Mat<Scalar> weights) : weights_(std::move(weights)) {
    if (!weights_.allFinite()) throw Error(ErrorKind::Domain, "graph weights must be finite");
    if (weights_.size() > 0 && weights_.minCoeff() < Scalar(0))
      throw Error(ErrorKind::Domain, "graph weights must be nonnegative");
  }

  /// The graph whose weights are |Phi|.
  static WeightedGraph from_modes(const DmdcModel<Scalar>& model) {
    return WeightedGraph(mode_magnitude(model));
  }

  const Mat<Scalar>& weights() const { return weights_; }
  Eigen::Index rows() const { return weights_.rows(); }
  Eigen::Index cols() const { return weights_.cols(); }
  Eigen::Index size() const { return weights_.size(); }
  bool empty() const { return weights_.size() == 0; }

 private:
  Mat<Scalar> weights_;
};

template <typename Scalar = double>
struct GraphMetrics {
  Scalar mu = 0;
  Eigen::Index edges = 0;
  Scalar connectivity = 0;
  Vec<Scalar> strengths;
  Scalar mean_strength = 0;
  Scalar std_strength = 0;
  Scalar q_proxy = 0;
  Scalar epsilon = Scalar(kDefaultEpsilon);
};

namespace detail {

template <typename Scalar>
Scalar sorted_sum(std::vector<Scalar> values) {
  std::sort(values.begin(), values.end());
  Scalar acc = 0;
  for (Scalar v : values) acc += v;
  return acc;
}

// Mean of a set of values, clamped to [min, max] so that rounding can never
// push it outside the range of the data.
template <typename Derived>
typename Derived::Scalar bounded_mean(const Eigen::PlainObjectBase<Derived>& values) {
  using Scalar = typename Derived::Scalar;
  std::vector<Scalar> flat(values.data(), values.data() + values.size());
  const Scalar mean = sorted_sum(flat) / static_cast<Scalar>(values.size());
  return std::clamp(mean, values.minCoeff(), values.maxCoeff());
}

template <typename Scalar>
void require_nonempty(const WeightedGraph<Scalar>& g) {
  if (g.empty()) throw Error(ErrorKind::Domain, "graph has no entries");
}

}  // namespace detail

/// Mean entry magnitude, the threshold separating active from inactive edges.
template <typename Scalar>
Scalar adaptive_threshold(const WeightedGraph<Scalar>& g) {
  detail::require_nonempty(g);
  return detail::bounded_mean(g.weights());
}

/// Entry (i, j) is active iff weight(i, j) > mu, strictly.
template <typename Scalar>
Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> binarize(const WeightedGraph<Scalar>& g, Scalar mu) {
  if (!(mu >= Scalar(0))) throw Error(ErrorKind::Domain, "threshold must be >= 0");
  return g.weights().array() > mu;
}

template <typename Scalar>
GraphMetrics<Scalar> connectivity(const WeightedGraph<Scalar>& g) {
  GraphMetrics<Scalar> out;
  out.mu = adaptive_threshold(g);
  out.edges = binarize(g, out.mu).count();
  out.connectivity = static_cast<Scalar>(out.edges) / static_cast<Scalar>(g.size());
  return out;
}

/// Row sums (out-strength) of the weight matrix.
template <typename Scalar>
Vec<Scalar> node_strengths(const WeightedGraph<Scalar>& g) {
  Vec<Scalar> s(g.rows());
  std::vector<Scalar> row(static_cast<std::size_t>(g.cols()));
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    for (Eigen::Index j = 0; j < g.cols(); ++j) row[static_cast<std::size_t>(j)] = g.weights()(i, j);
    s(i) = detail::sorted_sum(row);
  }
  return s;
}

/// Coefficient of variation of node strengths: sigma_s / (mu_s + epsilon),
/// with the population (1/n) standard deviation.
template <typename Scalar>
GraphMetrics<Scalar> modularity_proxy(const WeightedGraph<Scalar>& g,
                                      Scalar epsilon = Scalar(kDefaultEpsilon)) {
  detail::require_nonempty(g);
  if (!(epsilon > Scalar(0))) throw Error(ErrorKind::Domain, "epsilon must be > 0");
  GraphMetrics<Scalar> out;
  out.epsilon = epsilon;
  out.strengths = node_strengths(g);
  out.mean_strength = detail::bounded_mean(out.strengths);
  std::vector<Scalar> sq(static_cast<std::size_t>(out.strengths.size()));
  for (Eigen::Index i = 0; i < out.strengths.size(); ++i) {
    const Scalar dev = out.strengths(i) - out.mean_strength;
    sq[static_cast<std::size_t>(i)] = dev * dev;
  }
  out.std_strength = std::sqrt(detail::sorted_sum(sq) / static_cast<Scalar>(out.strengths.size()));
  out.q_proxy = out.std_strength / (out.mean_strength + epsilon);
  return out;
}

/// Connectivity and modularity fields together.
template <typename Scalar>
GraphMetrics<Scalar> analyze_graph(const WeightedGraph<Scalar>& g,
                                   Scalar epsilon = Scalar(kDefaultEpsilon)) {
  GraphMetrics<Scalar> out = modularity_proxy(g, epsilon);
  const GraphMetrics<Scalar> conn = connectivity(g);
  out.mu = conn.mu;
  out.edges = conn.edges;
  out.connectivity = conn.connectivity;
  return out;
}

}  // namespace dmdgraph
