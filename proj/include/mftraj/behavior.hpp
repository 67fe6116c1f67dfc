#pragma once

// Graph centralities per agent and frame, and the magnitude / tendency /
// curvature criteria stacked into the 18-wide behavior feature tensor.
//
//   degree       cumulative neighbour count over the window
//   closeness    (|N| - 1) / sum of neighbour distances
//   eigenvector  sum of neighbour distances / spectral radius of A
//   betweenness  hop-count shortest-path share over unordered pairs
//   power        sum_k (B^k)_ii / k!          (B = binarized A)
//   katz         sum_k alpha^k (B^k 1)_i + beta^k, alpha = alpha_frac / rho(B)

#include <array>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "mftraj/proximity_graph.hpp"
#include "mftraj/scene.hpp"

namespace mftraj {

struct CentralityParams {
  int k_max = 6;
  double alpha_frac = 0.9;
  double beta = 0.5;
  bool instantaneous_degree = false;
};

inline constexpr int kCentralityCount = 6;
inline constexpr int kBehaviorFeatures = 3 * kCentralityCount;

using CentralityArray = Eigen::Matrix<double, kCentralityCount, 1>;

struct CentralityVector {
  double degree = 0.0;
  double closeness = 0.0;
  double eigenvector = 0.0;
  double betweenness = 0.0;
  double power = 0.0;
  double katz = 0.0;

  CentralityArray as_array() const;
};

/// Largest-magnitude eigenvalue of a symmetric non-negative matrix by shifted
/// power iteration with a Rayleigh-quotient estimate. Returns 0 for the zero
/// matrix; throws NumericError (with the matrix) if it fails to converge.
double spectral_radius(const Eigen::MatrixXd& matrix, double tolerance = 1e-10, int max_iterations = 500);

/// Per-frame degree series of one agent (scene index); absent frames add 0.
std::vector<double> degree_centrality(std::span<const ProximityGraph> series, int agent,
                                      bool instantaneous = false);

double closeness_centrality(const ProximityGraph& graph, Eigen::Index node);
double eigenvector_centrality(const ProximityGraph& graph, Eigen::Index node);
double betweenness_centrality(const ProximityGraph& graph, Eigen::Index node);
double power_centrality(const ProximityGraph& graph, Eigen::Index node, int k_max = 6);
double katz_centrality(const ProximityGraph& graph, Eigen::Index node, int k_max = 6, double alpha_frac = 0.9,
                       double beta = 0.5);

/// All nodes of one frame at once; the per-node functions above forward here.
Eigen::VectorXd closeness_all(const ProximityGraph& graph);
Eigen::VectorXd eigenvector_all(const ProximityGraph& graph);
Eigen::VectorXd betweenness_all(const ProximityGraph& graph);
Eigen::VectorXd power_all(const ProximityGraph& graph, int k_max);
Eigen::VectorXd katz_all(const ProximityGraph& graph, int k_max, double alpha_frac, double beta);

/// Centralities of every scene agent at every frame: result[agent][frame].
/// Absent agents get zeros, except that the cumulative degree carries over.
std::vector<std::vector<CentralityVector>> centrality_series(std::span<const ProximityGraph> series,
                                                             std::size_t agent_count,
                                                             const CentralityParams& params);

struct BehaviorCriteria {
  CentralityArray bmi = CentralityArray::Zero();
  CentralityArray bti = CentralityArray::Zero();
  CentralityArray bci = CentralityArray::Zero();
};

/// |J|, |dJ/dt| by backward difference, |d2J/dt2| by backward second
/// difference; the derivatives are zero where the stencil is incomplete.
std::vector<BehaviorCriteria> behavior_criteria(std::span<const CentralityVector> series, double dt);

/// Dense [agents, frames, 18] array, row-major, with per agent-frame presence.
struct BehaviorTensor {
  Eigen::Index agents = 0;
  Eigen::Index frames = 0;
  Eigen::VectorXd values;
  std::vector<bool> present;

  double at(Eigen::Index agent, Eigen::Index frame, Eigen::Index feature) const {
    return values[(agent * frames + frame) * kBehaviorFeatures + feature];
  }
  double& at(Eigen::Index agent, Eigen::Index frame, Eigen::Index feature) {
    return values[(agent * frames + frame) * kBehaviorFeatures + feature];
  }
  bool is_present(Eigen::Index agent, Eigen::Index frame) const {
    return present[static_cast<std::size_t>(agent * frames + frame)];
  }
};

/// Unstandardized features; rows of absent agent-frames are zero.
BehaviorTensor behavior_tensor(const TrajectoryScene& scene, double radius_m, const CentralityParams& params);

/// Per-feature mean and standard deviation over present agent-frames.
struct FeatureStats {
  Eigen::Matrix<double, kBehaviorFeatures, 1> mean = Eigen::Matrix<double, kBehaviorFeatures, 1>::Zero();
  Eigen::Matrix<double, kBehaviorFeatures, 1> stddev = Eigen::Matrix<double, kBehaviorFeatures, 1>::Ones();

  bool operator==(const FeatureStats&) const = default;
};

FeatureStats fit_feature_stats(std::span<const BehaviorTensor> tensors);

/// (x - mean) / stddev on present rows; absent rows stay zero.
BehaviorTensor standardize(const BehaviorTensor& tensor, const FeatureStats& stats);

/// agent, frame, then the 18 features (bmi_*, bti_*, bci_*).
void write_behavior_csv(std::ostream& out, const BehaviorTensor& tensor);

}  // namespace mftraj
