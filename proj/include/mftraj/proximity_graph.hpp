#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "mftraj/scene.hpp"

namespace mftraj {

/// Distances below this floor are stored as the floor so that an edge
/// between coincident agents stays distinguishable from "no edge".
inline constexpr double kCoincidentDistance = 1e-6;
inline constexpr double kDefaultRadius = 30.0;

/// Per-frame geometric graph over the agents valid at that frame.
/// adjacency(i, j) is the distance between nodes i and j when it is within
/// the radius, 0 otherwise; symmetric with zero diagonal.
struct ProximityGraph {
  int frame = 0;
  std::vector<int> node_ids;  // scene agent indices, 0 = target
  double radius_m = kDefaultRadius;
  Eigen::MatrixXd adjacency;

  Eigen::Index node_count() const { return static_cast<Eigen::Index>(node_ids.size()); }
  std::optional<Eigen::Index> local_index(int agent_index) const;
  /// 1 where an edge exists, 0 elsewhere.
  Eigen::MatrixXd binary_adjacency() const;
};

ProximityGraph build_graph(std::span<const Point> positions, const std::vector<bool>& valid, double radius_m,
                           int frame = 0);

/// One graph per history frame; absent agents are left out of that frame.
std::vector<ProximityGraph> graph_series(const TrajectoryScene& scene, double radius_m);

/// Local node indices adjacent to local node `node`.
std::vector<Eigen::Index> neighbor_set(const ProximityGraph& graph, Eigen::Index node);

/// Debug dump: frame, i, j, weight for every nonzero entry (agent indices).
void write_adjacency_csv(std::ostream& out, std::span<const ProximityGraph> graphs);

}  // namespace mftraj
