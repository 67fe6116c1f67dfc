#include "mftraj/proximity_graph.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "mftraj/error.hpp"

namespace mftraj {

std::optional<Eigen::Index> ProximityGraph::local_index(int agent_index) const {
  for (std::size_t i = 0; i < node_ids.size(); ++i)
    if (node_ids[i] == agent_index) return static_cast<Eigen::Index>(i);
  return std::nullopt;
}

Eigen::MatrixXd ProximityGraph::binary_adjacency() const {
  return (adjacency.array() > 0.0).cast<double>().matrix();
}

ProximityGraph build_graph(std::span<const Point> positions, const std::vector<bool>& valid, double radius_m,
                           int frame) {
  if (!(radius_m > 0.0)) throw ConfigError("graph radius must be positive");
  if (valid.size() != positions.size()) throw InputError("validity flags do not match positions");
  ProximityGraph g;
  g.frame = frame;
  g.radius_m = radius_m;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (!valid[i]) continue;
    if (!positions[i].allFinite())
      throw InputError("non-finite coordinate for agent " + std::to_string(i) + " at frame " + std::to_string(frame));
    g.node_ids.push_back(static_cast<int>(i));
  }
  if (g.node_ids.empty()) throw InputError("no valid agent at frame " + std::to_string(frame));
  const Eigen::Index n = g.node_count();
  g.adjacency = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = (positions[static_cast<std::size_t>(g.node_ids[static_cast<std::size_t>(i)])] -
                        positions[static_cast<std::size_t>(g.node_ids[static_cast<std::size_t>(j)])])
                           .norm();
      if (d <= radius_m) {
        const double w = std::max(d, kCoincidentDistance);
        g.adjacency(i, j) = w;
        g.adjacency(j, i) = w;
      }
    }
  }
  return g;
}

std::vector<ProximityGraph> graph_series(const TrajectoryScene& scene, double radius_m) {
  const std::size_t frames = scene.history_length();
  if (frames == 0) throw InputError("scene " + scene.scene_id + " has no history");
  std::vector<ProximityGraph> graphs;
  graphs.reserve(frames);
  std::vector<Point> positions(scene.node_count());
  std::vector<bool> valid(scene.node_count());
  for (std::size_t k = 0; k < frames; ++k) {
    for (std::size_t a = 0; a < scene.node_count(); ++a) {
      positions[a] = scene.agent(a).positions[k];
      valid[a] = scene.agent(a).observed[k];
    }
    graphs.push_back(build_graph(positions, valid, radius_m, static_cast<int>(k)));
  }
  return graphs;
}

std::vector<Eigen::Index> neighbor_set(const ProximityGraph& graph, Eigen::Index node) {
  if (node < 0 || node >= graph.node_count())
    throw BoundsError("node " + std::to_string(node) + " not in graph of " + std::to_string(graph.node_count()));
  std::vector<Eigen::Index> out;
  for (Eigen::Index j = 0; j < graph.node_count(); ++j)
    if (graph.adjacency(node, j) > 0.0) out.push_back(j);
  return out;
}

void write_adjacency_csv(std::ostream& out, std::span<const ProximityGraph> graphs) {
  out << "frame,i,j,weight\n";
  char buffer[40];
  for (const ProximityGraph& g : graphs) {
    for (Eigen::Index i = 0; i < g.node_count(); ++i) {
      for (Eigen::Index j = 0; j < g.node_count(); ++j) {
        if (g.adjacency(i, j) <= 0.0) continue;
        std::snprintf(buffer, sizeof buffer, "%.17g", g.adjacency(i, j));
        out << g.frame << ',' << g.node_ids[static_cast<std::size_t>(i)] << ','
            << g.node_ids[static_cast<std::size_t>(j)] << ',' << buffer << '\n';
      }
    }
  }
}

}  // namespace mftraj
