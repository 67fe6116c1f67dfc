#include "mftraj/behavior.hpp"

#include <cmath>
#include <cstdio>
#include <deque>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

#include <Eigen/LU>

#include "mftraj/error.hpp"

namespace mftraj {

namespace {

constexpr double kEmptySpectrum = 1e-9;

void check_node(const ProximityGraph& graph, Eigen::Index node) {
  if (node < 0 || node >= graph.node_count())
    throw BoundsError("node " + std::to_string(node) + " not in graph of " + std::to_string(graph.node_count()));
}

}  // namespace

CentralityArray CentralityVector::as_array() const {
  CentralityArray a;
  a << degree, closeness, eigenvector, betweenness, power, katz;
  return a;
}

namespace {

/// A few Rayleigh-quotient iterations on the converged power-iteration pair.
/// The stopping rule above bounds the change per step, not the error, which
/// can stay near 1e-10 when the spectral gap is small; the cubic refinement
/// removes that. A result below the power estimate would be a different
/// eigenvalue and is rejected.
double polish(const Eigen::MatrixXd& matrix, Eigen::VectorXd v, double rho) {
  const double floor = rho;
  const double scale = std::max(1.0, std::abs(rho));
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(matrix.rows(), matrix.cols());
  double best = rho;
  for (int it = 0; it < 6; ++it) {
    if ((matrix * v - rho * v).norm() <= 1e-14 * scale) break;
    const Eigen::VectorXd x = (matrix - rho * identity).fullPivLu().solve(v);
    if (!x.allFinite() || x.norm() == 0.0) break;
    v = x / x.norm();
    rho = v.dot(matrix * v);
    if (rho >= floor - 1e-9 * scale) best = rho;
  }
  return best;
}

}  // namespace

namespace {

/// Shifted power iteration on one connected block, where the Perron root is
/// simple. Returns nullopt if the iteration does not settle.
std::optional<double> block_radius(const Eigen::MatrixXd& block, double tolerance, int max_iterations) {
  const Eigen::Index n = block.rows();
  // Shifting by an upper bound of the spectrum makes the Perron root the
  // unique dominant eigenvalue even for bipartite graphs.
  const double shift = block.cwiseAbs().rowwise().sum().maxCoeff();
  if (shift == 0.0) return 0.0;
  Eigen::VectorXd v = Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
  Eigen::VectorXd av = block * v;
  double estimate = v.dot(av);
  for (int it = 0; it < max_iterations; ++it) {
    Eigen::VectorXd w = av + shift * v;
    v = w / w.norm();
    av.noalias() = block * v;
    const double next = v.dot(av);
    if (std::abs(next - estimate) <= tolerance * std::max(1.0, std::abs(next))) return polish(block, v, next);
    estimate = next;
  }
  return std::nullopt;
}

}  // namespace

double spectral_radius(const Eigen::MatrixXd& matrix, double tolerance, int max_iterations) {
  const Eigen::Index n = matrix.rows();
  if (n == 0) return 0.0;
  // The radius of a non-negative symmetric matrix is the largest radius of
  // its connected blocks; splitting first avoids the near-degenerate
  // spectra of several similar components.
  std::vector<int> component(static_cast<std::size_t>(n), -1);
  double radius = 0.0;
  for (Eigen::Index root = 0; root < n; ++root) {
    if (component[static_cast<std::size_t>(root)] >= 0) continue;
    std::vector<Eigen::Index> members{root};
    component[static_cast<std::size_t>(root)] = static_cast<int>(root);
    for (std::size_t head = 0; head < members.size(); ++head)
      for (Eigen::Index j = 0; j < n; ++j)
        if (matrix(members[head], j) != 0.0 && component[static_cast<std::size_t>(j)] < 0) {
          component[static_cast<std::size_t>(j)] = static_cast<int>(root);
          members.push_back(j);
        }
    const auto m = static_cast<Eigen::Index>(members.size());
    Eigen::MatrixXd block(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
      for (Eigen::Index b = 0; b < m; ++b) block(a, b) = matrix(members[a], members[b]);
    const auto r = block_radius(block, tolerance, max_iterations);
    if (!r) {
      std::ostringstream dump;
      dump << "power iteration did not converge in " << max_iterations << " iterations for adjacency\n" << matrix;
      throw NumericError(dump.str());
    }
    radius = std::max(radius, *r);
  }
  return radius;
}

std::vector<double> degree_centrality(std::span<const ProximityGraph> series, int agent, bool instantaneous) {
  std::vector<double> out;
  out.reserve(series.size());
  double running = 0.0;
  for (const ProximityGraph& g : series) {
    double count = 0.0;
    if (const auto local = g.local_index(agent)) count = static_cast<double>(neighbor_set(g, *local).size());
    running = instantaneous ? count : running + count;
    out.push_back(running);
  }
  return out;
}

Eigen::VectorXd closeness_all(const ProximityGraph& graph) {
  const Eigen::Index n = graph.node_count();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double neighbors = static_cast<double>((graph.adjacency.row(i).array() > 0.0).count());
    if (neighbors <= 1.0) continue;
    out[i] = (neighbors - 1.0) / graph.adjacency.row(i).sum();
  }
  return out;
}

Eigen::VectorXd eigenvector_all(const ProximityGraph& graph) {
  const double lambda = spectral_radius(graph.adjacency);
  if (lambda < kEmptySpectrum) return Eigen::VectorXd::Zero(graph.node_count());
  return graph.adjacency.rowwise().sum() / lambda;
}

Eigen::VectorXd betweenness_all(const ProximityGraph& graph) {
  // Brandes accumulation over hop-count BFS from every source.
  const Eigen::Index n = graph.node_count();
  const Eigen::MatrixXd binary = graph.binary_adjacency();
  Eigen::VectorXd centrality = Eigen::VectorXd::Zero(n);
  std::vector<std::vector<Eigen::Index>> predecessors(static_cast<std::size_t>(n));
  std::vector<double> sigma(static_cast<std::size_t>(n)), delta(static_cast<std::size_t>(n));
  std::vector<int> dist(static_cast<std::size_t>(n));
  std::vector<Eigen::Index> order;
  for (Eigen::Index s = 0; s < n; ++s) {
    for (auto& p : predecessors) p.clear();
    std::fill(sigma.begin(), sigma.end(), 0.0);
    std::fill(delta.begin(), delta.end(), 0.0);
    std::fill(dist.begin(), dist.end(), -1);
    order.clear();
    sigma[static_cast<std::size_t>(s)] = 1.0;
    dist[static_cast<std::size_t>(s)] = 0;
    std::deque<Eigen::Index> queue{s};
    while (!queue.empty()) {
      const Eigen::Index v = queue.front();
      queue.pop_front();
      order.push_back(v);
      for (Eigen::Index w = 0; w < n; ++w) {
        if (binary(v, w) == 0.0) continue;
        auto& dw = dist[static_cast<std::size_t>(w)];
        if (dw < 0) {
          dw = dist[static_cast<std::size_t>(v)] + 1;
          queue.push_back(w);
        }
        if (dw == dist[static_cast<std::size_t>(v)] + 1) {
          sigma[static_cast<std::size_t>(w)] += sigma[static_cast<std::size_t>(v)];
          predecessors[static_cast<std::size_t>(w)].push_back(v);
        }
      }
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const auto w = static_cast<std::size_t>(*it);
      for (Eigen::Index v : predecessors[w])
        delta[static_cast<std::size_t>(v)] += sigma[static_cast<std::size_t>(v)] / sigma[w] * (1.0 + delta[w]);
      if (*it != s) centrality[*it] += delta[w];
    }
  }
  // Each unordered pair was counted from both endpoints.
  return centrality / 2.0;
}

Eigen::VectorXd power_all(const ProximityGraph& graph, int k_max) {
  if (k_max < 1) throw ConfigError("power centrality needs k_max >= 1");
  const Eigen::MatrixXd binary = graph.binary_adjacency();
  const Eigen::Index n = graph.node_count();
  Eigen::MatrixXd walk = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  double factorial = 1.0;
  for (int k = 1; k <= k_max; ++k) {
    walk = walk * binary;
    factorial *= k;
    out += walk.diagonal() / factorial;
  }
  return out;
}

Eigen::VectorXd katz_all(const ProximityGraph& graph, int k_max, double alpha_frac, double beta) {
  if (k_max < 1) throw ConfigError("katz centrality needs k_max >= 1");
  if (alpha_frac < 0.0 || alpha_frac >= 1.0) throw ConfigError("katz alpha fraction must lie in [0, 1)");
  const Eigen::MatrixXd binary = graph.binary_adjacency();
  const Eigen::Index n = graph.node_count();
  const double rho = spectral_radius(binary);
  const double alpha = rho < kEmptySpectrum ? 0.0 : alpha_frac / rho;
  Eigen::VectorXd walks = Eigen::VectorXd::Ones(n);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  double alpha_k = 1.0, beta_k = 1.0;
  for (int k = 1; k <= k_max; ++k) {
    walks = binary * walks;
    alpha_k *= alpha;
    beta_k *= beta;
    out.array() += alpha_k * walks.array() + beta_k;
  }
  return out;
}

double closeness_centrality(const ProximityGraph& graph, Eigen::Index node) {
  check_node(graph, node);
  return closeness_all(graph)[node];
}

double eigenvector_centrality(const ProximityGraph& graph, Eigen::Index node) {
  check_node(graph, node);
  return eigenvector_all(graph)[node];
}

double betweenness_centrality(const ProximityGraph& graph, Eigen::Index node) {
  check_node(graph, node);
  return betweenness_all(graph)[node];
}

double power_centrality(const ProximityGraph& graph, Eigen::Index node, int k_max) {
  check_node(graph, node);
  return power_all(graph, k_max)[node];
}

double katz_centrality(const ProximityGraph& graph, Eigen::Index node, int k_max, double alpha_frac, double beta) {
  check_node(graph, node);
  return katz_all(graph, k_max, alpha_frac, beta)[node];
}

std::vector<std::vector<CentralityVector>> centrality_series(std::span<const ProximityGraph> series,
                                                             std::size_t agent_count,
                                                             const CentralityParams& params) {
  std::vector<std::vector<CentralityVector>> out(agent_count, std::vector<CentralityVector>(series.size()));
  std::vector<double> running_degree(agent_count, 0.0);
  for (std::size_t t = 0; t < series.size(); ++t) {
    const ProximityGraph& g = series[t];
    const Eigen::VectorXd closeness = closeness_all(g), eigen = eigenvector_all(g), between = betweenness_all(g),
                          power = power_all(g, params.k_max),
                          katz = katz_all(g, params.k_max, params.alpha_frac, params.beta);
    std::vector<double> count(agent_count, 0.0);
    for (Eigen::Index i = 0; i < g.node_count(); ++i) {
      const auto agent = static_cast<std::size_t>(g.node_ids[static_cast<std::size_t>(i)]);
      if (agent >= agent_count) throw BoundsError("graph node outside the scene's agents");
      count[agent] = static_cast<double>((g.adjacency.row(i).array() > 0.0).count());
      CentralityVector& c = out[agent][t];
      c.closeness = closeness[i];
      c.eigenvector = eigen[i];
      c.betweenness = between[i];
      c.power = power[i];
      c.katz = katz[i];
    }
    for (std::size_t a = 0; a < agent_count; ++a) {
      running_degree[a] = params.instantaneous_degree ? count[a] : running_degree[a] + count[a];
      out[a][t].degree = running_degree[a];
    }
  }
  return out;
}

std::vector<BehaviorCriteria> behavior_criteria(std::span<const CentralityVector> series, double dt) {
  if (!(dt > 0.0)) throw ConfigError("behavior criteria need dt > 0");
  std::vector<BehaviorCriteria> out(series.size());
  for (std::size_t t = 0; t < series.size(); ++t) {
    const CentralityArray j = series[t].as_array();
    out[t].bmi = j.cwiseAbs();
    if (t >= 1) out[t].bti = ((j - series[t - 1].as_array()) / dt).cwiseAbs();
    if (t >= 2)
      out[t].bci = ((j - 2.0 * series[t - 1].as_array() + series[t - 2].as_array()) / (dt * dt)).cwiseAbs();
  }
  return out;
}

BehaviorTensor behavior_tensor(const TrajectoryScene& scene, double radius_m, const CentralityParams& params) {
  const auto graphs = graph_series(scene, radius_m);
  const std::size_t agents = scene.node_count();
  const auto series = centrality_series(graphs, agents, params);
  BehaviorTensor out;
  out.agents = static_cast<Eigen::Index>(agents);
  out.frames = static_cast<Eigen::Index>(scene.history_length());
  out.values = Eigen::VectorXd::Zero(out.agents * out.frames * kBehaviorFeatures);
  out.present.assign(agents * scene.history_length(), false);
  const double dt = 1.0 / scene.sample_rate_hz;
  for (std::size_t a = 0; a < agents; ++a) {
    const auto criteria = behavior_criteria(series[a], dt);
    for (std::size_t t = 0; t < scene.history_length(); ++t) {
      if (!scene.agent(a).observed[t]) continue;
      const auto ai = static_cast<Eigen::Index>(a), ti = static_cast<Eigen::Index>(t);
      out.present[a * scene.history_length() + t] = true;
      for (int f = 0; f < kCentralityCount; ++f) {
        out.at(ai, ti, f) = criteria[t].bmi[f];
        out.at(ai, ti, kCentralityCount + f) = criteria[t].bti[f];
        out.at(ai, ti, 2 * kCentralityCount + f) = criteria[t].bci[f];
      }
    }
  }
  return out;
}

FeatureStats fit_feature_stats(std::span<const BehaviorTensor> tensors) {
  using Column = Eigen::Matrix<double, kBehaviorFeatures, 1>;
  Column sum = Column::Zero(), sum_sq = Column::Zero();
  double count = 0.0;
  for (const BehaviorTensor& t : tensors) {
    for (Eigen::Index a = 0; a < t.agents; ++a) {
      for (Eigen::Index f = 0; f < t.frames; ++f) {
        if (!t.is_present(a, f)) continue;
        const Column row = t.values.segment<kBehaviorFeatures>((a * t.frames + f) * kBehaviorFeatures);
        sum += row;
        sum_sq += row.cwiseProduct(row);
        count += 1.0;
      }
    }
  }
  FeatureStats stats;
  if (count == 0.0) return stats;
  stats.mean = sum / count;
  const Column var = (sum_sq / count - stats.mean.cwiseProduct(stats.mean)).cwiseMax(0.0);
  for (int f = 0; f < kBehaviorFeatures; ++f) stats.stddev[f] = var[f] > 1e-12 ? std::sqrt(var[f]) : 1.0;
  return stats;
}

BehaviorTensor standardize(const BehaviorTensor& tensor, const FeatureStats& stats) {
  BehaviorTensor out = tensor;
  for (Eigen::Index a = 0; a < tensor.agents; ++a) {
    for (Eigen::Index f = 0; f < tensor.frames; ++f) {
      if (!tensor.is_present(a, f)) continue;
      auto row = out.values.segment<kBehaviorFeatures>((a * tensor.frames + f) * kBehaviorFeatures);
      row = (row - stats.mean).cwiseQuotient(stats.stddev);
    }
  }
  return out;
}

void write_behavior_csv(std::ostream& out, const BehaviorTensor& tensor) {
  static constexpr std::array<const char*, kCentralityCount> names{"degree",      "closeness", "eigenvector",
                                                                   "betweenness", "power",     "katz"};
  out << "agent,frame";
  for (const char* group : {"bmi", "bti", "bci"})
    for (const char* n : names) out << ',' << group << '_' << n;
  out << '\n';
  char buffer[40];
  for (Eigen::Index a = 0; a < tensor.agents; ++a) {
    for (Eigen::Index t = 0; t < tensor.frames; ++t) {
      out << a << ',' << t;
      for (int f = 0; f < kBehaviorFeatures; ++f) {
        std::snprintf(buffer, sizeof buffer, "%.17g", tensor.at(a, t, f));
        out << ',' << buffer;
      }
      out << '\n';
    }
  }
}

}  // namespace mftraj
