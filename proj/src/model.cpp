#include "mftraj/model.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

#include "mftraj/error.hpp"
#include "mftraj/proximity_graph.hpp"
#include "parallel.hpp"

namespace mftraj {

// ---------------------------------------------------------------------------
// Configuration

void ModelConfig::validate() const {
  auto positive = [](const char* name, double v) {
    if (!(v > 0)) throw ConfigError(std::string(name) + " must be positive");
  };
  positive("t_h", t_h);
  positive("t_f", t_f);
  positive("sample_rate_hz", sample_rate_hz);
  positive("radius_m", radius_m);
  positive("k_max", k_max);
  positive("behavior_hidden", behavior_hidden);
  positive("vrnn_hidden", vrnn_hidden);
  positive("vrnn_latent", vrnn_latent);
  positive("position_hidden", position_hidden);
  positive("lstm_layers", lstm_layers);
  positive("gcn_layers", gcn_layers);
  positive("attention_heads", attention_heads);
  positive("proj_dim", proj_dim);
  positive("max_agents", max_agents);
  positive("groups", groups);
  positive("decoder_hidden", decoder_hidden);
  positive("learning_rate", learning_rate);
  positive("final_learning_rate", final_learning_rate);
  positive("batch_size", batch_size);
  positive("smooth_l1_beta", smooth_l1_beta);
  if (alpha_frac < 0.0 || alpha_frac >= 1.0) throw ConfigError("alpha_frac must lie in [0, 1)");
  if (katz_beta < 0.0) throw ConfigError("katz_beta must be non-negative");
  if (decay_fraction < 0.0 || decay_fraction > 1.0) throw ConfigError("decay_fraction must lie in [0, 1]");
  if (beta_kl < 0.0) throw ConfigError("beta_kl must be non-negative");
  if (decoder_hidden % groups != 0)
    throw ConfigError("decoder_hidden " + std::to_string(decoder_hidden) + " is not divisible by " +
                      std::to_string(groups) + " groups");
  if (!disable_linformer && feature_width() % attention_heads != 0)
    throw ConfigError("feature width " + std::to_string(feature_width()) + " is not divisible by " +
                      std::to_string(attention_heads) + " attention heads");
}

namespace {

template <typename Visitor>
void visit_fields(ModelConfig& c, Visitor&& v) {
  v("t_h", c.t_h);
  v("t_f", c.t_f);
  v("sample_rate_hz", c.sample_rate_hz);
  v("radius_m", c.radius_m);
  v("k_max", c.k_max);
  v("alpha_frac", c.alpha_frac);
  v("katz_beta", c.katz_beta);
  v("instantaneous_degree", c.instantaneous_degree);
  v("behavior_hidden", c.behavior_hidden);
  v("vrnn_hidden", c.vrnn_hidden);
  v("vrnn_latent", c.vrnn_latent);
  v("position_hidden", c.position_hidden);
  v("lstm_layers", c.lstm_layers);
  v("gcn_layers", c.gcn_layers);
  v("attention_heads", c.attention_heads);
  v("proj_dim", c.proj_dim);
  v("max_agents", c.max_agents);
  v("groups", c.groups);
  v("decoder_hidden", c.decoder_hidden);
  v("learning_rate", c.learning_rate);
  v("final_learning_rate", c.final_learning_rate);
  v("decay_fraction", c.decay_fraction);
  v("batch_size", c.batch_size);
  v("beta_kl", c.beta_kl);
  v("smooth_l1_beta", c.smooth_l1_beta);
  v("seed", c.seed);
  v("precision", c.precision);
  v("disable_behavior", c.disable_behavior);
  v("absolute_coords", c.absolute_coords);
  v("disable_interaction", c.disable_interaction);
  v("disable_linformer", c.disable_linformer);
  v("plain_gcn", c.plain_gcn);
}

std::string to_text(int v) { return std::to_string(v); }
std::string to_text(std::uint64_t v) { return std::to_string(v); }
std::string to_text(double v) { return format_double(v); }
std::string to_text(bool v) { return v ? "true" : "false"; }
std::string to_text(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }

void from_text(std::string_view key, const std::string& s, int& out) {
  const long long v = parse_integer(key, s);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw ConfigError("config key '" + std::string(key) + "' is out of range");
  out = static_cast<int>(v);
}
void from_text(std::string_view key, const std::string& s, std::uint64_t& out) {
  const long long v = parse_integer(key, s);
  if (v < 0) throw ConfigError("config key '" + std::string(key) + "' must be non-negative");
  out = static_cast<std::uint64_t>(v);
}
void from_text(std::string_view key, const std::string& s, double& out) { out = parse_double(key, s); }
void from_text(std::string_view key, const std::string& s, bool& out) { out = parse_bool(key, s); }
void from_text(std::string_view key, const std::string& s, Precision& out) {
  if (s == "f64")
    out = Precision::f64;
  else if (s == "f32")
    out = Precision::f32;
  else
    throw ConfigError("config key '" + std::string(key) + "' must be f32 or f64, got '" + s + "'");
}

}  // namespace

KeyValueConfig ModelConfig::to_key_values() const {
  KeyValueConfig kv;
  ModelConfig copy = *this;
  visit_fields(copy, [&](const char* key, auto& field) { kv.set(key, to_text(field)); });
  return kv;
}

void ModelConfig::apply(const KeyValueConfig& kv, bool ignore_unknown) {
  std::vector<std::string> known;
  visit_fields(*this, [&](const char* key, auto& field) {
    known.emplace_back(key);
    if (const auto value = kv.get(key)) from_text(key, *value, field);
  });
  if (ignore_unknown) return;
  for (const auto& [key, value] : kv.entries())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError("unknown model config key '" + key + "'");
}

ModelConfig ModelConfig::from_key_values(const KeyValueConfig& kv, bool ignore_unknown) {
  ModelConfig c;
  c.apply(kv, ignore_unknown);
  return c;
}

ModelConfig ablation_config(const ModelConfig& base, AblationModel model) {
  ModelConfig c = base;
  switch (model) {
    case AblationModel::A: c.disable_behavior = true; break;
    case AblationModel::B: c.absolute_coords = true; break;
    case AblationModel::C:
      c.disable_interaction = true;
      c.disable_linformer = true;
      break;
    case AblationModel::D: c.disable_linformer = true; break;
    case AblationModel::E: c.plain_gcn = true; break;
    case AblationModel::F: break;
  }
  return c;
}

char to_char(AblationModel model) { return static_cast<char>('A' + static_cast<int>(model)); }

// ---------------------------------------------------------------------------
// Scene preparation

PositionFeatures position_features(const TrajectoryScene& scene) {
  const Index n = static_cast<Index>(scene.node_count()), frames = static_cast<Index>(scene.history_length());
  PositionFeatures pf;
  pf.displacement = ad::RowMatrix<double>::Zero(frames * n, 2);
  pf.offset_to_target = ad::RowMatrix<double>::Zero(frames * n, 2);
  const AgentHistory& target = scene.target;
  for (Index a = 0; a < n; ++a) {
    const AgentHistory& h = scene.agent(static_cast<std::size_t>(a));
    for (Index t = 0; t < frames; ++t) {
      const auto k = static_cast<std::size_t>(t);
      if (!h.observed[k]) continue;
      if (t > 0 && h.observed[k - 1]) pf.displacement.row(t * n + a) = (h.positions[k] - h.positions[k - 1]).transpose();
      if (target.observed[k]) pf.offset_to_target.row(t * n + a) = (h.positions[k] - target.positions[k]).transpose();
    }
  }
  return pf;
}

namespace {

bool has_gaps(const TrajectoryScene& scene) {
  for (std::size_t a = 0; a < scene.node_count(); ++a)
    for (bool o : scene.agent(a).observed)
      if (!o) return true;
  return false;
}

TrajectoryScene checked_history(const TrajectoryScene& scene, const ModelConfig& config) {
  if (scene.history_length() != static_cast<std::size_t>(config.t_h) + 1)
    throw ConfigError("scene " + scene.scene_id + " has " + std::to_string(scene.history_length()) +
                      " history frames, the model expects t_h + 1 = " + std::to_string(config.t_h + 1));
  if (!scene.target_future.empty() && scene.target_future.size() != static_cast<std::size_t>(config.t_f))
    throw ConfigError("scene " + scene.scene_id + " has " + std::to_string(scene.target_future.size()) +
                      " future frames, the model predicts t_f = " + std::to_string(config.t_f));
  if (scene.node_count() > static_cast<std::size_t>(config.max_agents))
    throw ConfigError("scene " + scene.scene_id + " has " + std::to_string(scene.node_count()) +
                      " agents, above max_agents = " + std::to_string(config.max_agents));
  return has_gaps(scene) ? impute_linear(scene, observation_mask(scene)) : scene;
}

}  // namespace

FeatureStats fit_behavior_stats(std::span<const TrajectoryScene> scenes, const ModelConfig& config) {
  std::vector<BehaviorTensor> tensors;
  tensors.reserve(scenes.size());
  for (const auto& s : scenes) tensors.push_back(behavior_tensor(checked_history(s, config), config.radius_m, config.centrality()));
  return fit_feature_stats(tensors);
}

PreparedScene prepare_scene(const TrajectoryScene& raw, const ModelConfig& config, const FeatureStats& stats,
                            bool with_future) {
  const TrajectoryScene scene = checked_history(raw, config);
  if (with_future && scene.target_future.size() != static_cast<std::size_t>(config.t_f))
    throw ConfigError("scene " + scene.scene_id + " has no ground-truth future of " + std::to_string(config.t_f) +
                      " frames");
  PreparedScene p;
  p.scene_id = scene.scene_id;
  p.agents = static_cast<Index>(scene.node_count());
  p.frames = static_cast<Index>(scene.history_length());
  const Index n = p.agents, frames = p.frames;

  if (!config.disable_behavior) {
    const BehaviorTensor bt = standardize(behavior_tensor(scene, config.radius_m, config.centrality()), stats);
    p.behavior.resize(frames * n, kBehaviorFeatures);
    for (Index t = 0; t < frames; ++t)
      for (Index a = 0; a < n; ++a)
        for (Index f = 0; f < kBehaviorFeatures; ++f) p.behavior(t * n + a, f) = bt.at(a, t, f);
  }

  const PositionFeatures pf = position_features(scene);
  p.position.resize(frames * n, 4);
  if (config.absolute_coords) {
    for (Index t = 0; t < frames; ++t) {
      for (Index a = 0; a < n; ++a) {
        const AgentHistory& h = scene.agent(static_cast<std::size_t>(a));
        const auto k = static_cast<std::size_t>(t);
        p.position.block<1, 2>(t * n + a, 0) =
            h.observed[k] ? Eigen::RowVector2d(h.positions[k].transpose()) : Eigen::RowVector2d::Zero();
      }
    }
    p.position.rightCols(2) = pf.displacement;
  } else {
    p.position.leftCols(2) = pf.displacement;
    p.position.rightCols(2) = pf.offset_to_target;
  }

  std::vector<Point> last(static_cast<std::size_t>(n));
  for (Index a = 0; a < n; ++a) {
    const AgentHistory& h = scene.agent(static_cast<std::size_t>(a));
    for (std::size_t k = h.frame_count(); k-- > 0;) {
      if (h.observed[k]) {
        last[static_cast<std::size_t>(a)] = h.positions[k];
        break;
      }
    }
  }
  p.anchor = last.front();
  p.offsets.resize(n * n, 2);
  p.mask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(n, n, true);
  p.adjacency = ad::RowMatrix<double>::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    p.mask(i, i) = false;
    for (Index j = 0; j < n; ++j) {
      const Point d = last[static_cast<std::size_t>(i)] - last[static_cast<std::size_t>(j)];
      p.offsets.row(i * n + j) = d.transpose();
      if (i != j && d.norm() <= config.radius_m) p.adjacency(i, j) = 1.0;
    }
  }

  if (!scene.target_future.empty()) {
    p.future.resize(config.t_f, 2);
    for (Index t = 0; t < config.t_f; ++t) p.future.row(t) = scene.target_future[static_cast<std::size_t>(t)].transpose();
  }
  return p;
}

// ---------------------------------------------------------------------------
// Network

template <typename Scalar>
Network<Scalar>::Network(const ModelConfig& c, const ParameterBuilder<Scalar>& b) : config(c) {
  config.validate();
  if (!c.disable_behavior) {
    vrnn = VrnnCell<Scalar>(b.child("behavior.vrnn"), kBehaviorFeatures, c.vrnn_hidden, c.vrnn_latent);
    behavior_gru = Gru<Scalar>(b.child("behavior.gru"), c.vrnn_hidden, c.behavior_hidden);
  }
  position_lstm = Lstm<Scalar>(b.child("position.lstm"), 4, c.position_hidden, c.lstm_layers);
  const Index width = c.feature_width();
  if (!c.disable_interaction) {
    for (int k = 0; k < c.gcn_layers; ++k) {
      const auto child = b.child("interaction.gcn" + std::to_string(k));
      if (c.plain_gcn)
        plain_gcn.emplace_back(child, width);
      else
        gcn.emplace_back(child, width, 2);
    }
  }
  if (!c.disable_linformer)
    attention = LinearAttention<Scalar>(b.child("interaction.attention"), width, c.attention_heads, c.proj_dim,
                                        c.max_agents);
  decoder = TrajectoryDecoder<Scalar>(b.child("decoder"), width, c.decoder_hidden, c.groups, c.t_f);
}

template <typename Scalar>
ForwardResult<Scalar> Network<Scalar>::forward(const PreparedScene& scene, const Tensor<Scalar>& noise) const {
  const Index n = scene.agents, frames = scene.frames;
  if (frames != config.t_h + 1)
    throw ShapeError("forward: scene " + scene.scene_id + " has " + std::to_string(frames) + " frames, expected " +
                     std::to_string(config.t_h + 1));
  ForwardResult<Scalar> out;
  out.kl = Tensor<Scalar>::scalar(Scalar(0));
  std::vector<Tensor<Scalar>> agent_features;

  if (!config.disable_behavior) {
    if (scene.behavior.rows() != frames * n)
      throw ShapeError("behavior encoder: scene " + scene.scene_id + " was prepared without behavior features");
    const Tensor<Scalar> x = ad::reshape(Tensor<Scalar>::from_matrix(scene.behavior.cast<Scalar>()),
                                         {frames, n, kBehaviorFeatures});
    auto [features, kl] = vrnn.run(x, noise);
    const Tensor<Scalar> seq = ad::reshape(ad::concat(features, 0), {frames, n, config.vrnn_hidden});
    agent_features.push_back(behavior_gru.encode(seq).back());
    out.kl = ad::scale(kl, Scalar(1) / static_cast<Scalar>(frames * n));
  }

  const Tensor<Scalar> positions =
      ad::reshape(Tensor<Scalar>::from_matrix(scene.position.cast<Scalar>()), {frames, n, 4});
  agent_features.push_back(position_lstm.encode(positions).back());
  Tensor<Scalar> z = agent_features.size() == 1 ? agent_features.front() : ad::concat(agent_features, 1);

  if (!config.disable_interaction) {
    if (config.plain_gcn) {
      const Tensor<Scalar> adjacency = Tensor<Scalar>::from_matrix(scene.adjacency.cast<Scalar>());
      for (const auto& layer : plain_gcn) z = layer(z, adjacency);
    } else {
      const PairGraph<Scalar> graph = make_pair_graph<Scalar>(scene.offsets, scene.mask);
      for (const auto& layer : gcn) z = layer(z, graph);
    }
  }
  if (!config.disable_linformer) z = attention(z);

  const Tensor<Scalar> context = ad::slice(z, 0, 0, 1);
  const Tensor<Scalar> anchor = Tensor<Scalar>::constant({2}, scene.anchor.cast<Scalar>());
  out.trajectory = decoder.decode(context, anchor, !config.absolute_coords);
  return out;
}

template <typename Scalar>
MFTrajModel<Scalar>::MFTrajModel(const ModelConfig& config)
    : network_([&] {
        std::mt19937_64 rng(mix_seed(config.seed, 0x696e6974 /* init stream */));
        return Network<Scalar>(config, ParameterBuilder<Scalar>(parameters_, rng));
      }()) {}

template <typename Scalar>
MFTrajModel<Scalar>::MFTrajModel(const ModelConfig& config, ParameterStore<Scalar> parameters)
    : parameters_(std::move(parameters)), network_(config, ParameterBuilder<Scalar>(parameters_)) {
  // Binding only looks names up; make sure nothing is left over either.
  ParameterStore<Scalar> expected;
  std::mt19937_64 rng(0);
  Network<Scalar> probe(config, ParameterBuilder<Scalar>(expected, rng));
  if (expected.size() != parameters_.size())
    throw ConfigError("parameter set has " + std::to_string(parameters_.size()) + " tensors, the configuration needs " +
                      std::to_string(expected.size()));
}

template <typename Scalar>
Eigen::MatrixXd MFTrajModel<Scalar>::predict(const PreparedScene& scene) const {
  return forward(scene).trajectory.matrix().template cast<double>();
}

template <typename Scalar>
Tensor<Scalar> trajectory_loss(const Tensor<Scalar>& pred, const Tensor<Scalar>& target, Scalar beta) {
  if (pred.shape() != target.shape())
    throw ShapeError("loss: prediction " + ad::shape_string(pred.shape()) + " vs ground truth " +
                     ad::shape_string(target.shape()));
  return ad::mean(ad::smooth_l1(pred, target, beta));
}

template <typename Scalar>
Tensor<Scalar> vrnn_noise(const ModelConfig& config, const PreparedScene& scene, std::uint64_t epoch,
                          std::uint64_t scene_index) {
  std::mt19937_64 rng(mix_seed(mix_seed(mix_seed(config.seed, 0x6e6f697365 /* noise stream */), epoch), scene_index));
  std::normal_distribution<double> normal(0.0, 1.0);
  const Shape shape{scene.frames, scene.agents, config.vrnn_latent};
  ad::Vector<Scalar> v(ad::shape_size(shape));
  for (auto& x : v) x = static_cast<Scalar>(normal(rng));
  return Tensor<Scalar>::constant(shape, std::move(v));
}

Index parameter_count(const ModelConfig& config) {
  ParameterStore<double> store;
  std::mt19937_64 rng(0);
  Network<double>(config, ParameterBuilder<double>(store, rng));
  return store.parameter_count();
}

template struct Network<double>;
template struct Network<float>;
template class MFTrajModel<double>;
template class MFTrajModel<float>;
template Tensor<double> trajectory_loss(const Tensor<double>&, const Tensor<double>&, double);
template Tensor<float> trajectory_loss(const Tensor<float>&, const Tensor<float>&, float);
template Tensor<double> vrnn_noise(const ModelConfig&, const PreparedScene&, std::uint64_t, std::uint64_t);
template Tensor<float> vrnn_noise(const ModelConfig&, const PreparedScene&, std::uint64_t, std::uint64_t);

// ---------------------------------------------------------------------------
// Training

namespace {

std::vector<PreparedScene> prepare_all(std::span<const TrajectoryScene> scenes, const ModelConfig& config,
                                       const FeatureStats& stats, bool with_future, int workers) {
  std::vector<PreparedScene> out(scenes.size());
  detail::parallel_for(scenes.size(), workers,
                       [&](std::size_t, std::size_t i) { out[i] = prepare_scene(scenes[i], config, stats, with_future); });
  return out;
}

template <typename Scalar>
Tensor<Scalar> future_tensor(const PreparedScene& p) {
  return Tensor<Scalar>::from_matrix(p.future.cast<Scalar>());
}

template <typename Scalar>
Tensor<Scalar> scene_loss(const Network<Scalar>& net, const PreparedScene& p, const Tensor<Scalar>& noise) {
  const ForwardResult<Scalar> r = net.forward(p, noise);
  Tensor<Scalar> loss =
      trajectory_loss(r.trajectory, future_tensor<Scalar>(p), static_cast<Scalar>(net.config.smooth_l1_beta));
  if (net.config.beta_kl > 0.0 && !net.config.disable_behavior)
    loss = ad::add(loss, ad::scale(r.kl, static_cast<Scalar>(net.config.beta_kl)));
  return loss;
}

template <typename Scalar>
double mean_eval_loss(const std::vector<Network<Scalar>>& nets, const std::vector<PreparedScene>& scenes, int workers) {
  if (scenes.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> losses(scenes.size());
  detail::parallel_for(scenes.size(), workers, [&](std::size_t w, std::size_t i) {
    losses[i] = static_cast<double>(scene_loss(nets[w], scenes[i], Tensor<Scalar>()).item());
  });
  return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
}

template <typename Scalar>
TrainResult train_impl(std::span<const TrajectoryScene> train_set, std::span<const TrajectoryScene> val_set,
                       const ModelConfig& config, const TrainOptions& options) {
  config.validate();
  if (train_set.empty()) throw InputError("training set is empty");
  if (options.epochs < 0) throw ConfigError("epochs must be non-negative");
  const int workers = std::max(options.workers, 1);

  const FeatureStats stats = config.disable_behavior ? FeatureStats{} : fit_behavior_stats(train_set, config);
  const std::vector<PreparedScene> train_prepared = prepare_all(train_set, config, stats, true, workers);
  const std::vector<PreparedScene> val_prepared = prepare_all(val_set, config, stats, true, workers);

  MFTrajModel<Scalar> model(config);
  const auto& entries = model.parameters().entries();
  std::vector<ad::Vector<Scalar>> m, v;
  for (const auto& e : entries) {
    m.push_back(ad::Vector<Scalar>::Zero(e.second.size()));
    v.push_back(ad::Vector<Scalar>::Zero(e.second.size()));
  }

  const std::size_t batch = static_cast<std::size_t>(config.batch_size);
  const std::size_t max_workers = detail::worker_count(std::min(batch, train_prepared.size()), workers);
  std::vector<ParameterStore<Scalar>> stores;
  std::vector<Network<Scalar>> nets;
  for (std::size_t w = 0; w < max_workers; ++w) {
    stores.push_back(model.parameters().alias());
    nets.emplace_back(config, ParameterBuilder<Scalar>(stores.back()));
  }

  TrainResult result;
  result.parameter_count = model.parameter_count();
  std::vector<std::size_t> order(train_prepared.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::uint64_t step = 0;
  const Scalar b1 = Scalar(0.9), b2 = Scalar(0.999), eps = Scalar(1e-8);
  const int decay_epoch = static_cast<int>(std::floor(config.decay_fraction * options.epochs));

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    const double lr = epoch < decay_epoch ? config.learning_rate : config.final_learning_rate;
    std::mt19937_64 shuffle_rng(mix_seed(mix_seed(config.seed, 0x73687566 /* shuffle stream */), epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;

    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t count = std::min(batch, order.size() - start);
      std::vector<double> losses(count);
      detail::parallel_for(count, static_cast<int>(max_workers), [&](std::size_t w, std::size_t k) {
        const std::size_t index = order[start + k];
        const PreparedScene& p = train_prepared[index];
        ad::Tape<Scalar> tape;
        const Tensor<Scalar> noise =
            config.disable_behavior ? Tensor<Scalar>() : vrnn_noise<Scalar>(config, p, epoch, index);
        const Tensor<Scalar> loss = scene_loss(nets[w], p, noise);
        losses[k] = static_cast<double>(loss.item());
        if (std::isfinite(losses[k])) tape.backward(loss);
      });
      for (std::size_t k = 0; k < count; ++k) {
        if (!std::isfinite(losses[k]))
          throw TrainingError("non-finite loss at step " + std::to_string(step) + " (epoch " + std::to_string(epoch) +
                              ", scene " + train_prepared[order[start + k]].scene_id + ")");
        epoch_loss += losses[k];
      }

      ++step;
      const Scalar rate = static_cast<Scalar>(lr);
      const Scalar c1 = Scalar(1) - std::pow(b1, static_cast<Scalar>(step));
      const Scalar c2 = Scalar(1) - std::pow(b2, static_cast<Scalar>(step));
      const Scalar inv_count = Scalar(1) / static_cast<Scalar>(count);
      for (std::size_t p = 0; p < entries.size(); ++p) {
        ad::Vector<Scalar> g = stores[0].entries()[p].second.grad();
        for (std::size_t w = 1; w < stores.size(); ++w) g += stores[w].entries()[p].second.grad();
        g *= inv_count;
        m[p] = b1 * m[p] + (Scalar(1) - b1) * g;
        v[p] = b2 * v[p] + (Scalar(1) - b2) * g.cwiseProduct(g);
        entries[p].second.mutable_values().array() -=
            rate * (m[p].array() / c1) / ((v[p].array() / c2).sqrt() + eps);
      }
      for (auto& s : stores) s.zero_grad();
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = epoch_loss / static_cast<double>(order.size());
    record.val_loss = mean_eval_loss(nets, val_prepared, static_cast<int>(max_workers));
    record.learning_rate = lr;
    result.curve.push_back(record);
    if (options.on_epoch) options.on_epoch(record);
  }

  result.checkpoint = make_checkpoint(model, stats, &m, &v, step);
  return result;
}

template <typename Scalar>
std::vector<Network<Scalar>> bound_networks(const MFTrajModel<Scalar>& model, std::size_t count,
                                            std::vector<ParameterStore<Scalar>>& stores) {
  std::vector<Network<Scalar>> nets;
  stores.clear();
  stores.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    stores.push_back(model.parameters().alias());
    nets.emplace_back(model.config(), ParameterBuilder<Scalar>(stores.back()));
  }
  return nets;
}

template <typename Scalar>
double evaluate_loss_impl(const Checkpoint& checkpoint, std::span<const TrajectoryScene> scenes, int workers) {
  const MFTrajModel<Scalar> model = model_from_checkpoint<Scalar>(checkpoint);
  const auto prepared = prepare_all(scenes, checkpoint.config, checkpoint.stats, true, workers);
  std::vector<ParameterStore<Scalar>> stores;
  const auto nets = bound_networks(model, detail::worker_count(prepared.size(), workers), stores);
  return mean_eval_loss(nets, prepared, workers);
}

template <typename Scalar>
std::vector<Prediction> predict_impl(const Checkpoint& checkpoint, std::span<const TrajectoryScene> scenes,
                                     const std::optional<DropSpec>& drop, int workers) {
  const ModelConfig& config = checkpoint.config;
  const MFTrajModel<Scalar> model = model_from_checkpoint<Scalar>(checkpoint);
  std::vector<ParameterStore<Scalar>> stores;
  const auto nets = bound_networks(model, detail::worker_count(scenes.size(), workers), stores);
  std::vector<Prediction> out(scenes.size());
  detail::parallel_for(scenes.size(), workers, [&](std::size_t w, std::size_t i) {
    const TrajectoryScene* scene = &scenes[i];
    TrajectoryScene degraded;
    if (drop && drop->frames > 0) {
      checked_history(*scene, config);
      auto [dropped, mask] = drop_frames(*scene, drop->frames, mix_seed(drop->seed, stable_hash(scene->scene_id)),
                                         drop->include_agents);
      degraded = impute_linear(dropped, mask);
      scene = &degraded;
    }
    const PreparedScene p = prepare_scene(*scene, config, checkpoint.stats, false);
    out[i].scene_id = p.scene_id;
    out[i].path = nets[w].forward(p).trajectory.matrix().template cast<double>();
  });
  return out;
}

}  // namespace

TrainResult train(std::span<const TrajectoryScene> train_set, std::span<const TrajectoryScene> val_set,
                  const ModelConfig& config, const TrainOptions& options) {
  return config.precision == Precision::f32 ? train_impl<float>(train_set, val_set, config, options)
                                            : train_impl<double>(train_set, val_set, config, options);
}

double evaluate_loss(const Checkpoint& checkpoint, std::span<const TrajectoryScene> scenes, int workers) {
  return checkpoint.config.precision == Precision::f32 ? evaluate_loss_impl<float>(checkpoint, scenes, workers)
                                                       : evaluate_loss_impl<double>(checkpoint, scenes, workers);
}

std::vector<Prediction> predict(const Checkpoint& checkpoint, std::span<const TrajectoryScene> scenes,
                                const std::optional<DropSpec>& drop, int workers) {
  return checkpoint.config.precision == Precision::f32 ? predict_impl<float>(checkpoint, scenes, drop, workers)
                                                       : predict_impl<double>(checkpoint, scenes, drop, workers);
}

void write_loss_curve(std::ostream& out, std::span<const EpochRecord> curve) {
  out << "epoch,train_loss,val_loss,lr\n";
  for (const auto& r : curve)
    out << r.epoch << ',' << format_double(r.train_loss) << ','
        << (std::isnan(r.val_loss) ? std::string() : format_double(r.val_loss)) << ',' << format_double(r.learning_rate)
        << '\n';
}

void write_predictions(std::ostream& out, std::span<const Prediction> predictions) {
  out << "scene_id,step,x,y\n";
  for (const auto& p : predictions)
    for (Index t = 0; t < p.path.rows(); ++t)
      out << p.scene_id << ',' << t << ',' << format_double(p.path(t, 0)) << ',' << format_double(p.path(t, 1)) << '\n';
}

}  // namespace mftraj
