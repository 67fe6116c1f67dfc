#pragma once

// Seeded finite-difference suites shared by the unit tests and the
// acceptance runner. Each suite reports every check through a sink so the
// caller chooses between doctest assertions and aggregate statistics.

#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "mftraj/ad/gradcheck.hpp"
#include "mftraj/ad/ops.hpp"
#include "mftraj/layers.hpp"
#include "mftraj/model.hpp"
#include "model_fixtures.hpp"
#include "test_util.hpp"

namespace mftraj::testing {

using GradSink = std::function<void(const std::string& label, const ad::GradCheckReport&)>;
using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Contracts a tensor to a scalar with fixed random weights so that every
/// output component contributes a distinct coefficient.
inline T weighted_sum(const T& y, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  return ad::sum(ad::mul(y, random_tensor(rng, y.shape(), false)));
}

inline std::vector<ad::GradInput> with_parameters(const ParameterStore<double>& store,
                                                  std::vector<ad::GradInput> extra) {
  for (const auto& [name, t] : store.entries()) extra.push_back({name, t});
  return extra;
}

/// Pairwise offsets of n random points, row i * n + j holding p_i - p_j.
inline Eigen::MatrixXd random_offsets(std::mt19937_64& rng, Index n) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Eigen::MatrixXd pos(n, 2);
  for (Index i = 0; i < n; ++i) pos.row(i) << u(rng), u(rng);
  Eigen::MatrixXd off(n * n, 2);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) off.row(i * n + j) = pos.row(i) - pos.row(j);
  return off;
}

inline void primitive_gradients(std::uint64_t seed, const GradSink& sink) {
  using namespace ad;
  std::mt19937_64 rng(seed);
  const auto check = [&](const char* label, const std::function<T()>& f, std::vector<GradInput> inputs) {
    sink(label, gradient_check(f, inputs));
  };
  const T a = random_tensor(rng, {3, 4});
  const T b = random_tensor(rng, {3, 4});
  const T row = random_tensor(rng, {4});
  const T m = random_tensor(rng, {4, 2});
  const T pos = random_tensor(rng, {3, 4}, true, 0.5, 2.0);

  check("add", [&] { return weighted_sum(add(a, row), seed); }, {{"a", a}, {"row", row}});
  check("sub", [&] { return weighted_sum(sub(row, a), seed); }, {{"a", a}, {"row", row}});
  check("mul", [&] { return weighted_sum(mul(a, b), seed); }, {{"a", a}, {"b", b}});
  check("matmul", [&] { return weighted_sum(matmul(a, m), seed); }, {{"a", a}, {"m", m}});
  check("transpose", [&] { return weighted_sum(transpose(a), seed); }, {{"a", a}});
  check("reshape", [&] { return weighted_sum(reshape(a, {2, 6}), seed); }, {{"a", a}});
  check("concat1", [&] { return weighted_sum(concat<double>({a, b}, 1), seed); }, {{"a", a}, {"b", b}});
  check("concat0", [&] { return weighted_sum(concat<double>({a, b}, 0), seed); }, {{"a", a}, {"b", b}});
  check("slice", [&] { return weighted_sum(slice(a, 1, 1, 2), seed); }, {{"a", a}});
  check("sum", [&] { return weighted_sum(sum(a, 0), seed); }, {{"a", a}});
  check("mean", [&] { return weighted_sum(mean(a, 1), seed); }, {{"a", a}});
  check("mean_all", [&] { return mean(mul(a, a)); }, {{"a", a}});
  check("sigmoid", [&] { return weighted_sum(sigmoid(a), seed); }, {{"a", a}});
  check("softplus", [&] { return weighted_sum(softplus(scale(a, 3.0)), seed); }, {{"a", a}});
  check("tanh", [&] { return weighted_sum(tanh(a), seed); }, {{"a", a}});
  check("exp", [&] { return weighted_sum(exp(a), seed); }, {{"a", a}});
  check("log", [&] { return weighted_sum(log(pos), seed); }, {{"pos", pos}});
  check("softmax1", [&] { return weighted_sum(softmax(scale(a, 2.0), 1), seed); }, {{"a", a}});
  check("softmax0", [&] { return weighted_sum(softmax(a, 0), seed); }, {{"a", a}});

  // relu is checked away from its kink.
  const T shifted = add(mul(pos, T::scalar(rng() % 2 ? 1.0 : -1.0)), T::zeros({3, 4}));
  const T away = T::variable({3, 4}, shifted.values());
  check("relu", [&] { return weighted_sum(relu(away), seed); }, {{"away", away}});

  const T gamma = random_tensor(rng, {4}, true, 0.5, 1.5);
  const T beta = random_tensor(rng, {4});
  check("group_norm", [&] { return weighted_sum(group_norm(a, 2, 1e-5, gamma, beta), seed); },
        {{"a", a}, {"gamma", gamma}, {"beta", beta}});

  // smooth_l1 away from |d| = beta: differences in [-3,-1.2] u [-0.8,0.8] u [1.2,3].
  Vector<double> d(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& x : d) {
    const double r = u(rng);
    x = r < 0.33 ? -1.2 - 1.8 * u(rng) : r < 0.66 ? -0.8 + 1.6 * u(rng) : 1.2 + 1.8 * u(rng);
  }
  const T target = random_tensor(rng, {3, 4});
  const T pred = T::variable({3, 4}, target.values() + d);
  check("smooth_l1", [&] { return mean(smooth_l1(pred, target)); }, {{"pred", pred}, {"target", target}});

  const T mu = random_tensor(rng, {2, 3});
  const T logvar = random_tensor(rng, {2, 3});
  const T noise = random_tensor(rng, {2, 3}, false);
  check("gaussian_sample", [&] { return weighted_sum(gaussian_sample(mu, logvar, noise), seed); },
        {{"mu", mu}, {"logvar", logvar}});
}

inline void layer_gradients(std::uint64_t seed, const GradSink& sink) {
  std::mt19937_64 rng(seed);
  const auto last = [](const std::vector<T>& states) { return states.back(); };
  {
    ParameterStore<double> s;
    Lstm<double> lstm(ParameterBuilder<double>(s, rng), 2, 3, 2);
    const T x = random_tensor(rng, {3, 2, 2});
    sink("lstm", ad::gradient_check([&] { return weighted_sum(last(lstm.encode(x)), seed); },
                                    with_parameters(s, {{"x", x}})));
  }
  {
    ParameterStore<double> s;
    Gru<double> gru(ParameterBuilder<double>(s, rng), 2, 3);
    const T x = random_tensor(rng, {3, 2, 2});
    sink("gru", ad::gradient_check([&] { return weighted_sum(last(gru.encode(x)), seed); },
                                   with_parameters(s, {{"x", x}})));
  }
  {
    ParameterStore<double> s;
    VrnnCell<double> cell(ParameterBuilder<double>(s, rng), 3, 4, 2);
    const T x = random_tensor(rng, {2, 3});
    const T h = random_tensor(rng, {2, 4});
    const T noise = random_tensor(rng, {2, 2}, false);
    sink("vrnn_step", ad::gradient_check(
                          [&] {
                            const auto o = cell.step(x, h, noise);
                            return ad::add(ad::add(weighted_sum(o.features, seed), weighted_sum(o.hidden, seed + 1)),
                                           ad::sum(o.kl));
                          },
                          with_parameters(s, {{"x", x}, {"h", h}})));
  }
  {
    ParameterStore<double> s;
    AdaptiveGcnLayer<double> layer(ParameterBuilder<double>(s, rng), 3, 2);
    const T z = random_tensor(rng, {3, 3});
    const auto g = make_pair_graph<double>(random_offsets(rng, 3), BoolMatrix::Constant(3, 3, true));
    sink("adaptive_gcn", ad::gradient_check([&] { return weighted_sum(layer(layer(z, g), g), seed); },
                                            with_parameters(s, {{"z", z}})));
  }
  {
    ParameterStore<double> s;
    PlainGcnLayer<double> layer(ParameterBuilder<double>(s, rng), 3);
    // Shift the bias well away from the relu kink.
    s.at("bias").mutable_values() = ad::Vector<double>::Constant(3, 2.0);
    const T z = random_tensor(rng, {3, 3}, true, 0.0, 0.3);
    const T adj = T::from_matrix(Eigen::MatrixXd::Ones(3, 3) - Eigen::MatrixXd::Identity(3, 3));
    sink("plain_gcn", ad::gradient_check([&] { return weighted_sum(layer(z, adj), seed); },
                                         with_parameters(s, {{"z", z}})));
  }
  {
    ParameterStore<double> s;
    LinearAttention<double> attn(ParameterBuilder<double>(s, rng), 8, 4, 2, 5);
    const T x = random_tensor(rng, {3, 8});
    sink("linear_attention",
         ad::gradient_check([&] { return weighted_sum(attn(x), seed); }, with_parameters(s, {{"x", x}})));
  }
  {
    ParameterStore<double> s;
    ParameterBuilder<double> b(s, rng);
    ResidualBlock<double> b1(b.child("b1"), 4, 8, 2), b2(b.child("b2"), 8, 8, 2);
    for (const char* name : {"b1.linear.bias", "b2.linear.bias"})
      s.at(name).mutable_values() = ad::Vector<double>::Zero(8);
    const T x = random_tensor(rng, {1, 4});
    sink("residual_block",
         ad::gradient_check([&] { return weighted_sum(b2(b1(x)), seed); }, with_parameters(s, {{"x", x}})));
  }
}

/// The full network has hundreds of relu pre-activations; with a 1e-5 step
/// some seeds straddle a kink, so the end-to-end check uses a smaller step.
inline constexpr double kForwardStep = 1e-6;

/// Full model forward plus loss at small widths, every parameter checked.
/// The scene, the initialization and the VRNN noise all derive from `seed`.
inline void forward_gradients(std::uint64_t seed, const GradSink& sink) {
  ModelConfig config = small_config();
  config.beta_kl = 0.1;
  config.seed = seed;
  const auto scenes = small_scenes(config, 1, 1000 + seed);
  const FeatureStats stats = fit_behavior_stats(scenes, config);
  const MFTrajModel<double> model(config);
  // Biases start at zero and the VRNN prior sees a zero hidden state at the
  // first step, which would put a relu exactly on its kink.
  std::mt19937_64 rng(seed + 7);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (const auto& [name, t] : model.parameters().entries())
    if (name.ends_with(".bias"))
      for (auto& v : t.mutable_values()) v = u(rng);
  const PreparedScene p = prepare_scene(scenes[0], config, stats, true);
  const T noise = vrnn_noise<double>(config, p, 0, seed);
  const T target = T::from_matrix(p.future);
  std::vector<ad::GradInput> inputs;
  for (const auto& [name, t] : model.parameters().entries()) inputs.push_back({name, t});
  sink("full_forward", ad::gradient_check(
                           [&] {
                             const auto out = model.forward(p, noise);
                             return ad::add(trajectory_loss(out.trajectory, target), ad::scale(out.kl, config.beta_kl));
                           },
                           inputs, kForwardStep));
}

}  // namespace mftraj::testing
