#pragma once

// Network building blocks on top of the autodiff engine.
//
// Parameters live in a ParameterStore under dotted names. Layers are built
// through a ParameterBuilder, which either creates and initializes the named
// tensors or binds to an existing store (another model, a checkpoint, or a
// worker's gradient-private alias). Sequences are laid out time-major as
// [T, N, features] with agents along N.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mftraj/ad/ops.hpp"

namespace mftraj {

using ad::Index;
using ad::Shape;
using ad::Tensor;

template <typename Scalar>
class ParameterStore {
 public:
  using Entry = std::pair<std::string, Tensor<Scalar>>;

  const Tensor<Scalar>& add(std::string name, Tensor<Scalar> tensor) {
    if (find(name) != nullptr) throw ConfigError("duplicate parameter '" + name + "'");
    entries_.emplace_back(std::move(name), std::move(tensor));
    return entries_.back().second;
  }

  const Tensor<Scalar>* find(std::string_view name) const {
    for (const auto& [n, t] : entries_)
      if (n == name) return &t;
    return nullptr;
  }

  const Tensor<Scalar>& at(std::string_view name) const {
    if (const auto* t = find(name)) return *t;
    throw ConfigError("missing parameter '" + std::string(name) + "'");
  }

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  Index parameter_count() const {
    Index n = 0;
    for (const auto& e : entries_) n += e.second.size();
    return n;
  }

  /// Same names and value buffers, separate gradients.
  ParameterStore alias() const {
    ParameterStore out;
    for (const auto& [n, t] : entries_) out.entries_.emplace_back(n, t.alias());
    return out;
  }

  void zero_grad() const {
    for (const auto& e : entries_) e.second.zero_grad();
  }

 private:
  std::vector<Entry> entries_;
};

enum class Init { fan_in_uniform, zeros, ones };

template <typename Scalar>
class ParameterBuilder {
 public:
  /// Creates parameters in `store`, drawing initial values from `rng`.
  ParameterBuilder(ParameterStore<Scalar>& store, std::mt19937_64& rng) : store_(&store), rng_(&rng) {}
  /// Binds to the parameters already present in `store`.
  explicit ParameterBuilder(const ParameterStore<Scalar>& store) : bound_(&store) {}

  ParameterBuilder child(std::string_view name) const {
    ParameterBuilder b = *this;
    b.prefix_ = qualified(name) + ".";
    return b;
  }

  /// `fan_in` sets the uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) range and
  /// defaults to the leading dimension.
  Tensor<Scalar> operator()(std::string_view name, Shape shape, Init init, Index fan_in = 0) const {
    const std::string full = qualified(name);
    if (bound_ != nullptr) {
      const Tensor<Scalar>& t = bound_->at(full);
      if (t.shape() != shape)
        throw ShapeError("parameter '" + full + "' has shape " + ad::shape_string(t.shape()) + ", expected " +
                         ad::shape_string(shape));
      return t;
    }
    const Index n = ad::shape_size(shape);
    ad::Vector<Scalar> v(n);
    switch (init) {
      case Init::zeros: v.setZero(); break;
      case Init::ones: v.setOnes(); break;
      case Init::fan_in_uniform: {
        const Index fan = fan_in > 0 ? fan_in : (shape.empty() ? 1 : shape.front());
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (Index i = 0; i < n; ++i) v[i] = static_cast<Scalar>(u(*rng_));
        break;
      }
    }
    return store_->add(full, Tensor<Scalar>::variable(std::move(shape), std::move(v)));
  }

 private:
  std::string qualified(std::string_view name) const { return prefix_ + std::string(name); }

  ParameterStore<Scalar>* store_ = nullptr;
  std::mt19937_64* rng_ = nullptr;
  const ParameterStore<Scalar>* bound_ = nullptr;
  std::string prefix_;
};

// ---------------------------------------------------------------------------

template <typename Scalar>
struct Linear {
  Tensor<Scalar> weight;  // [in, out]
  Tensor<Scalar> bias;    // [out], undefined when disabled

  Linear() = default;
  Linear(const ParameterBuilder<Scalar>& b, Index in, Index out, bool with_bias = true)
      : weight(b("weight", {in, out}, Init::fan_in_uniform)) {
    if (with_bias) bias = b("bias", {out}, Init::zeros);
  }

  Index in_dim() const { return weight.dim(0); }
  Index out_dim() const { return weight.dim(1); }

  Tensor<Scalar> operator()(const Tensor<Scalar>& x) const {
    Tensor<Scalar> y = ad::matmul(x, weight);
    return bias.defined() ? ad::add(y, bias) : y;
  }
};

/// Rows [t*N, (t+1)*N) of a time-major [T*N, F] matrix.
template <typename Scalar>
Tensor<Scalar> time_step(const Tensor<Scalar>& flat, Index t, Index agents) {
  return ad::slice(flat, 0, t * agents, agents);
}

/// [T, N, F] -> [T*N, F].
template <typename Scalar>
Tensor<Scalar> flatten_time(const Tensor<Scalar>& seq) {
  if (seq.rank() != 3) throw ShapeError("expected a [T, N, F] sequence, got " + ad::shape_string(seq.shape()));
  return ad::reshape(seq, {seq.dim(0) * seq.dim(1), seq.dim(2)});
}

// ---------------------------------------------------------------------------
// Recurrent encoders

/// One LSTM layer; gate blocks are ordered input, forget, cell, output.
template <typename Scalar>
struct LstmLayer {
  Tensor<Scalar> w_x;   // [in, 4H]
  Tensor<Scalar> w_h;   // [H, 4H]
  Tensor<Scalar> bias;  // [4H]
  Index hidden = 0;

  LstmLayer() = default;
  LstmLayer(const ParameterBuilder<Scalar>& b, Index in, Index h)
      : w_x(b("w_x", {in, 4 * h}, Init::fan_in_uniform, h)),
        w_h(b("w_h", {h, 4 * h}, Init::fan_in_uniform, h)),
        bias(b("bias", {4 * h}, Init::zeros)),
        hidden(h) {}

  /// `inputs` is [T*N, in]; returns the T hidden states, each [N, H].
  std::vector<Tensor<Scalar>> run(const Tensor<Scalar>& inputs, Index steps) const {
    const Index n = inputs.dim(0) / steps;
    const Tensor<Scalar> projected = ad::add(ad::matmul(inputs, w_x), bias);
    Tensor<Scalar> h = Tensor<Scalar>::zeros({n, hidden});
    Tensor<Scalar> c = Tensor<Scalar>::zeros({n, hidden});
    std::vector<Tensor<Scalar>> out;
    out.reserve(static_cast<std::size_t>(steps));
    for (Index t = 0; t < steps; ++t) {
      const Tensor<Scalar> gates = ad::add(time_step(projected, t, n), ad::matmul(h, w_h));
      const Tensor<Scalar> i = ad::sigmoid(ad::slice(gates, 1, 0, hidden));
      const Tensor<Scalar> f = ad::sigmoid(ad::slice(gates, 1, hidden, hidden));
      const Tensor<Scalar> g = ad::tanh(ad::slice(gates, 1, 2 * hidden, hidden));
      const Tensor<Scalar> o = ad::sigmoid(ad::slice(gates, 1, 3 * hidden, hidden));
      c = ad::add(ad::mul(f, c), ad::mul(i, g));
      h = ad::mul(o, ad::tanh(c));
      out.push_back(h);
    }
    return out;
  }
};

/// Stacked LSTM with zero initial states, shared across all agents.
template <typename Scalar>
struct Lstm {
  std::vector<LstmLayer<Scalar>> layers;

  Lstm() = default;
  Lstm(const ParameterBuilder<Scalar>& b, Index in, Index hidden, int depth = 2) {
    if (depth < 1) throw ConfigError("LSTM needs at least one layer");
    for (int l = 0; l < depth; ++l)
      layers.emplace_back(b.child("layer" + std::to_string(l)), l == 0 ? in : hidden, hidden);
  }

  /// [T, N, in] -> hidden states of the top layer, one [N, H] per step.
  std::vector<Tensor<Scalar>> encode(const Tensor<Scalar>& sequence) const {
    const Index steps = sequence.dim(0);
    if (steps < 1) throw ShapeError("LSTM input has no time steps");
    Tensor<Scalar> flat = flatten_time(sequence);
    std::vector<Tensor<Scalar>> states;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      states = layers[l].run(flat, steps);
      if (l + 1 < layers.size()) flat = ad::concat(states, 0);
    }
    return states;
  }
};

/// GRU cell with gate blocks reset, update, candidate:
///   n = tanh(x W_xn + b_xn + r * (h W_hn + b_hn)),  h' = (1 - z) * n + z * h.
template <typename Scalar>
struct GruCell {
  Tensor<Scalar> w_x;  // [in, 3H]
  Tensor<Scalar> w_h;  // [H, 3H]
  Tensor<Scalar> b_x;  // [3H]
  Tensor<Scalar> b_h;  // [3H]
  Index hidden = 0;

  GruCell() = default;
  GruCell(const ParameterBuilder<Scalar>& b, Index in, Index h)
      : w_x(b("w_x", {in, 3 * h}, Init::fan_in_uniform, h)),
        w_h(b("w_h", {h, 3 * h}, Init::fan_in_uniform, h)),
        b_x(b("b_x", {3 * h}, Init::zeros)),
        b_h(b("b_h", {3 * h}, Init::zeros)),
        hidden(h) {}

  Tensor<Scalar> project_input(const Tensor<Scalar>& x) const { return ad::add(ad::matmul(x, w_x), b_x); }

  /// `x_projected` is project_input(x_t), [N, 3H].
  Tensor<Scalar> step(const Tensor<Scalar>& x_projected, const Tensor<Scalar>& h) const {
    const Tensor<Scalar> hp = ad::add(ad::matmul(h, w_h), b_h);
    const auto part = [this](const Tensor<Scalar>& m, Index k) { return ad::slice(m, 1, k * hidden, hidden); };
    const Tensor<Scalar> r = ad::sigmoid(ad::add(part(x_projected, 0), part(hp, 0)));
    const Tensor<Scalar> z = ad::sigmoid(ad::add(part(x_projected, 1), part(hp, 1)));
    const Tensor<Scalar> n = ad::tanh(ad::add(part(x_projected, 2), ad::mul(r, part(hp, 2))));
    return ad::add(n, ad::mul(z, ad::sub(h, n)));
  }
};

template <typename Scalar>
struct Gru {
  GruCell<Scalar> cell;

  Gru() = default;
  Gru(const ParameterBuilder<Scalar>& b, Index in, Index hidden) : cell(b, in, hidden) {}

  /// [T, N, in] -> one [N, H] state per step, zero initial state.
  std::vector<Tensor<Scalar>> encode(const Tensor<Scalar>& sequence) const {
    const Index steps = sequence.dim(0), n = sequence.dim(1);
    if (steps < 1) throw ShapeError("GRU input has no time steps");
    const Tensor<Scalar> projected = cell.project_input(flatten_time(sequence));
    Tensor<Scalar> h = Tensor<Scalar>::zeros({n, cell.hidden});
    std::vector<Tensor<Scalar>> out;
    for (Index t = 0; t < steps; ++t) {
      h = cell.step(time_step(projected, t, n), h);
      out.push_back(h);
    }
    return out;
  }
};

/// Closed-form KL(N(mu_q, e^lv_q) || N(mu_p, e^lv_p)) summed over the last
/// axis; [N, L] inputs give [N].
template <typename Scalar>
Tensor<Scalar> gaussian_kl(const Tensor<Scalar>& mu_q, const Tensor<Scalar>& logvar_q, const Tensor<Scalar>& mu_p,
                           const Tensor<Scalar>& logvar_p) {
  const Tensor<Scalar> diff = ad::sub(mu_q, mu_p);
  const Tensor<Scalar> ratio =
      ad::mul(ad::add(ad::exp(logvar_q), ad::mul(diff, diff)), ad::exp(ad::scale(logvar_p, Scalar(-1))));
  const Tensor<Scalar> terms = ad::add(ad::add(ad::sub(logvar_p, logvar_q), ratio), Tensor<Scalar>::scalar(Scalar(-1)));
  return ad::scale(ad::sum(terms, terms.rank() - 1), Scalar(0.5));
}

template <typename Scalar>
struct VrnnOutput {
  Tensor<Scalar> features;  // [N, H]
  Tensor<Scalar> hidden;    // [N, H]
  Tensor<Scalar> kl;        // [N]
};

/// Variational recurrent cell. Feature extractors phi_x and phi_z, a prior
/// network on h, a posterior network on [phi_x, h], a feature decoder on
/// [phi_z, h] and a GRU recurrence on [phi_x, phi_z].
template <typename Scalar>
struct VrnnCell {
  Linear<Scalar> phi_x, prior_hidden, prior_out, post_hidden, post_out, phi_z, decoder;
  GruCell<Scalar> recurrence;
  Index hidden = 0;
  Index latent = 0;

  VrnnCell() = default;
  VrnnCell(const ParameterBuilder<Scalar>& b, Index in, Index h, Index l)
      : phi_x(b.child("phi_x"), in, h),
        prior_hidden(b.child("prior_hidden"), h, h),
        prior_out(b.child("prior_out"), h, 2 * l),
        post_hidden(b.child("post_hidden"), 2 * h, h),
        post_out(b.child("post_out"), h, 2 * l),
        phi_z(b.child("phi_z"), l, h),
        decoder(b.child("decoder"), 2 * h, h),
        recurrence(b.child("rnn"), 2 * h, h),
        hidden(h),
        latent(l) {}

  /// `features_x` is relu(phi_x(x_t)); `noise` [N, L] may be undefined,
  /// which samples the posterior mean.
  VrnnOutput<Scalar> step_features(const Tensor<Scalar>& features_x, const Tensor<Scalar>& h,
                                   const Tensor<Scalar>& noise) const {
    const Tensor<Scalar> prior = prior_out(ad::relu(prior_hidden(h)));
    const Tensor<Scalar> post = post_out(ad::relu(post_hidden(ad::concat<Scalar>({features_x, h}, 1))));
    const Tensor<Scalar> mu_p = ad::slice(prior, 1, 0, latent), lv_p = ad::slice(prior, 1, latent, latent);
    const Tensor<Scalar> mu_q = ad::slice(post, 1, 0, latent), lv_q = ad::slice(post, 1, latent, latent);
    const Tensor<Scalar> z = noise.defined() ? ad::gaussian_sample(mu_q, lv_q, noise) : mu_q;
    const Tensor<Scalar> fz = ad::relu(phi_z(z));
    VrnnOutput<Scalar> out;
    out.features = ad::relu(decoder(ad::concat<Scalar>({fz, h}, 1)));
    out.hidden = recurrence.step(recurrence.project_input(ad::concat<Scalar>({features_x, fz}, 1)), h);
    out.kl = gaussian_kl(mu_q, lv_q, mu_p, lv_p);
    return out;
  }

  VrnnOutput<Scalar> step(const Tensor<Scalar>& x, const Tensor<Scalar>& h, const Tensor<Scalar>& noise) const {
    return step_features(ad::relu(phi_x(x)), h, noise);
  }

  /// Runs over a [T, N, in] sequence from a zero state. `noise` is [T, N, L]
  /// or undefined. Returns the per-step features and the summed KL.
  std::pair<std::vector<Tensor<Scalar>>, Tensor<Scalar>> run(const Tensor<Scalar>& sequence,
                                                             const Tensor<Scalar>& noise) const {
    const Index steps = sequence.dim(0), n = sequence.dim(1);
    if (noise.defined() && noise.shape() != Shape{steps, n, latent})
      throw ShapeError("VRNN noise has shape " + ad::shape_string(noise.shape()) + ", expected " +
                       ad::shape_string({steps, n, latent}));
    const Tensor<Scalar> fx = ad::relu(phi_x(flatten_time(sequence)));
    const Tensor<Scalar> flat_noise = noise.defined() ? flatten_time(noise) : Tensor<Scalar>();
    Tensor<Scalar> h = Tensor<Scalar>::zeros({n, hidden});
    std::vector<Tensor<Scalar>> features;
    Tensor<Scalar> kl = Tensor<Scalar>::scalar(Scalar(0));
    for (Index t = 0; t < steps; ++t) {
      const Tensor<Scalar> eps = noise.defined() ? time_step(flat_noise, t, n) : Tensor<Scalar>();
      VrnnOutput<Scalar> o = step_features(time_step(fx, t, n), h, eps);
      features.push_back(o.features);
      kl = ad::add(kl, ad::sum(o.kl));
      h = o.hidden;
    }
    return {std::move(features), kl};
  }
};

// ---------------------------------------------------------------------------
// Interaction

/// Constant operators describing the directed pairs (i, j), i != j, along
/// which messages flow: S_i, S_j pick the endpoint rows of z, `aggregate`
/// sums pair messages into their receiving node i.
template <typename Scalar>
struct PairGraph {
  Index nodes = 0;
  Index pairs = 0;
  Tensor<Scalar> select_i;   // [P, N]
  Tensor<Scalar> select_j;   // [P, N]
  Tensor<Scalar> aggregate;  // [N, P]
  Tensor<Scalar> edge;       // [P, d_p]
};

/// `offsets` holds p_ij for every ordered pair, row i*N + j of an [N*N, d_p]
/// matrix; `mask(i, j)` enables the pair (the diagonal is ignored).
template <typename Scalar>
PairGraph<Scalar> make_pair_graph(const Eigen::Ref<const Eigen::MatrixXd>& offsets,
                                  const Eigen::Ref<const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>>& mask) {
  const Index n = mask.rows();
  if (mask.cols() != n || offsets.rows() != n * n)
    throw ShapeError("pair graph: mask " + std::to_string(mask.rows()) + "x" + std::to_string(mask.cols()) +
                     " does not match " + std::to_string(offsets.rows()) + " pair offsets");
  std::vector<std::pair<Index, Index>> list;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (i != j && mask(i, j)) list.emplace_back(i, j);
  const Index p = static_cast<Index>(list.size());
  ad::RowMatrix<Scalar> si = ad::RowMatrix<Scalar>::Zero(p, n), sj = si, agg = ad::RowMatrix<Scalar>::Zero(n, p);
  ad::RowMatrix<Scalar> edge(p, offsets.cols());
  for (Index k = 0; k < p; ++k) {
    const auto [i, j] = list[static_cast<std::size_t>(k)];
    si(k, i) = 1;
    sj(k, j) = 1;
    agg(i, k) = 1;
    edge.row(k) = offsets.row(i * n + j).template cast<Scalar>();
  }
  PairGraph<Scalar> g;
  g.nodes = n;
  g.pairs = p;
  g.select_i = Tensor<Scalar>::from_matrix(si);
  g.select_j = Tensor<Scalar>::from_matrix(sj);
  g.aggregate = Tensor<Scalar>::from_matrix(agg);
  g.edge = Tensor<Scalar>::from_matrix(edge);
  return g;
}

/// Residual gated graph convolution:
///   z_i' = z_i + sum_j sigmoid(r_ij W_g + b_g) * softplus(r_ij W_h + b_h),
///   r_ij = [z_i, z_j, p_ij].
template <typename Scalar>
struct AdaptiveGcnLayer {
  Tensor<Scalar> w_g, b_g, w_h, b_h;

  AdaptiveGcnLayer() = default;
  AdaptiveGcnLayer(const ParameterBuilder<Scalar>& b, Index width, Index edge_dim) {
    const Index in = 2 * width + edge_dim;
    w_g = b("w_g", {in, width}, Init::fan_in_uniform);
    b_g = b("b_g", {width}, Init::zeros);
    w_h = b("w_h", {in, width}, Init::fan_in_uniform);
    b_h = b("b_h", {width}, Init::zeros);
  }

  Tensor<Scalar> operator()(const Tensor<Scalar>& z, const PairGraph<Scalar>& graph) const {
    if (z.rank() != 2 || z.dim(0) != graph.nodes)
      throw ShapeError("adaptive GCN: features " + ad::shape_string(z.shape()) + " for a graph of " +
                       std::to_string(graph.nodes) + " nodes");
    if (graph.pairs == 0) return z;
    const Tensor<Scalar> r =
        ad::concat<Scalar>({ad::matmul(graph.select_i, z), ad::matmul(graph.select_j, z), graph.edge}, 1);
    const Tensor<Scalar> gate = ad::sigmoid(ad::add(ad::matmul(r, w_g), b_g));
    const Tensor<Scalar> message = ad::softplus(ad::add(ad::matmul(r, w_h), b_h));
    return ad::add(z, ad::matmul(graph.aggregate, ad::mul(gate, message)));
  }
};

/// Ungated residual graph convolution over a fixed 0/1 adjacency:
///   z' = z + relu(A z W + b).
template <typename Scalar>
struct PlainGcnLayer {
  Linear<Scalar> linear;

  PlainGcnLayer() = default;
  PlainGcnLayer(const ParameterBuilder<Scalar>& b, Index width) : linear(b, width, width) {}

  Tensor<Scalar> operator()(const Tensor<Scalar>& z, const Tensor<Scalar>& adjacency) const {
    if (adjacency.rank() != 2 || adjacency.dim(0) != z.dim(0) || adjacency.dim(1) != z.dim(0))
      throw ShapeError("plain GCN: adjacency " + ad::shape_string(adjacency.shape()) + " for features " +
                       ad::shape_string(z.shape()));
    return ad::add(z, ad::relu(linear(ad::matmul(adjacency, z))));
  }
};

/// Multi-head attention whose keys and values are compressed along the
/// agent axis by learned [proj_dim, N_max] maps E and F (leading N columns).
template <typename Scalar>
struct LinearAttention {
  Tensor<Scalar> w_q, w_k, w_v, e, f;
  Linear<Scalar> out;
  Index heads = 1;
  Index proj_dim = 1;
  Index max_agents = 1;

  LinearAttention() = default;
  LinearAttention(const ParameterBuilder<Scalar>& b, Index width, Index num_heads, Index proj, Index n_max)
      : heads(num_heads), proj_dim(proj), max_agents(n_max) {
    if (proj < 1) throw ConfigError("attention projection dimension must be at least 1");
    if (num_heads < 1 || width % num_heads != 0)
      throw ConfigError("attention width " + std::to_string(width) + " is not divisible by " +
                        std::to_string(num_heads) + " heads");
    if (n_max < 1) throw ConfigError("attention agent cap must be at least 1");
    w_q = b("w_q", {width, width}, Init::fan_in_uniform);
    w_k = b("w_k", {width, width}, Init::fan_in_uniform);
    w_v = b("w_v", {width, width}, Init::fan_in_uniform);
    e = b("e", {proj, n_max}, Init::fan_in_uniform, n_max);
    f = b("f", {proj, n_max}, Init::fan_in_uniform, n_max);
    out = Linear<Scalar>(b.child("out"), width, width);
  }

  Tensor<Scalar> operator()(const Tensor<Scalar>& x) const {
    const Index n = x.dim(0), width = w_q.dim(0), d_head = width / heads;
    if (x.rank() != 2 || x.dim(1) != width)
      throw ShapeError("linear attention: input " + ad::shape_string(x.shape()) + ", width " + std::to_string(width));
    if (n > max_agents)
      throw ConfigError("scene has " + std::to_string(n) + " agents, attention cap is " + std::to_string(max_agents));
    const Tensor<Scalar> q = ad::matmul(x, w_q);
    const Tensor<Scalar> k = ad::matmul(ad::slice(e, 1, 0, n), ad::matmul(x, w_k));  // [proj, width]
    const Tensor<Scalar> v = ad::matmul(ad::slice(f, 1, 0, n), ad::matmul(x, w_v));
    const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(d_head));
    std::vector<Tensor<Scalar>> parts;
    for (Index h = 0; h < heads; ++h) {
      const Tensor<Scalar> qh = ad::slice(q, 1, h * d_head, d_head);
      const Tensor<Scalar> kh = ad::slice(k, 1, h * d_head, d_head);
      const Tensor<Scalar> vh = ad::slice(v, 1, h * d_head, d_head);
      const Tensor<Scalar> weights = ad::softmax(ad::scale(ad::matmul(qh, ad::transpose(kh)), scale), 1);
      parts.push_back(ad::matmul(weights, vh));
    }
    return out(heads == 1 ? parts.front() : ad::concat(parts, 1));
  }
};

// ---------------------------------------------------------------------------
// Decoder

/// relu(group_norm(linear(x))).
template <typename Scalar>
struct ResidualBlock {
  Linear<Scalar> linear;
  Tensor<Scalar> gamma, beta;
  Index groups = 1;

  ResidualBlock() = default;
  ResidualBlock(const ParameterBuilder<Scalar>& b, Index in, Index out, Index num_groups) : groups(num_groups) {
    if (num_groups < 1 || out % num_groups != 0)
      throw ConfigError("residual block width " + std::to_string(out) + " is not divisible by " +
                        std::to_string(num_groups) + " groups");
    linear = Linear<Scalar>(b.child("linear"), in, out);
    gamma = b("gamma", {out}, Init::ones);
    beta = b("beta", {out}, Init::zeros);
  }

  Tensor<Scalar> operator()(const Tensor<Scalar>& x) const {
    return ad::relu(ad::group_norm(linear(x), groups, Scalar(1e-5), gamma, beta));
  }
};

/// Two residual blocks and a projection to t_f (x, y) steps.
template <typename Scalar>
struct TrajectoryDecoder {
  ResidualBlock<Scalar> first, second;
  Linear<Scalar> head;
  Index horizon = 0;

  TrajectoryDecoder() = default;
  TrajectoryDecoder(const ParameterBuilder<Scalar>& b, Index in, Index hidden, Index groups, Index t_f)
      : first(b.child("block0"), in, hidden, groups),
        second(b.child("block1"), hidden, hidden, groups),
        head(b.child("head"), hidden, 2 * t_f),
        horizon(t_f) {}

  /// [1, in] -> raw [t_f, 2] outputs.
  Tensor<Scalar> raw(const Tensor<Scalar>& context) const {
    return ad::reshape(head(second(first(context))), {horizon, 2});
  }

  /// Relative decoding accumulates the outputs as per-step displacements from
  /// `anchor` ([2]); absolute decoding returns them as coordinates.
  Tensor<Scalar> decode(const Tensor<Scalar>& context, const Tensor<Scalar>& anchor, bool relative) const {
    const Tensor<Scalar> steps = raw(context);
    if (!relative) return steps;
    return ad::add(ad::matmul(cumulative_sum_operator(), steps), anchor);
  }

  Tensor<Scalar> cumulative_sum_operator() const {
    ad::RowMatrix<Scalar> lower = ad::RowMatrix<Scalar>::Zero(horizon, horizon);
    lower.template triangularView<Eigen::Lower>().setOnes();
    return Tensor<Scalar>::from_matrix(lower);
  }
};

}  // namespace mftraj
