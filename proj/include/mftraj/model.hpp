#pragma once

// End-to-end network: behavior encoder (VRNN + GRU over centrality
// criteria), position encoder (LSTM over displacements and offsets to the
// target), gated GCN interaction layers, low-rank attention and the residual
// trajectory decoder. Training, prediction and checkpoint persistence.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mftraj/behavior.hpp"
#include "mftraj/config.hpp"
#include "mftraj/layers.hpp"
#include "mftraj/scene.hpp"

namespace mftraj {

enum class Precision { f64, f32 };

struct ModelConfig {
  // Horizons: t_h + 1 history frames, t_f predicted frames.
  int t_h = 19;
  int t_f = 30;
  double sample_rate_hz = 10.0;

  // Graph and centralities.
  double radius_m = kDefaultRadius;
  int k_max = 6;
  double alpha_frac = 0.9;
  double katz_beta = 0.5;
  bool instantaneous_degree = false;

  // Dimensions.
  int behavior_hidden = 64;
  int vrnn_hidden = 64;
  int vrnn_latent = 32;
  int position_hidden = 64;
  int lstm_layers = 2;
  int gcn_layers = 3;
  int attention_heads = 4;
  int proj_dim = 32;
  int max_agents = 64;
  int groups = 8;
  int decoder_hidden = 1152;

  // Optimization.
  double learning_rate = 1e-3;
  double final_learning_rate = 1e-4;
  double decay_fraction = 0.75;
  int batch_size = 32;
  double beta_kl = 0.0;
  double smooth_l1_beta = 1.0;
  std::uint64_t seed = 0;
  Precision precision = Precision::f64;

  // Ablations.
  bool disable_behavior = false;
  bool absolute_coords = false;
  bool disable_interaction = false;
  bool disable_linformer = false;
  bool plain_gcn = false;

  /// Width of the per-agent feature entering the interaction module.
  int feature_width() const { return (disable_behavior ? 0 : behavior_hidden) + position_hidden; }
  CentralityParams centrality() const { return {k_max, alpha_frac, katz_beta, instantaneous_degree}; }

  /// Throws ConfigError on non-positive sizes or incompatible settings.
  void validate() const;

  KeyValueConfig to_key_values() const;
  /// Applies every recognised key; unknown keys are a ConfigError unless
  /// `ignore_unknown` is set.
  void apply(const KeyValueConfig& kv, bool ignore_unknown = false);
  static ModelConfig from_key_values(const KeyValueConfig& kv, bool ignore_unknown = false);

  bool operator==(const ModelConfig&) const = default;
};

/// The six ablation models. F is the full model.
enum class AblationModel { A, B, C, D, E, F };
ModelConfig ablation_config(const ModelConfig& base, AblationModel model);
char to_char(AblationModel model);

/// Network inputs extracted from a scene once and reused across epochs.
struct PreparedScene {
  using RowMatrix = ad::RowMatrix<double>;

  std::string scene_id;
  Index agents = 0;
  Index frames = 0;
  RowMatrix behavior;  // [frames * agents, 18], time-major, standardized
  RowMatrix position;  // [frames * agents, 4]
  Eigen::MatrixXd offsets;  // [agents * agents, 2]: p_i - p_j at the last observed positions
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> mask;
  RowMatrix adjacency;      // 0/1 proximity at the last observed positions
  Eigen::Vector2d anchor = Eigen::Vector2d::Zero();  // last target position
  RowMatrix future;         // [t_f, 2] absolute, empty without ground truth
};

/// s_i^t = p_i^t - p_i^{t-1} (zero on the first frame and wherever a frame
/// is unobserved) and p_i0^t = p_i^t - p_0^t, as [frames * agents, 2] each.
struct PositionFeatures {
  ad::RowMatrix<double> displacement;
  ad::RowMatrix<double> offset_to_target;
};
PositionFeatures position_features(const TrajectoryScene& scene);

/// Imputes interior gaps, checks horizons against the config and builds the
/// network inputs. `with_future` requires t_f ground-truth frames.
PreparedScene prepare_scene(const TrajectoryScene& scene, const ModelConfig& config, const FeatureStats& stats,
                            bool with_future);

/// Standardization statistics of the behavior features of `scenes`.
FeatureStats fit_behavior_stats(std::span<const TrajectoryScene> scenes, const ModelConfig& config);

template <typename Scalar>
struct ForwardResult {
  Tensor<Scalar> trajectory;  // [t_f, 2]
  Tensor<Scalar> kl;          // scalar, mean over agents and steps
};

/// Layer graph bound to one ParameterStore.
template <typename Scalar>
struct Network {
  ModelConfig config;
  VrnnCell<Scalar> vrnn;
  Gru<Scalar> behavior_gru;
  Lstm<Scalar> position_lstm;
  std::vector<AdaptiveGcnLayer<Scalar>> gcn;
  std::vector<PlainGcnLayer<Scalar>> plain_gcn;
  LinearAttention<Scalar> attention;
  TrajectoryDecoder<Scalar> decoder;

  Network(const ModelConfig& config, const ParameterBuilder<Scalar>& builder);

  /// `noise` [frames, agents, latent] drives the VRNN posterior samples; an
  /// undefined tensor selects the deterministic eval path.
  ForwardResult<Scalar> forward(const PreparedScene& scene, const Tensor<Scalar>& noise = {}) const;
};

/// Parameters plus the bound network.
template <typename Scalar>
class MFTrajModel {
 public:
  explicit MFTrajModel(const ModelConfig& config);
  MFTrajModel(const ModelConfig& config, ParameterStore<Scalar> parameters);

  const ModelConfig& config() const { return network_.config; }
  const ParameterStore<Scalar>& parameters() const { return parameters_; }
  const Network<Scalar>& network() const { return network_; }
  Index parameter_count() const { return parameters_.parameter_count(); }

  ForwardResult<Scalar> forward(const PreparedScene& scene, const Tensor<Scalar>& noise = {}) const {
    return network_.forward(scene, noise);
  }
  /// Eval-mode prediction as a plain [t_f, 2] matrix.
  Eigen::MatrixXd predict(const PreparedScene& scene) const;

 private:
  ParameterStore<Scalar> parameters_;
  Network<Scalar> network_;
};

/// Mean smooth-L1 over all 2 t_f components.
template <typename Scalar>
Tensor<Scalar> trajectory_loss(const Tensor<Scalar>& pred, const Tensor<Scalar>& target, Scalar beta = Scalar(1));

/// Standard-normal VRNN noise for one scene, seeded by (seed, epoch, scene).
template <typename Scalar>
Tensor<Scalar> vrnn_noise(const ModelConfig& config, const PreparedScene& scene, std::uint64_t epoch,
                          std::uint64_t scene_index);

/// Trainable parameter count of the default (or given) configuration.
Index parameter_count(const ModelConfig& config);

// ---------------------------------------------------------------------------
// Checkpoints

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

struct NamedArray {
  std::string name;
  DType dtype = DType::f64;
  Shape shape;
  std::vector<double> values;  // exact for both dtypes

  bool operator==(const NamedArray&) const = default;
};

/// Config snapshot, parameters ("param/<name>"), Adam moments
/// ("adam_m/<name>", "adam_v/<name>"), behavior statistics and step count.
/// Binary layout, little-endian:
///   "MFTRAJCK" | u32 version | u32 n + config text | u64 step | u32 count |
///   count x (u32 n + name | u8 dtype | u32 rank | rank x u64 dim | payload)
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  ModelConfig config;
  FeatureStats stats;
  std::uint64_t step = 0;
  std::vector<NamedArray> arrays;

  const NamedArray* find(std::string_view name) const;

  std::string serialize() const;
  static Checkpoint deserialize(std::string_view bytes);
  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

  bool operator==(const Checkpoint&) const = default;
};

template <typename Scalar>
Checkpoint make_checkpoint(const MFTrajModel<Scalar>& model, const FeatureStats& stats,
                           const std::vector<ad::Vector<Scalar>>* adam_m = nullptr,
                           const std::vector<ad::Vector<Scalar>>* adam_v = nullptr, std::uint64_t step = 0);

template <typename Scalar>
MFTrajModel<Scalar> model_from_checkpoint(const Checkpoint& checkpoint);

// ---------------------------------------------------------------------------
// Training and prediction

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN without a validation set
  double learning_rate = 0.0;
};

struct TrainOptions {
  int epochs = 10;
  int workers = 1;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochRecord> curve;
  Index parameter_count = 0;
};

/// Adam on mean smooth-L1 (+ beta_kl * mean KL) with gradient averaging over
/// batches and a step decay of the learning rate. Deterministic for a fixed
/// seed and worker count. A non-finite loss throws TrainingError.
TrainResult train(std::span<const TrajectoryScene> train_set, std::span<const TrajectoryScene> val_set,
                  const ModelConfig& config, const TrainOptions& options);

/// Eval-mode mean loss of a checkpoint on scenes with ground truth.
double evaluate_loss(const Checkpoint& checkpoint, std::span<const TrajectoryScene> scenes, int workers = 1);

void write_loss_curve(std::ostream& out, std::span<const EpochRecord> curve);

struct DropSpec {
  int frames = 0;
  std::uint64_t seed = 0;
  bool include_agents = false;
};

using Trajectory = Eigen::Matrix<double, Eigen::Dynamic, 2>;

struct Prediction {
  std::string scene_id;
  Trajectory path;
};

/// Eval-mode predictions; with a drop spec each scene first loses frames via
/// drop_frames (seed mixed with a hash of the scene id) and is re-imputed.
std::vector<Prediction> predict(const Checkpoint& checkpoint, std::span<const TrajectoryScene> scenes,
                                const std::optional<DropSpec>& drop = std::nullopt, int workers = 1);

/// scene_id, step, x, y.
void write_predictions(std::ostream& out, std::span<const Prediction> predictions);

}  // namespace mftraj
