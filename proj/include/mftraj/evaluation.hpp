#pragma once

// Displacement metrics (k = 1, so min-over-candidates reduces to the single
// prediction), the missing-data robustness sweep and the ablation matrix.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mftraj/model.hpp"

namespace mftraj {

inline constexpr double kMissThreshold = 2.0;
inline const std::vector<double> kReportHorizons{1.0, 2.0, 3.0, 4.0, 5.0};

/// Mean Euclidean error over the steps.
double ade(const Trajectory& pred, const Trajectory& gt);
/// Euclidean error at the last step.
double fde(const Trajectory& pred, const Trajectory& gt);

/// Fraction of scenes whose final-step error exceeds `threshold_m`.
double miss_rate(std::span<const Trajectory> preds, std::span<const Trajectory> gts,
                 double threshold_m = kMissThreshold);

/// For each horizon h (seconds) the step round(h * rate) - 1 is scored as
/// sqrt(mean over scenes and both coordinates of the squared error).
/// A horizon outside the predicted steps is a BoundsError.
std::vector<std::pair<double, double>> rmse_by_horizon(std::span<const Trajectory> preds,
                                                       std::span<const Trajectory> gts, double sample_rate_hz,
                                                       std::span<const double> horizons_s);

struct MetricReport {
  std::string label;
  double min_ade_m = 0.0;
  double min_fde_m = 0.0;
  double miss_rate = 0.0;
  /// (horizon seconds, RMSE) for the report horizons that fall inside t_f.
  std::vector<std::pair<double, double>> rmse_by_horizon;
  std::size_t scene_count = 0;
};

/// Scores predictions against the futures of the matching scenes (same order).
MetricReport score(std::span<const Prediction> predictions, std::span<const TrajectoryScene> scenes,
                   double sample_rate_hz, std::string label = {}, double miss_threshold_m = kMissThreshold);

/// Element-wise mean of reports that share horizons and scene counts.
MetricReport average(std::span<const MetricReport> reports, std::string label);

/// model_or_drop, min_ade, min_fde, miss_rate, rmse_1s..rmse_5s, scene_count.
/// Horizons beyond the prediction length are left empty.
void write_report_csv(std::ostream& out, std::span<const MetricReport> reports);

struct SweepOptions {
  std::vector<int> drops{0, 3, 5, 8, 10};
  std::vector<std::uint64_t> seeds{0, 1, 2};
  bool include_agents = false;
  int workers = 1;
  /// Retrain one model per drop count on degraded training scenes (with the
  /// first seed) instead of evaluating the given checkpoint.
  bool retrain = false;
  std::vector<TrajectoryScene> train_set;
  int epochs = 0;
};

/// One report per drop count, averaged over the seeds.
std::vector<MetricReport> robustness_sweep(const Checkpoint& checkpoint, std::span<const TrajectoryScene> test_scenes,
                                           const SweepOptions& options);

/// Deterministic split: a scene goes to the training side when
/// stable_hash(scene_id) mod 100 < 100 * train_fraction.
std::pair<std::vector<TrajectoryScene>, std::vector<TrajectoryScene>> split_by_hash(
    std::span<const TrajectoryScene> scenes, double train_fraction = 0.8);

struct AblationOptions {
  int epochs = 10;
  int workers = 1;
  double train_fraction = 0.8;
  std::vector<AblationModel> models{AblationModel::A, AblationModel::B, AblationModel::C,
                                    AblationModel::D, AblationModel::E, AblationModel::F};
};

/// Trains every requested variant with the same data, seed and epochs and
/// scores it on the held-out split. Reports are labelled A..F.
std::vector<MetricReport> ablation_matrix(std::span<const TrajectoryScene> dataset, const ModelConfig& base,
                                          const AblationOptions& options);

}  // namespace mftraj
