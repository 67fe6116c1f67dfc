#include "mftraj/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "mftraj/error.hpp"
#include "mftraj/log.hpp"

namespace mftraj {

namespace {

void check_pair(const Trajectory& pred, const Trajectory& gt) {
  if (pred.rows() != gt.rows())
    throw ShapeError("metric: prediction has " + std::to_string(pred.rows()) + " steps, ground truth " +
                     std::to_string(gt.rows()));
  if (pred.rows() == 0) throw ShapeError("metric: empty trajectory");
}

void check_sets(std::span<const Trajectory> preds, std::span<const Trajectory> gts) {
  if (preds.size() != gts.size())
    throw ShapeError("metric: " + std::to_string(preds.size()) + " predictions for " + std::to_string(gts.size()) +
                     " ground truths");
  if (preds.empty()) throw InputError("metric: no scenes to score");
  for (std::size_t i = 0; i < preds.size(); ++i) check_pair(preds[i], gts[i]);
}

Trajectory future_of(const TrajectoryScene& scene) {
  Trajectory t(static_cast<Index>(scene.target_future.size()), 2);
  for (std::size_t k = 0; k < scene.target_future.size(); ++k) t.row(static_cast<Index>(k)) = scene.target_future[k];
  return t;
}

}  // namespace

double ade(const Trajectory& pred, const Trajectory& gt) {
  check_pair(pred, gt);
  return (pred - gt).rowwise().norm().mean();
}

double fde(const Trajectory& pred, const Trajectory& gt) {
  check_pair(pred, gt);
  return (pred.row(pred.rows() - 1) - gt.row(gt.rows() - 1)).norm();
}

double miss_rate(std::span<const Trajectory> preds, std::span<const Trajectory> gts, double threshold_m) {
  check_sets(preds, gts);
  std::size_t misses = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) misses += fde(preds[i], gts[i]) > threshold_m ? 1 : 0;
  return static_cast<double>(misses) / static_cast<double>(preds.size());
}

std::vector<std::pair<double, double>> rmse_by_horizon(std::span<const Trajectory> preds,
                                                       std::span<const Trajectory> gts, double sample_rate_hz,
                                                       std::span<const double> horizons_s) {
  check_sets(preds, gts);
  if (!(sample_rate_hz > 0)) throw ConfigError("sample rate must be positive");
  const Index steps = preds.front().rows();
  std::vector<std::pair<double, double>> out;
  for (const double h : horizons_s) {
    const auto step = static_cast<Index>(std::llround(h * sample_rate_hz)) - 1;
    if (step < 0 || step >= steps)
      throw BoundsError("horizon " + format_double(h) + " s is outside the " + std::to_string(steps) +
                        "-step prediction");
    double sq = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (preds[i].rows() != steps) throw ShapeError("metric: predictions differ in length");
      sq += (preds[i].row(step) - gts[i].row(step)).squaredNorm();
    }
    out.emplace_back(h, std::sqrt(sq / (2.0 * static_cast<double>(preds.size()))));
  }
  return out;
}

MetricReport score(std::span<const Prediction> predictions, std::span<const TrajectoryScene> scenes,
                   double sample_rate_hz, std::string label, double miss_threshold_m) {
  if (predictions.size() != scenes.size())
    throw ShapeError("score: " + std::to_string(predictions.size()) + " predictions for " +
                     std::to_string(scenes.size()) + " scenes");
  std::vector<Trajectory> preds, gts;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    if (scenes[i].target_future.empty()) throw InputError("score: scene " + scenes[i].scene_id + " has no future");
    preds.push_back(predictions[i].path);
    gts.push_back(future_of(scenes[i]));
  }
  check_sets(preds, gts);
  MetricReport r;
  r.label = std::move(label);
  r.scene_count = scenes.size();
  for (std::size_t i = 0; i < preds.size(); ++i) {
    r.min_ade_m += ade(preds[i], gts[i]);
    r.min_fde_m += fde(preds[i], gts[i]);
  }
  r.min_ade_m /= static_cast<double>(preds.size());
  r.min_fde_m /= static_cast<double>(preds.size());
  r.miss_rate = miss_rate(preds, gts, miss_threshold_m);
  std::vector<double> horizons;
  const double span_s = static_cast<double>(preds.front().rows()) / sample_rate_hz;
  for (double h : kReportHorizons)
    if (h <= span_s + 1e-9) horizons.push_back(h);
  r.rmse_by_horizon = rmse_by_horizon(preds, gts, sample_rate_hz, horizons);
  return r;
}

MetricReport average(std::span<const MetricReport> reports, std::string label) {
  if (reports.empty()) throw InputError("average of no reports");
  MetricReport out = reports.front();
  out.label = std::move(label);
  for (std::size_t k = 1; k < reports.size(); ++k) {
    const MetricReport& r = reports[k];
    if (r.rmse_by_horizon.size() != out.rmse_by_horizon.size() || r.scene_count != out.scene_count)
      throw InputError("average: reports cover different horizons or scene sets");
    out.min_ade_m += r.min_ade_m;
    out.min_fde_m += r.min_fde_m;
    out.miss_rate += r.miss_rate;
    for (std::size_t h = 0; h < r.rmse_by_horizon.size(); ++h) out.rmse_by_horizon[h].second += r.rmse_by_horizon[h].second;
  }
  const double n = static_cast<double>(reports.size());
  out.min_ade_m /= n;
  out.min_fde_m /= n;
  out.miss_rate /= n;
  for (auto& [h, v] : out.rmse_by_horizon) v /= n;
  return out;
}

void write_report_csv(std::ostream& out, std::span<const MetricReport> reports) {
  out << "model_or_drop,min_ade,min_fde,miss_rate";
  for (double h : kReportHorizons) out << ",rmse_" << format_double(h) << 's';
  out << ",scene_count\n";
  for (const MetricReport& r : reports) {
    out << r.label << ',' << format_double(r.min_ade_m) << ',' << format_double(r.min_fde_m) << ','
        << format_double(r.miss_rate);
    for (double h : kReportHorizons) {
      out << ',';
      for (const auto& [rh, v] : r.rmse_by_horizon)
        if (rh == h) out << format_double(v);
    }
    out << ',' << r.scene_count << '\n';
  }
}

std::vector<MetricReport> robustness_sweep(const Checkpoint& checkpoint, std::span<const TrajectoryScene> test_scenes,
                                           const SweepOptions& options) {
  if (options.drops.empty()) throw ConfigError("robustness sweep needs at least one drop count");
  if (options.seeds.empty()) throw ConfigError("robustness sweep needs at least one seed");
  const int t_h = checkpoint.config.t_h;
  const int max_drop = *std::max_element(options.drops.begin(), options.drops.end());
  if (*std::min_element(options.drops.begin(), options.drops.end()) < 0 || t_h < max_drop + 1)
    throw BoundsError("drop counts must lie in [0, t_h - 1] = [0, " + std::to_string(t_h - 1) + "]");
  if (options.retrain && options.train_set.empty()) throw ConfigError("retraining sweep needs a training set");

  std::vector<MetricReport> rows;
  for (const int k : options.drops) {
    Checkpoint used = checkpoint;
    if (options.retrain) {
      std::vector<TrajectoryScene> degraded;
      for (const auto& s : options.train_set) {
        if (k == 0) {
          degraded.push_back(s);
          continue;
        }
        auto [dropped, mask] = drop_frames(s, k, mix_seed(options.seeds.front(), stable_hash(s.scene_id)),
                                           options.include_agents);
        degraded.push_back(impute_linear(dropped, mask));
      }
      TrainOptions to;
      to.epochs = options.epochs;
      to.workers = options.workers;
      log_info("robustness: retraining for drop " + std::to_string(k));
      used = train(degraded, {}, checkpoint.config, to).checkpoint;
    }
    std::vector<MetricReport> per_seed;
    for (const std::uint64_t seed : options.seeds) {
      const DropSpec spec{k, seed, options.include_agents};
      const auto preds = predict(used, test_scenes, spec, options.workers);
      per_seed.push_back(score(preds, test_scenes, checkpoint.config.sample_rate_hz));
    }
    rows.push_back(average(per_seed, "drop_" + std::to_string(k)));
    log_info("robustness: drop " + std::to_string(k) + " minADE " + format_double(rows.back().min_ade_m));
  }
  return rows;
}

std::pair<std::vector<TrajectoryScene>, std::vector<TrajectoryScene>> split_by_hash(
    std::span<const TrajectoryScene> scenes, double train_fraction) {
  if (train_fraction < 0.0 || train_fraction > 1.0) throw ConfigError("train fraction must lie in [0, 1]");
  const auto cut = static_cast<std::uint64_t>(std::llround(train_fraction * 100.0));
  std::pair<std::vector<TrajectoryScene>, std::vector<TrajectoryScene>> out;
  for (const auto& s : scenes) (stable_hash(s.scene_id) % 100 < cut ? out.first : out.second).push_back(s);
  return out;
}

std::vector<MetricReport> ablation_matrix(std::span<const TrajectoryScene> dataset, const ModelConfig& base,
                                          const AblationOptions& options) {
  const auto [train_set, test_set] = split_by_hash(dataset, options.train_fraction);
  if (train_set.empty() || test_set.empty())
    throw InputError("ablation split left an empty side (" + std::to_string(train_set.size()) + " train, " +
                     std::to_string(test_set.size()) + " test)");
  std::vector<MetricReport> rows;
  for (const AblationModel m : options.models) {
    const ModelConfig config = ablation_config(base, m);
    TrainOptions to;
    to.epochs = options.epochs;
    to.workers = options.workers;
    log_info(std::string("ablation: training model ") + to_char(m));
    const TrainResult trained = train(train_set, {}, config, to);
    const auto preds = predict(trained.checkpoint, test_set, std::nullopt, options.workers);
    rows.push_back(score(preds, test_set, config.sample_rate_hz, std::string(1, to_char(m))));
    log_info(std::string("ablation: model ") + to_char(m) + " minADE " + format_double(rows.back().min_ade_m));
  }
  return rows;
}

}  // namespace mftraj
