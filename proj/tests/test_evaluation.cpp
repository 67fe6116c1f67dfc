#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "mftraj/error.hpp"
#include "mftraj/evaluation.hpp"

using namespace mftraj;

namespace {

Trajectory line(int steps, double slope) {
  Trajectory t(steps, 2);
  for (int s = 0; s < steps; ++s) t.row(s) << slope * (s + 1), 0.0;
  return t;
}

Trajectory constant(int steps, double x, double y) {
  Trajectory t(steps, 2);
  t.col(0).setConstant(x);
  t.col(1).setConstant(y);
  return t;
}

TrajectoryScene with_future(const Trajectory& future, std::string id) {
  TrajectoryScene s;
  s.scene_id = std::move(id);
  s.target.agent_id = "target";
  s.target.positions = {Point::Zero()};
  s.target.observed = {true};
  for (Eigen::Index k = 0; k < future.rows(); ++k) s.target_future.emplace_back(future(k, 0), future(k, 1));
  return s;
}

}  // namespace

TEST_CASE("ade and fde") {
  const Trajectory zero = Trajectory::Zero(30, 2);
  CHECK(ade(zero, zero) == 0.0);
  CHECK(fde(zero, zero) == 0.0);
  const Trajectory grow = line(30, 0.1);
  CHECK(ade(grow, zero) == doctest::Approx(1.55));
  CHECK(fde(grow, zero) == doctest::Approx(3.0));
  CHECK_THROWS_AS(ade(grow, Trajectory::Zero(29, 2)), ShapeError);
  CHECK_THROWS_AS(fde(grow, Trajectory::Zero(31, 2)), ShapeError);
}

TEST_CASE("miss rate") {
  std::vector<Trajectory> preds{constant(30, 1.0, 0), constant(30, 2.5, 0), constant(30, 3.0, 0)};
  std::vector<Trajectory> gts(3, Trajectory::Zero(30, 2));
  CHECK(miss_rate(preds, gts, 2.0) == doctest::Approx(2.0 / 3.0));
  // Exactly at the threshold is not a miss.
  std::vector<Trajectory> edge{constant(30, 2.0, 0)};
  CHECK(miss_rate(edge, std::vector<Trajectory>{Trajectory::Zero(30, 2)}) == 0.0);
  CHECK_THROWS_AS(miss_rate({}, {}), InputError);
}

TEST_CASE("rmse by horizon") {
  std::vector<Trajectory> preds{constant(30, 3.0, 4.0), constant(30, 3.0, 4.0)};
  std::vector<Trajectory> gts(2, Trajectory::Zero(30, 2));
  const std::vector<double> horizons{1.0, 2.0, 3.0};
  const auto r = rmse_by_horizon(preds, gts, 10.0, horizons);
  REQUIRE(r.size() == 3);
  for (const auto& [h, v] : r) CHECK(std::abs(v - std::sqrt(12.5)) < 1e-12);

  // Horizon / step mapping: 1 s at 10 Hz scores step index 9.
  std::vector<Trajectory> ramp{line(30, 1.0)};
  const std::vector<double> one{1.0};
  CHECK(rmse_by_horizon(ramp, std::vector<Trajectory>{Trajectory::Zero(30, 2)}, 10.0, one)[0].second ==
        doctest::Approx(10.0 / std::sqrt(2.0)));

  const std::vector<double> far{4.0};
  CHECK_THROWS_AS(rmse_by_horizon(preds, gts, 10.0, far), BoundsError);
}

TEST_CASE("score, average and report csv") {
  std::vector<TrajectoryScene> scenes{with_future(Trajectory::Zero(30, 2), "a"),
                                      with_future(Trajectory::Zero(30, 2), "b")};
  std::vector<Prediction> preds{{"a", line(30, 0.1)}, {"b", constant(30, 3.0, 4.0)}};
  const MetricReport r = score(preds, scenes, 10.0, "x");
  CHECK(r.scene_count == 2);
  CHECK(r.min_ade_m == doctest::Approx((1.55 + 5.0) / 2));
  CHECK(r.min_fde_m == doctest::Approx((3.0 + 5.0) / 2));
  CHECK(r.miss_rate == doctest::Approx(1.0));
  REQUIRE(r.rmse_by_horizon.size() == 3);

  const std::vector<MetricReport> both{r, r};
  const MetricReport avg = average(both, "avg");
  CHECK(avg.min_ade_m == doctest::Approx(r.min_ade_m));

  std::ostringstream os;
  write_report_csv(os, both);
  std::istringstream in(os.str());
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "model_or_drop,min_ade,min_fde,miss_rate,rmse_1s,rmse_2s,rmse_3s,rmse_4s,rmse_5s,scene_count");
  CHECK(row.substr(0, 2) == "x,");
  CHECK(row.find(",,,2") == row.size() - 4);  // rmse_4s and rmse_5s blank for a 3 s horizon

  std::vector<TrajectoryScene> inference{scenes[0]};
  inference[0].target_future.clear();
  CHECK_THROWS_AS(score(std::span(preds).first(1), inference, 10.0), InputError);
}

TEST_CASE("hash split is deterministic and near the requested fraction") {
  std::vector<TrajectoryScene> scenes;
  for (int i = 0; i < 400; ++i) scenes.push_back(with_future(Trajectory::Zero(2, 2), "scene_" + std::to_string(i)));
  const auto [train, test] = split_by_hash(scenes, 0.8);
  CHECK(train.size() + test.size() == 400);
  CHECK(train.size() > 280);
  CHECK(train.size() < 360);
  const auto [train2, test2] = split_by_hash(scenes, 0.8);
  CHECK(train2.size() == train.size());
  CHECK(split_by_hash(scenes, 0.0).first.empty());
  CHECK(split_by_hash(scenes, 1.0).second.empty());
}

TEST_CASE("robustness sweep preconditions") {
  Checkpoint ck;
  ck.config.t_h = 9;
  SweepOptions opts;
  opts.drops = {0, 9};
  CHECK_THROWS_AS(robustness_sweep(ck, {}, opts), BoundsError);
  opts.drops = {};
  CHECK_THROWS_AS(robustness_sweep(ck, {}, opts), ConfigError);
  opts.drops = {0};
  opts.retrain = true;
  CHECK_THROWS_AS(robustness_sweep(ck, {}, opts), ConfigError);
}
