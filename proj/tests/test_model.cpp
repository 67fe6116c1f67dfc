#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "mftraj/ad/gradcheck.hpp"
#include "mftraj/error.hpp"
#include "mftraj/model.hpp"
#include "gradient_suites.hpp"
#include "model_fixtures.hpp"

using namespace mftraj;
using mftraj::testing::small_config;
using mftraj::testing::small_scenes;

namespace {

Tensor<double> constant_path(Index steps, double x, double y) {
  ad::Vector<double> v(2 * steps);
  for (Index s = 0; s < steps; ++s) {
    v[2 * s] = x;
    v[2 * s + 1] = y;
  }
  return Tensor<double>::constant({steps, 2}, v);
}

TrajectoryScene translated(TrajectoryScene s, Point d) {
  for (std::size_t a = 0; a < s.node_count(); ++a)
    for (auto& p : s.agent(a).positions) p += d;
  for (auto& p : s.target_future) p += d;
  return s;
}

}  // namespace

TEST_CASE("position features") {
  TrajectoryScene s;
  s.scene_id = "p";
  s.target.agent_id = "target";
  AgentHistory other;
  other.agent_id = "a";
  for (int f = 0; f < 5; ++f) {
    s.target.positions.push_back(Point(0.1 * f, 0.0));
    s.target.observed.push_back(true);
    other.positions.push_back(Point(0.1 * f + 3.0, 4.0));
    other.observed.push_back(true);
  }
  s.agents.push_back(other);
  const PositionFeatures pf = position_features(s);
  REQUIRE(pf.displacement.rows() == 10);
  // Time-major rows: frame f, agent a at row f * 2 + a.
  CHECK(pf.displacement.row(0).isZero());
  for (int f = 1; f < 5; ++f) {
    CHECK(pf.displacement(f * 2, 0) == doctest::Approx(0.1));
    CHECK(pf.displacement(f * 2, 1) == 0.0);
  }
  for (int f = 0; f < 5; ++f) {
    CHECK(pf.offset_to_target(f * 2 + 1, 0) == doctest::Approx(3.0));
    CHECK(pf.offset_to_target(f * 2 + 1, 1) == doctest::Approx(4.0));
    CHECK(pf.offset_to_target.row(f * 2).isZero());
  }

  TrajectoryScene still = s;
  for (auto& p : still.target.positions) p = Point(2, 2);
  CHECK(position_features(still).displacement.col(0).segment(0, 1).isZero());
  for (int f = 0; f < 5; ++f) CHECK(position_features(still).displacement.row(f * 2).isZero());
}

TEST_CASE("loss examples") {
  const Tensor<double> gt = constant_path(30, 0.0, 0.0);
  CHECK(trajectory_loss(gt, gt).item() == 0.0);
  CHECK(trajectory_loss(constant_path(30, 0.5, 0.5), gt).item() == doctest::Approx(0.125));
  CHECK(trajectory_loss(constant_path(30, 2.0, -2.0), gt).item() == doctest::Approx(1.5));
  CHECK_THROWS_AS(trajectory_loss(constant_path(29, 0, 0), gt), ShapeError);
}

TEST_CASE("forward contract") {
  const ModelConfig config = small_config();
  const auto scenes = small_scenes(config, 3, 1);
  const FeatureStats stats = fit_behavior_stats(scenes, config);
  const MFTrajModel<double> model(config);
  for (const auto& scene : scenes) {
    const PreparedScene p = prepare_scene(scene, config, stats, true);
    const auto out = model.forward(p);
    CHECK(out.trajectory.shape() == Shape{config.t_f, 2});
    CHECK(out.trajectory.values().allFinite());
    CHECK(std::isfinite(out.kl.item()));
    CHECK(model.predict(p) == model.predict(p));
    const auto noisy = model.forward(p, vrnn_noise<double>(config, p, 0, 0));
    CHECK(noisy.trajectory.values().allFinite());
  }
}

TEST_CASE("zero head predicts a standstill at the last observed position") {
  const ModelConfig config = small_config();
  const auto scenes = small_scenes(config, 1, 2);
  const FeatureStats stats = fit_behavior_stats(scenes, config);
  MFTrajModel<double> model(config);
  int zeroed = 0;
  for (const auto& [name, t] : model.parameters().entries())
    if (name.starts_with("decoder.head.")) {
      t.mutable_values().setZero();
      ++zeroed;
    }
  CHECK(zeroed == 2);
  const PreparedScene p = prepare_scene(scenes[0], config, stats, true);
  const Eigen::MatrixXd y = model.predict(p);
  const Point last = scenes[0].target.positions.back();
  for (Index s = 0; s < y.rows(); ++s) {
    CHECK(y(s, 0) == last.x());
    CHECK(y(s, 1) == last.y());
  }
}

TEST_CASE("horizon and size checks") {
  const ModelConfig config = small_config();
  auto scenes = small_scenes(config, 1, 3);
  const FeatureStats stats = fit_behavior_stats(scenes, config);
  TrajectoryScene shorter = scenes[0];
  shorter.target.positions.pop_back();
  shorter.target.observed.pop_back();
  for (auto& a : shorter.agents) {
    a.positions.pop_back();
    a.observed.pop_back();
  }
  CHECK_THROWS_AS(prepare_scene(shorter, config, stats, true), ConfigError);
  TrajectoryScene no_future = scenes[0];
  no_future.target_future.pop_back();
  CHECK_THROWS_AS(prepare_scene(no_future, config, stats, true), ConfigError);

  ModelConfig bad = config;
  bad.groups = 3;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = config;
  bad.t_f = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("config key-value round trip") {
  ModelConfig c = small_config();
  c.precision = Precision::f32;
  c.plain_gcn = true;
  c.learning_rate = 3.25e-4;
  CHECK(ModelConfig::from_key_values(c.to_key_values()) == c);
  KeyValueConfig kv;
  kv.set("no_such_key", "1");
  CHECK_THROWS_AS(ModelConfig::from_key_values(kv), ConfigError);
  CHECK_NOTHROW(ModelConfig::from_key_values(kv, true));
  kv = KeyValueConfig{};
  kv.set("t_h", "ten");
  CHECK_THROWS_AS(ModelConfig::from_key_values(kv), ConfigError);
}

TEST_CASE("default parameter budget") {
  const Index n = parameter_count(ModelConfig{});
  MESSAGE("default parameter count " << n);
  CHECK(std::abs(static_cast<double>(n) - 1961000.0) <= 0.15 * 1961000.0);
  ModelConfig a;
  a.disable_behavior = true;
  CHECK(parameter_count(a) < n);
}

TEST_CASE("every parameter receives a finite gradient") {
  for (const bool plain : {false, true}) {
    ModelConfig config = small_config();
    config.plain_gcn = plain;
    const auto scenes = small_scenes(config, 1, 4);
    const FeatureStats stats = fit_behavior_stats(scenes, config);
    const MFTrajModel<double> model(config);
    const PreparedScene p = prepare_scene(scenes[0], config, stats, true);
    ad::Tape<double> tape;
    const auto out = model.forward(p, vrnn_noise<double>(config, p, 0, 0));
    const Tensor<double> loss = ad::add(trajectory_loss(out.trajectory, Tensor<double>::from_matrix(p.future)),
                                        ad::scale(out.kl, 0.1));
    tape.backward(loss);
    for (const auto& [name, t] : model.parameters().entries()) {
      INFO(name);
      const bool used = plain ? !name.starts_with("interaction.gcn") || name.find("plain") != std::string::npos
                              : name.find("plain") == std::string::npos;
      if (!used) continue;
      CHECK(t.has_grad());
      CHECK(t.grad().allFinite());
    }
  }
}

TEST_CASE("full forward gradient check") {
  for (std::uint64_t seed = 0; seed < 2; ++seed) {
    CAPTURE(seed);
    mftraj::testing::forward_gradients(seed, [](const std::string& label, const ad::GradCheckReport& report) {
      INFO(label << "\n" << report.table());
      CHECK(report.passed());
    });
  }
}

TEST_CASE("training determinism and identity cases") {
  ModelConfig config = small_config();
  config.batch_size = 4;
  const auto train_set = small_scenes(config, 6, 6);
  const auto val_set = small_scenes(config, 2, 7);
  TrainOptions options;
  options.epochs = 3;
  const TrainResult a = train(train_set, val_set, config, options);
  const TrainResult b = train(train_set, val_set, config, options);
  REQUIRE(a.curve.size() == 3);
  for (std::size_t e = 0; e < 3; ++e) {
    CHECK(a.curve[e].train_loss == b.curve[e].train_loss);
    CHECK(a.curve[e].val_loss == b.curve[e].val_loss);
    CHECK(std::isfinite(a.curve[e].val_loss));
  }
  CHECK(a.checkpoint == b.checkpoint);
  CHECK(a.checkpoint.step == 6);

  options.workers = 2;
  const TrainResult c = train(train_set, val_set, config, options);
  const TrainResult d = train(train_set, val_set, config, options);
  CHECK(c.checkpoint == d.checkpoint);

  options.epochs = 0;
  const TrainResult init = train(train_set, {}, config, options);
  CHECK(init.curve.empty());
  const Checkpoint fresh = make_checkpoint(MFTrajModel<double>(config), init.checkpoint.stats);
  CHECK(init.checkpoint == fresh);

  std::ostringstream curve;
  write_loss_curve(curve, a.curve);
  CHECK(curve.str().rfind("epoch,train_loss,val_loss,lr\n", 0) == 0);

  CHECK_THROWS_AS(train({}, {}, config, options), InputError);
}

TEST_CASE("learning rate schedule") {
  ModelConfig config = small_config();
  const auto train_set = small_scenes(config, 2, 8);
  TrainOptions options;
  options.epochs = 4;
  const auto r = train(train_set, {}, config, options);
  CHECK(r.curve[2].learning_rate == config.learning_rate);
  CHECK(r.curve[3].learning_rate == config.final_learning_rate);
  CHECK(std::isnan(r.curve[0].val_loss));
}

TEST_CASE("divergence raises a training error") {
  ModelConfig config = small_config();
  config.learning_rate = 1e300;
  config.final_learning_rate = 1e300;
  const auto train_set = small_scenes(config, 2, 9);
  TrainOptions options;
  options.epochs = 4;
  try {
    train(train_set, {}, config, options);
    FAIL("expected divergence");
  } catch (const TrainingError& e) {
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
}

TEST_CASE("checkpoint round trip") {
  ModelConfig config = small_config();
  const auto train_set = small_scenes(config, 3, 10);
  TrainOptions options;
  options.epochs = 1;
  const Checkpoint ck = train(train_set, {}, config, options).checkpoint;
  const std::string bytes = ck.serialize();
  const Checkpoint back = Checkpoint::deserialize(bytes);
  CHECK(back == ck);
  CHECK(back.serialize() == bytes);

  const auto path = std::filesystem::temp_directory_path() / "mftraj_test_model.ckpt";
  ck.save(path);
  const Checkpoint loaded = Checkpoint::load(path);
  CHECK(loaded.serialize() == bytes);
  std::filesystem::remove(path);

  const auto p1 = predict(ck, train_set);
  const auto p2 = predict(loaded, train_set);
  for (std::size_t i = 0; i < p1.size(); ++i) CHECK(p1[i].path == p2[i].path);

  CHECK_THROWS_AS(Checkpoint::deserialize(bytes.substr(0, bytes.size() - 3)), IoError);
  CHECK_THROWS_AS(Checkpoint::deserialize("NOTACKPT" + bytes.substr(8)), IoError);
  CHECK_THROWS_AS(model_from_checkpoint<float>(ck), ConfigError);
}

TEST_CASE("single precision trains and round trips") {
  ModelConfig config = small_config();
  config.precision = Precision::f32;
  const auto train_set = small_scenes(config, 2, 11);
  TrainOptions options;
  options.epochs = 2;
  const Checkpoint ck = train(train_set, {}, config, options).checkpoint;
  CHECK(ck.find("param/decoder.head.weight")->dtype == DType::f32);
  CHECK(Checkpoint::deserialize(ck.serialize()) == ck);
  const auto preds = predict(ck, train_set);
  CHECK(preds[0].path.allFinite());
}

TEST_CASE("prediction contracts") {
  ModelConfig config = small_config();
  const auto scenes = small_scenes(config, 4, 12);
  TrainOptions options;
  options.epochs = 1;
  const Checkpoint ck = train(scenes, {}, config, options).checkpoint;
  const auto plain = predict(ck, scenes);
  const auto k0 = predict(ck, scenes, DropSpec{0, 5, false});
  const MFTrajModel<double> model = model_from_checkpoint<double>(ck);
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    CHECK(plain[i].path == k0[i].path);
    CHECK(plain[i].scene_id == scenes[i].scene_id);
    const Eigen::MatrixXd direct = model.predict(prepare_scene(scenes[i], ck.config, ck.stats, false));
    CHECK(plain[i].path == direct);
  }
  CHECK(predict(ck, scenes, std::nullopt, 3)[2].path == plain[2].path);
  const auto dropped = predict(ck, scenes, DropSpec{3, 5, false});
  CHECK(dropped[0].path.allFinite());

  std::ostringstream csv;
  write_predictions(csv, plain);
  const std::string text = csv.str();
  CHECK(text.rfind("scene_id,step,x,y\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 1 + static_cast<long>(scenes.size()) * config.t_f);

  ModelConfig other = config;
  other.t_h = config.t_h + 1;
  Checkpoint mismatched = ck;
  mismatched.config = other;
  CHECK_THROWS_AS(predict(mismatched, scenes), ConfigError);
}

TEST_CASE("translation equivariance in eval mode") {
  ModelConfig config = small_config();
  const auto scenes = small_scenes(config, 3, 13);
  TrainOptions options;
  options.epochs = 2;
  const Checkpoint ck = train(scenes, {}, config, options).checkpoint;
  const Point d(125.0, -47.5);
  std::vector<TrajectoryScene> moved;
  for (const auto& s : scenes) moved.push_back(translated(s, d));
  const auto a = predict(ck, scenes), b = predict(ck, moved);
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    Eigen::MatrixXd shift = a[i].path;
    shift.col(0).array() += d.x();
    shift.col(1).array() += d.y();
    CHECK((b[i].path - shift).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("ablation variants build, train and predict") {
  const ModelConfig base = small_config();
  const auto scenes = small_scenes(base, 2, 14);
  for (AblationModel m : {AblationModel::A, AblationModel::B, AblationModel::C, AblationModel::D, AblationModel::E,
                          AblationModel::F}) {
    const ModelConfig config = ablation_config(base, m);
    INFO(to_char(m));
    TrainOptions options;
    options.epochs = 1;
    const TrainResult r = train(scenes, {}, config, options);
    CHECK(std::isfinite(r.curve[0].train_loss));
    CHECK(predict(r.checkpoint, scenes)[0].path.allFinite());
    if (m == AblationModel::A) {
      CHECK(r.parameter_count < parameter_count(base));
      for (const auto& a : r.checkpoint.arrays) CHECK(a.name.find("behavior.") == std::string::npos);
    }
  }
}

TEST_CASE("scenes with gaps and a lone target") {
  ModelConfig config = small_config();
  auto scenes = small_scenes(config, 2, 15);
  TrajectoryScene lone = scenes[0];
  lone.agents.clear();
  lone.scene_id = "lone";
  scenes.push_back(lone);
  auto [dropped, mask] = drop_frames(scenes[1], 3, 1);
  scenes[1] = dropped;
  TrainOptions options;
  options.epochs = 1;
  const TrainResult r = train(scenes, {}, config, options);
  CHECK(std::isfinite(r.curve[0].train_loss));
  CHECK(predict(r.checkpoint, scenes)[2].path.allFinite());
}
