#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mftraj/config.hpp"
#include "mftraj/log.hpp"
#include "mftraj/model.hpp"

namespace mftraj {

/// Fully resolved settings of one command. `effective` holds every key with
/// its final textual value, `origin` records where each value came from
/// ("default", "file", "flag" or "checkpoint").
struct RunConfig {
  std::string command;
  ModelConfig model;

  std::string data;
  std::string val_data;
  std::string train_data;
  std::string out;
  std::string checkpoint;

  std::vector<ScenarioKind> kinds{ScenarioKind::lane_change};
  int scenes = 32;
  int val_scenes = 8;
  int test_scenes = 8;
  int frames = 50;
  int stride = 10;
  int neighbors = 3;
  double noise_sigma = 0.05;

  int epochs = 10;
  int workers = 1;
  std::vector<int> drops;
  std::vector<std::uint64_t> drop_seeds{0, 1, 2};
  bool retrain = false;
  bool include_agents = false;
  AblationModel variant = AblationModel::F;
  int scene_index = 0;
  LogLevel log = LogLevel::info;

  KeyValueConfig effective;
  std::map<std::string, std::string> origin;
  /// Config-file values that a flag replaced, by key.
  std::map<std::string, std::string> overridden;
};

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

/// Runs one command line (args[0] is the program name). Normal output goes to
/// `out`, the one-line diagnostic of a failure to `err`.
int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace mftraj
