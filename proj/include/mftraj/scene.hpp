#pragma once

// Trajectory data model, CSV ingestion, windowing, missing-frame simulation,
// linear imputation and synthetic scenario generation.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace mftraj {

using Point = Eigen::Vector2d;

/// Positions of one agent over the history frames of a scene. Frames on
/// which the agent was not observed keep their slot and are flagged false.
struct AgentHistory {
  std::string agent_id;
  std::vector<Point> positions;
  std::vector<bool> observed;

  std::size_t frame_count() const { return positions.size(); }
  std::size_t observed_count() const;

  bool operator==(const AgentHistory&) const = default;
};

/// One prediction instance: the target (index 0) and n surrounding agents
/// (indices 1..n) over t_h + 1 history frames, plus the target's future.
struct TrajectoryScene {
  std::string scene_id;
  double sample_rate_hz = 10.0;
  std::int64_t start_frame = 0;
  AgentHistory target;
  std::vector<AgentHistory> agents;
  std::vector<Point> target_future;  // empty in inference mode

  std::size_t history_length() const { return target.positions.size(); }
  std::size_t agent_count() const { return agents.size(); }
  std::size_t node_count() const { return agents.size() + 1; }
  double timestamp(std::size_t frame) const;

  /// Agent by scene index: 0 is the target.
  const AgentHistory& agent(std::size_t index) const;
  AgentHistory& agent(std::size_t index);

  /// Throws InputError when the structural invariants do not hold.
  void validate() const;

  bool operator==(const TrajectoryScene&) const = default;
};

/// Observation flags per agent (row 0 = target) per history frame.
struct ObservationMask {
  std::vector<std::vector<bool>> flags;

  const std::vector<bool>& target() const { return flags.front(); }
  std::size_t unobserved_target_frames() const;
  bool operator==(const ObservationMask&) const = default;
};

ObservationMask observation_mask(const TrajectoryScene& scene);

// ---------------------------------------------------------------------------
// CSV interchange

/// Column names of the scene CSV. The defaults are the canonical format.
struct CsvSchema {
  std::string scene_id = "scene_id";
  std::string frame = "frame";
  std::string agent_id = "agent_id";
  std::string role = "role";
  std::string x = "x";
  std::string y = "y";
  std::string target_role = "target";
  std::string agent_role = "agent";
  double sample_rate_hz = 10.0;
};

std::vector<TrajectoryScene> parse_scenes(std::istream& in, const CsvSchema& schema = {});
std::vector<TrajectoryScene> load_scenes(const std::filesystem::path& path,
                                         const CsvSchema& schema = {});

/// History frames are written for every agent (unobserved agent frames are
/// omitted), then the target future as continued target rows.
void write_scenes(std::ostream& out, std::span<const TrajectoryScene> scenes);
void save_scenes(const std::filesystem::path& path, std::span<const TrajectoryScene> scenes);

/// Mask sidecar: scene_id, agent_id, frame, observed(0|1).
void write_masks(std::ostream& out, std::span<const TrajectoryScene> scenes,
                 std::span<const ObservationMask> masks);
void save_masks(const std::filesystem::path& path, std::span<const TrajectoryScene> scenes,
                std::span<const ObservationMask> masks);

// ---------------------------------------------------------------------------
// Windowing and missing data

/// Sliding windows of t_h + 1 history frames followed by t_f future frames,
/// starting every `stride` frames. Tracks shorter than a window yield nothing.
std::vector<TrajectoryScene> segment(std::span<const TrajectoryScene> stream, int t_h, int t_f,
                                     int stride);

/// Flags k interior target-history frames as unobserved (their positions
/// become NaN). With `include_agents`, each surrounding agent also loses up to
/// k frames strictly inside its observed span.
std::pair<TrajectoryScene, ObservationMask> drop_frames(const TrajectoryScene& scene, int k,
                                                        std::uint64_t seed,
                                                        bool include_agents = false);

/// Replaces every unobserved frame bracketed by observed frames with the
/// linear interpolation of its nearest observed neighbours.
TrajectoryScene impute_linear(const TrajectoryScene& scene, const ObservationMask& mask);

// ---------------------------------------------------------------------------
// Synthetic scenarios

enum class ScenarioKind { constant_velocity, lane_change, car_follow, merge };

ScenarioKind parse_scenario_kind(std::string_view name);
std::string_view to_string(ScenarioKind kind);

struct SyntheticSpec {
  std::vector<ScenarioKind> kinds{ScenarioKind::lane_change};  // cycled over scenes
  int scenes = 1;
  int frames = 50;
  double sample_rate_hz = 10.0;
  double noise_sigma = 0.05;
  std::uint64_t seed = 0;
  int neighbors = 3;
  std::optional<Point> velocity;  // fixes the target velocity when set
  double lateral_amplitude = 3.5;
  std::string id_prefix;  // defaults to the kind name
};

/// Full-length tracks (every frame in the history, no future); feed them to
/// `segment` to obtain prediction windows.
std::vector<TrajectoryScene> generate_synthetic(const SyntheticSpec& spec);

/// Deterministic 64-bit mixer used to derive per-item seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// FNV-1a hash of a string; stable across platforms and runs.
std::uint64_t stable_hash(std::string_view text);

}  // namespace mftraj
