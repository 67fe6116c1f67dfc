#include "mftraj/scene.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include "mftraj/error.hpp"

namespace mftraj {

std::size_t AgentHistory::observed_count() const {
  return static_cast<std::size_t>(std::count(observed.begin(), observed.end(), true));
}

double TrajectoryScene::timestamp(std::size_t frame) const {
  return static_cast<double>(start_frame + static_cast<std::int64_t>(frame)) / sample_rate_hz;
}

const AgentHistory& TrajectoryScene::agent(std::size_t index) const {
  if (index == 0) return target;
  if (index > agents.size()) throw BoundsError("agent index " + std::to_string(index) + " out of range");
  return agents[index - 1];
}

AgentHistory& TrajectoryScene::agent(std::size_t index) {
  return const_cast<AgentHistory&>(std::as_const(*this).agent(index));
}

void TrajectoryScene::validate() const {
  if (!(sample_rate_hz > 0.0)) throw InputError("scene " + scene_id + ": sample rate must be positive");
  const std::size_t frames = history_length();
  if (frames == 0) throw InputError("scene " + scene_id + ": empty target history");
  for (std::size_t a = 0; a < node_count(); ++a) {
    const AgentHistory& h = agent(a);
    if (h.positions.size() != frames || h.observed.size() != frames)
      throw InputError("scene " + scene_id + ": agent " + h.agent_id + " does not cover the history frames");
  }
}

std::size_t ObservationMask::unobserved_target_frames() const {
  const auto& t = target();
  return static_cast<std::size_t>(std::count(t.begin(), t.end(), false));
}

ObservationMask observation_mask(const TrajectoryScene& scene) {
  ObservationMask mask;
  mask.flags.reserve(scene.node_count());
  for (std::size_t a = 0; a < scene.node_count(); ++a) mask.flags.push_back(scene.agent(a).observed);
  return mask;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    const std::string_view field =
        line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    fields.push_back(field);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  for (auto& f : fields) {
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
  }
  return fields;
}

template <typename T>
bool parse_number(std::string_view text, T& value) {
  if constexpr (std::is_floating_point_v<T>) {
    std::string buffer(text);
    char* end = nullptr;
    value = std::strtod(buffer.c_str(), &end);
    return !buffer.empty() && end == buffer.c_str() + buffer.size();
  } else {
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    return ec == std::errc() && ptr == text.data() + text.size();
  }
}

std::string format_double(double v) {
  char buffer[40];
  std::snprintf(buffer, sizeof buffer, "%.17g", v);
  return buffer;
}

struct RawRow {
  std::int64_t frame;
  std::string agent_id;
  bool is_target;
  Point xy;
};

struct RawScene {
  std::string id;
  std::vector<RawRow> rows;
};

}  // namespace

std::vector<TrajectoryScene> parse_scenes(std::istream& in, const CsvSchema& schema) {
  if (!(schema.sample_rate_hz > 0.0)) throw ConfigError("sample rate must be positive");
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("line 1: missing header");
  ++line_no;
  const auto header = split_fields(line);
  auto column = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw SchemaError("header lacks column '" + name + "'");
  };
  const std::size_t c_scene = column(schema.scene_id), c_frame = column(schema.frame),
                    c_agent = column(schema.agent_id), c_role = column(schema.role), c_x = column(schema.x),
                    c_y = column(schema.y);
  const std::size_t needed = std::max({c_scene, c_frame, c_agent, c_role, c_x, c_y}) + 1;

  std::vector<RawScene> raw;
  std::unordered_map<std::string, std::size_t> scene_index;
  std::set<std::tuple<std::string, std::int64_t, std::string>> seen;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_fields(line);
    const auto fail = [&](const std::string& what) {
      throw ParseError("line " + std::to_string(line_no) + ": " + what);
    };
    if (fields.size() < needed) fail("expected at least " + std::to_string(needed) + " fields");
    RawRow row;
    if (!parse_number(fields[c_frame], row.frame)) fail("bad frame index '" + std::string(fields[c_frame]) + "'");
    if (!parse_number(fields[c_x], row.xy.x()) || !parse_number(fields[c_y], row.xy.y()))
      fail("bad coordinate");
    if (!std::isfinite(row.xy.x()) || !std::isfinite(row.xy.y())) fail("non-finite coordinate");
    row.agent_id = std::string(fields[c_agent]);
    if (row.agent_id.empty()) fail("empty agent id");
    if (fields[c_role] == schema.target_role) {
      row.is_target = true;
    } else if (fields[c_role] == schema.agent_role) {
      row.is_target = false;
    } else {
      fail("unknown role '" + std::string(fields[c_role]) + "'");
    }
    std::string id(fields[c_scene]);
    if (id.empty()) fail("empty scene id");
    if (!seen.emplace(id, row.frame, row.agent_id).second)
      fail("duplicate row for scene " + id + ", frame " + std::to_string(row.frame) + ", agent " + row.agent_id);
    auto [it, inserted] = scene_index.try_emplace(id, raw.size());
    if (inserted) raw.push_back(RawScene{id, {}});
    raw[it->second].rows.push_back(std::move(row));
  }

  std::vector<TrajectoryScene> scenes;
  scenes.reserve(raw.size());
  for (RawScene& rs : raw) {
    std::string target_id;
    for (const RawRow& r : rs.rows) {
      if (!r.is_target) continue;
      if (!target_id.empty() && target_id != r.agent_id)
        throw SchemaError("scene " + rs.id + " marks more than one target (" + target_id + ", " + r.agent_id + ")");
      target_id = r.agent_id;
    }
    if (target_id.empty()) throw SchemaError("scene " + rs.id + " has no target");

    std::map<std::int64_t, Point> target_track;
    std::vector<std::string> agent_order;
    std::unordered_map<std::string, std::map<std::int64_t, Point>> agent_tracks;
    for (const RawRow& r : rs.rows) {
      if (r.agent_id == target_id) {
        if (!r.is_target) throw SchemaError("scene " + rs.id + ": agent " + r.agent_id + " has mixed roles");
        target_track.emplace(r.frame, r.xy);
      } else {
        auto [it, inserted] = agent_tracks.try_emplace(r.agent_id);
        if (inserted) agent_order.push_back(r.agent_id);
        it->second.emplace(r.frame, r.xy);
      }
    }
    const std::int64_t first = target_track.begin()->first;
    const std::int64_t last = target_track.rbegin()->first;
    if (last - first + 1 != static_cast<std::int64_t>(target_track.size()))
      throw TimingError("scene " + rs.id + ": target frames are not uniformly spaced");

    TrajectoryScene scene;
    scene.scene_id = rs.id;
    scene.sample_rate_hz = schema.sample_rate_hz;
    scene.start_frame = first;
    scene.target.agent_id = target_id;
    for (const auto& [frame, xy] : target_track) {
      scene.target.positions.push_back(xy);
      scene.target.observed.push_back(true);
    }
    const std::size_t frames = scene.target.positions.size();
    for (const std::string& id : agent_order) {
      AgentHistory h;
      h.agent_id = id;
      h.positions.assign(frames, Point::Zero());
      h.observed.assign(frames, false);
      for (const auto& [frame, xy] : agent_tracks[id]) {
        if (frame < first || frame > last) continue;
        const auto k = static_cast<std::size_t>(frame - first);
        h.positions[k] = xy;
        h.observed[k] = true;
      }
      if (h.observed_count() >= 2) scene.agents.push_back(std::move(h));
    }
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

std::vector<TrajectoryScene> load_scenes(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_scenes(in, schema);
}

void write_scenes(std::ostream& out, std::span<const TrajectoryScene> scenes) {
  out << "scene_id,frame,agent_id,role,x,y\n";
  for (const TrajectoryScene& s : scenes) {
    const auto row = [&](std::int64_t frame, const std::string& id, const char* role, const Point& p) {
      out << s.scene_id << ',' << frame << ',' << id << ',' << role << ',' << format_double(p.x()) << ','
          << format_double(p.y()) << '\n';
    };
    for (std::size_t k = 0; k < s.history_length(); ++k)
      row(s.start_frame + static_cast<std::int64_t>(k), s.target.agent_id, "target", s.target.positions[k]);
    for (std::size_t k = 0; k < s.target_future.size(); ++k)
      row(s.start_frame + static_cast<std::int64_t>(s.history_length() + k), s.target.agent_id, "target",
          s.target_future[k]);
    for (const AgentHistory& a : s.agents)
      for (std::size_t k = 0; k < a.frame_count(); ++k)
        if (a.observed[k]) row(s.start_frame + static_cast<std::int64_t>(k), a.agent_id, "agent", a.positions[k]);
  }
}

void save_scenes(const std::filesystem::path& path, std::span<const TrajectoryScene> scenes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_scenes(out, scenes);
  if (!out) throw IoError("write failed for " + path.string());
}

void write_masks(std::ostream& out, std::span<const TrajectoryScene> scenes, std::span<const ObservationMask> masks) {
  if (scenes.size() != masks.size()) throw InputError("scene and mask counts differ");
  out << "scene_id,agent_id,frame,observed\n";
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    const TrajectoryScene& scene = scenes[s];
    if (masks[s].flags.size() != scene.node_count()) throw InputError("mask does not match scene " + scene.scene_id);
    for (std::size_t a = 0; a < scene.node_count(); ++a)
      for (std::size_t k = 0; k < masks[s].flags[a].size(); ++k)
        out << scene.scene_id << ',' << scene.agent(a).agent_id << ',' << scene.start_frame + static_cast<std::int64_t>(k)
            << ',' << (masks[s].flags[a][k] ? 1 : 0) << '\n';
  }
}

void save_masks(const std::filesystem::path& path, std::span<const TrajectoryScene> scenes,
                std::span<const ObservationMask> masks) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_masks(out, scenes, masks);
}

// ---------------------------------------------------------------------------
// Windowing and missing data

std::vector<TrajectoryScene> segment(std::span<const TrajectoryScene> stream, int t_h, int t_f, int stride) {
  if (t_h < 0 || t_f < 0 || stride < 1) throw ConfigError("segment requires t_h >= 0, t_f >= 0, stride >= 1");
  const std::size_t history = static_cast<std::size_t>(t_h) + 1;
  const std::size_t window = history + static_cast<std::size_t>(t_f);
  std::vector<TrajectoryScene> out;
  for (const TrajectoryScene& track : stream) {
    const std::size_t length = track.history_length() + track.target_future.size();
    for (std::size_t start = 0; start + window <= length; start += static_cast<std::size_t>(stride)) {
      const auto target_at = [&](std::size_t k) -> const Point& {
        return k < track.history_length() ? track.target.positions[k]
                                          : track.target_future[k - track.history_length()];
      };
      TrajectoryScene w;
      w.scene_id = track.scene_id + "@" + std::to_string(track.start_frame + static_cast<std::int64_t>(start));
      w.sample_rate_hz = track.sample_rate_hz;
      w.start_frame = track.start_frame + static_cast<std::int64_t>(start);
      w.target.agent_id = track.target.agent_id;
      for (std::size_t k = 0; k < history; ++k) {
        w.target.positions.push_back(target_at(start + k));
        w.target.observed.push_back(start + k < track.history_length() ? bool(track.target.observed[start + k]) : true);
      }
      for (std::size_t k = history; k < window; ++k) w.target_future.push_back(target_at(start + k));
      for (const AgentHistory& a : track.agents) {
        AgentHistory h;
        h.agent_id = a.agent_id;
        for (std::size_t k = 0; k < history; ++k) {
          const std::size_t src = start + k;
          const bool ok = src < a.frame_count() && a.observed[src];
          h.positions.push_back(ok ? a.positions[src] : Point::Zero());
          h.observed.push_back(ok);
        }
        if (h.observed_count() >= 2) w.agents.push_back(std::move(h));
      }
      out.push_back(std::move(w));
    }
  }
  return out;
}

std::pair<TrajectoryScene, ObservationMask> drop_frames(const TrajectoryScene& scene, int k, std::uint64_t seed,
                                                        bool include_agents) {
  const std::size_t frames = scene.history_length();
  const int t_h = static_cast<int>(frames) - 1;
  if (k < 0 || k > std::max(t_h - 1, 0))
    throw BoundsError("drop count " + std::to_string(k) + " outside [0, " + std::to_string(std::max(t_h - 1, 0)) +
                      "] for t_h = " + std::to_string(t_h));
  TrajectoryScene out = scene;
  std::mt19937_64 rng(seed);
  const double nan = std::numeric_limits<double>::quiet_NaN();

  const auto drop_from = [&](AgentHistory& h, std::vector<std::size_t> candidates, std::size_t count) {
    count = std::min(count, candidates.size());
    // Partial Fisher-Yates: the first `count` slots become a uniform sample.
    for (std::size_t i = 0; i < count; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, candidates.size() - 1);
      std::swap(candidates[i], candidates[pick(rng)]);
      h.observed[candidates[i]] = false;
      h.positions[candidates[i]] = Point(nan, nan);
    }
  };

  std::vector<std::size_t> interior;
  for (std::size_t f = 1; f + 1 < frames; ++f) interior.push_back(f);
  drop_from(out.target, interior, static_cast<std::size_t>(k));

  if (include_agents) {
    for (AgentHistory& a : out.agents) {
      const auto first = std::find(a.observed.begin(), a.observed.end(), true);
      const auto last = std::find(a.observed.rbegin(), a.observed.rend(), true);
      std::vector<std::size_t> candidates;
      if (first != a.observed.end()) {
        const auto lo = static_cast<std::size_t>(first - a.observed.begin());
        const auto hi = frames - 1 - static_cast<std::size_t>(last - a.observed.rbegin());
        for (std::size_t f = lo + 1; f < hi; ++f)
          if (a.observed[f]) candidates.push_back(f);
      }
      drop_from(a, candidates, static_cast<std::size_t>(k));
    }
  }
  ObservationMask mask = observation_mask(out);
  return {std::move(out), std::move(mask)};
}

TrajectoryScene impute_linear(const TrajectoryScene& scene, const ObservationMask& mask) {
  if (mask.flags.size() != scene.node_count()) throw InputError("mask does not match scene " + scene.scene_id);
  const auto& target = mask.target();
  if (target.empty() || !target.front() || !target.back())
    throw InputError("scene " + scene.scene_id + ": first and last target frames must be observed");
  TrajectoryScene out = scene;
  for (std::size_t a = 0; a < scene.node_count(); ++a) {
    AgentHistory& h = out.agent(a);
    const std::vector<bool>& obs = mask.flags[a];
    if (obs.size() != h.frame_count()) throw InputError("mask length differs from history in scene " + scene.scene_id);
    std::optional<std::size_t> previous;
    for (std::size_t f = 0; f < obs.size(); ++f) {
      if (!obs[f]) continue;
      if (previous && f > *previous + 1) {
        const std::size_t lo = *previous, hi = f;
        const double span = static_cast<double>(hi - lo);
        for (std::size_t m = lo + 1; m < hi; ++m) {
          const double w_hi = static_cast<double>(m - lo), w_lo = static_cast<double>(hi - m);
          h.positions[m] = (scene.agent(a).positions[lo] * w_lo + scene.agent(a).positions[hi] * w_hi) / span;
          h.observed[m] = true;
        }
      }
      h.positions[f] = scene.agent(a).positions[f];
      h.observed[f] = true;
      previous = f;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic scenarios

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t stable_hash(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

ScenarioKind parse_scenario_kind(std::string_view name) {
  if (name == "constant_velocity") return ScenarioKind::constant_velocity;
  if (name == "lane_change") return ScenarioKind::lane_change;
  if (name == "car_follow") return ScenarioKind::car_follow;
  if (name == "merge") return ScenarioKind::merge;
  throw ConfigError("unknown scenario kind '" + std::string(name) + "'");
}

std::string_view to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::constant_velocity: return "constant_velocity";
    case ScenarioKind::lane_change: return "lane_change";
    case ScenarioKind::car_follow: return "car_follow";
    case ScenarioKind::merge: return "merge";
  }
  return "unknown";
}

namespace {

constexpr double kLaneWidth = 3.5;

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct TrackBuilder {
  int frames;
  double dt;
  std::vector<AgentHistory> tracks;

  AgentHistory& add(std::string id) {
    AgentHistory h;
    h.agent_id = std::move(id);
    h.positions.assign(static_cast<std::size_t>(frames), Point::Zero());
    h.observed.assign(static_cast<std::size_t>(frames), true);
    tracks.push_back(std::move(h));
    return tracks.back();
  }
};

/// Surrounding traffic on the three lanes around the target, constant
/// velocity, kept at least 8 m longitudinally from the target's start.
void add_background(TrackBuilder& b, std::mt19937_64& rng, int count, double target_speed, int first_id) {
  std::uniform_int_distribution<int> lane(-1, 1);
  std::uniform_real_distribution<double> offset(8.0, 25.0), speed_delta(-2.0, 2.0), sign(0.0, 1.0);
  for (int i = 0; i < count; ++i) {
    AgentHistory& h = b.add("a" + std::to_string(first_id + i));
    const double y = kLaneWidth * lane(rng);
    const double x0 = offset(rng) * (sign(rng) < 0.5 ? -1.0 : 1.0);
    const double v = target_speed + speed_delta(rng);
    for (int k = 0; k < b.frames; ++k) h.positions[static_cast<std::size_t>(k)] = Point(x0 + v * k * b.dt, y);
  }
}

TrajectoryScene make_scene(ScenarioKind kind, const SyntheticSpec& spec, std::uint64_t seed, std::string id) {
  std::mt19937_64 rng(seed);
  TrackBuilder b{spec.frames, 1.0 / spec.sample_rate_hz, {}};
  b.tracks.reserve(static_cast<std::size_t>(spec.neighbors) + 2);
  const double duration = (spec.frames - 1) * b.dt;
  std::uniform_real_distribution<double> speed_dist(9.0, 13.0);
  b.add("target");
  AgentHistory& target = b.tracks.front();
  const auto at = [](AgentHistory& h, int k) -> Point& { return h.positions[static_cast<std::size_t>(k)]; };

  switch (kind) {
    case ScenarioKind::constant_velocity: {
      Point v = spec.velocity ? *spec.velocity : Point(speed_dist(rng), std::uniform_real_distribution<double>(-0.2, 0.2)(rng));
      for (int k = 0; k < spec.frames; ++k) at(target, k) = v * (k * b.dt);
      add_background(b, rng, spec.neighbors, v.x(), 1);
      break;
    }
    case ScenarioKind::lane_change: {
      const double v = spec.velocity ? spec.velocity->x() : speed_dist(rng);
      const double t_c = std::uniform_real_distribution<double>(0.25, 0.45)(rng) * duration;
      constexpr double tau = 0.3;
      for (int k = 0; k < spec.frames; ++k) {
        const double t = k * b.dt;
        at(target, k) = Point(v * t, spec.lateral_amplitude * logistic((t - t_c) / tau));
      }
      add_background(b, rng, spec.neighbors, v, 1);
      break;
    }
    case ScenarioKind::car_follow: {
      // Leader with a sinusoidal speed profile; the target follows it under
      // the intelligent driver model.
      const double v0 = spec.velocity ? spec.velocity->x() : speed_dist(rng);
      const double amp = std::uniform_real_distribution<double>(1.0, 3.0)(rng);
      const double omega = std::uniform_real_distribution<double>(0.8, 1.6)(rng);
      const double phase = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
      double gap = std::uniform_real_distribution<double>(12.0, 25.0)(rng);
      AgentHistory& leader = b.add("a1");
      constexpr double a_max = 1.5, b_comf = 2.0, s0 = 2.0, headway = 1.2;
      const double v_des = v0 + 2.0;
      double xl = gap, xf = 0.0, vf = v0;
      for (int k = 0; k < spec.frames; ++k) {
        const double t = k * b.dt;
        const double vl = v0 + amp * std::sin(omega * t + phase);
        at(leader, k) = Point(xl, 0.0);
        at(target, k) = Point(xf, 0.0);
        const double s = std::max(xl - xf, 0.5);
        const double s_star = s0 + vf * headway + vf * (vf - vl) / (2.0 * std::sqrt(a_max * b_comf));
        const double acc = a_max * (1.0 - std::pow(vf / v_des, 4) - std::pow(std::max(s_star, 0.0) / s, 2));
        xl += vl * b.dt;
        xf += vf * b.dt;
        vf = std::max(vf + acc * b.dt, 0.0);
      }
      add_background(b, rng, std::max(spec.neighbors - 1, 0), v0, 2);
      break;
    }
    case ScenarioKind::merge: {
      // Target on the ramp lane moves into the main lane while adapting its
      // speed to the mainline flow.
      const double v_main = spec.velocity ? spec.velocity->x() : speed_dist(rng);
      const double v_ramp = v_main - std::uniform_real_distribution<double>(1.0, 3.0)(rng);
      const double t_c = std::uniform_real_distribution<double>(0.3, 0.55)(rng) * duration;
      constexpr double tau = 0.35, relax = 1.5;
      double x = 0.0;
      for (int k = 0; k < spec.frames; ++k) {
        const double t = k * b.dt;
        const double v = v_main + (v_ramp - v_main) * std::exp(-t / relax);
        at(target, k) = Point(x, -kLaneWidth + kLaneWidth * logistic((t - t_c) / tau));
        x += v * b.dt;
      }
      std::uniform_real_distribution<double> spacing(14.0, 24.0);
      double x_lead = std::uniform_real_distribution<double>(6.0, 12.0)(rng);
      for (int i = 0; i < spec.neighbors; ++i) {
        AgentHistory& h = b.add("a" + std::to_string(i + 1));
        const double x0 = (i % 2 == 0) ? x_lead : -x_lead;
        if (i % 2 == 1) x_lead += spacing(rng);
        for (int k = 0; k < spec.frames; ++k) at(h, k) = Point(x0 + v_main * k * b.dt, 0.0);
      }
      break;
    }
  }

  if (spec.noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    for (AgentHistory& h : b.tracks)
      for (Point& p : h.positions) p += Point(noise(rng), noise(rng));
  }

  TrajectoryScene scene;
  scene.scene_id = std::move(id);
  scene.sample_rate_hz = spec.sample_rate_hz;
  scene.start_frame = 0;
  scene.target = std::move(b.tracks.front());
  for (std::size_t i = 1; i < b.tracks.size(); ++i) scene.agents.push_back(std::move(b.tracks[i]));
  return scene;
}

}  // namespace

std::vector<TrajectoryScene> generate_synthetic(const SyntheticSpec& spec) {
  if (spec.kinds.empty()) throw ConfigError("no scenario kind given");
  if (spec.scenes < 0 || spec.frames < 2 || !(spec.sample_rate_hz > 0.0) || spec.neighbors < 0 ||
      spec.noise_sigma < 0.0)
    throw ConfigError("invalid synthetic scenario parameters");
  std::vector<TrajectoryScene> scenes;
  scenes.reserve(static_cast<std::size_t>(spec.scenes));
  for (int s = 0; s < spec.scenes; ++s) {
    const ScenarioKind kind = spec.kinds[static_cast<std::size_t>(s) % spec.kinds.size()];
    char suffix[16];
    std::snprintf(suffix, sizeof suffix, "_%04d", s);
    std::string prefix = spec.id_prefix.empty() ? std::string(to_string(kind)) : spec.id_prefix;
    scenes.push_back(make_scene(kind, spec, mix_seed(spec.seed, static_cast<std::uint64_t>(s)), prefix + suffix));
  }
  return scenes;
}

}  // namespace mftraj
