#include "mftraj/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include "mftraj/behavior.hpp"
#include "mftraj/error.hpp"
#include "mftraj/evaluation.hpp"
#include "mftraj/proximity_graph.hpp"

namespace mftraj {

namespace {

namespace fs = std::filesystem;

using Entries = std::vector<std::pair<std::string, std::string>>;

// Stream ids for deriving the generated split seeds from the root seed.
constexpr std::uint64_t kTrainStream = 0x747261696e;
constexpr std::uint64_t kValStream = 0x76616c;
constexpr std::uint64_t kTestStream = 0x74657374;

std::string default_out(const std::string& command) {
  if (command == "generate") return "scenes";
  if (command == "train") return "train_loss.csv";
  if (command == "eval") return "eval_report.csv";
  if (command == "predict") return "predictions.csv";
  if (command == "ablate") return "ablation.csv";
  if (command == "robustness") return "robustness.csv";
  return "inspect";
}

Entries run_defaults(const std::string& command) {
  return {{"data", ""},
          {"val_data", ""},
          {"train_data", ""},
          {"out", default_out(command)},
          {"checkpoint", "mftraj.ckpt"},
          {"kind", "lane_change"},
          {"scenes", "32"},
          {"val_scenes", "auto"},
          {"test_scenes", "auto"},
          {"frames", "50"},
          {"stride", "10"},
          {"neighbors", "3"},
          {"noise_sigma", "0.05"},
          {"epochs", "10"},
          {"workers", "1"},
          {"drops", command == "robustness" ? "0,3,5,8,10" : "0"},
          {"drop_seeds", "0,1,2"},
          {"retrain", "false"},
          {"include_agents", "false"},
          {"variant", "F"},
          {"scene_index", "0"},
          {"log", std::string(to_string(log_level_from_env()))}};
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in{std::string(text)};
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw ConfigError("empty item in list '" + std::string(text) + "'");
    out.push_back(item.substr(b, e - b + 1));
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

int as_int(const std::string& key, const std::string& text, int lo) {
  const long long v = parse_integer(key, text);
  if (v < lo || v > std::numeric_limits<int>::max())
    throw ConfigError(key + " must be an integer >= " + std::to_string(lo) + ", got " + text);
  return static_cast<int>(v);
}

AblationModel parse_variant(const std::string& text) {
  if (text.size() != 1 || text[0] < 'A' || text[0] > 'F') throw ConfigError("variant must be one of A..F, got '" + text + "'");
  return static_cast<AblationModel>(text[0] - 'A');
}

/// Replaces the model keys of `effective` with the values of `rc.model`,
/// marking every key whose value changed with `origin`.
void sync_model_keys(RunConfig& rc, const std::string& origin) {
  for (const KeyValueConfig kv = rc.model.to_key_values(); const auto& [key, value] : kv.entries()) {
    if (rc.effective.get(key) != value) rc.origin[key] = origin;
    rc.effective.set(key, value);
  }
}

void parse_run_keys(RunConfig& rc) {
  const auto get = [&](const std::string& key) { return *rc.effective.get(key); };
  rc.data = get("data");
  rc.val_data = get("val_data");
  rc.train_data = get("train_data");
  rc.out = get("out");
  rc.checkpoint = get("checkpoint");
  rc.kinds.clear();
  for (const auto& k : split_list(get("kind"))) {
    try {
      rc.kinds.push_back(parse_scenario_kind(k));
    } catch (const Error& e) {
      throw ConfigError(std::string("kind: ") + e.what());
    }
  }
  rc.scenes = as_int("scenes", get("scenes"), 0);
  rc.val_scenes = as_int("val_scenes", get("val_scenes"), 0);
  rc.test_scenes = as_int("test_scenes", get("test_scenes"), 0);
  rc.frames = as_int("frames", get("frames"), 1);
  rc.stride = as_int("stride", get("stride"), 1);
  rc.neighbors = as_int("neighbors", get("neighbors"), 0);
  rc.noise_sigma = parse_double("noise_sigma", get("noise_sigma"));
  if (!(rc.noise_sigma >= 0)) throw ConfigError("noise_sigma must be non-negative");
  rc.epochs = as_int("epochs", get("epochs"), 0);
  rc.workers = as_int("workers", get("workers"), 1);
  rc.drops.clear();
  for (const auto& d : split_list(get("drops"))) rc.drops.push_back(as_int("drops", d, 0));
  rc.drop_seeds.clear();
  for (const auto& s : split_list(get("drop_seeds")))
    rc.drop_seeds.push_back(static_cast<std::uint64_t>(as_int("drop_seeds", s, 0)));
  rc.retrain = parse_bool("retrain", get("retrain"));
  rc.include_agents = parse_bool("include_agents", get("include_agents"));
  rc.variant = parse_variant(get("variant"));
  rc.scene_index = as_int("scene_index", get("scene_index"), 0);
  rc.log = parse_log_level(get("log"));
}

/// defaults < config file < flags
RunConfig resolve(const std::string& command, const std::string& config_path, const Entries& flags) {
  RunConfig rc;
  rc.command = command;
  std::set<std::string> model_keys;
  for (const KeyValueConfig defaults = ModelConfig{}.to_key_values(); const auto& [k, v] : defaults.entries()) {
    rc.effective.set(k, v);
    rc.origin[k] = "default";
    model_keys.insert(k);
  }
  for (const auto& [k, v] : run_defaults(command)) {
    rc.effective.set(k, v);
    rc.origin[k] = "default";
  }
  const auto known = [&](const std::string& key) { return rc.origin.contains(key); };

  if (!config_path.empty()) {
    if (!fs::exists(config_path)) throw ConfigError("config file not found: " + config_path);
    for (const KeyValueConfig file = KeyValueConfig::load(config_path); const auto& [k, v] : file.entries()) {
      if (!known(k)) throw ConfigError("unknown key '" + k + "' in " + config_path);
      rc.effective.set(k, v);
      rc.origin[k] = "file";
    }
  }
  for (const auto& [k, v] : flags) {
    if (!known(k)) throw ConfigError("unknown key '" + k + "'");
    if (rc.origin[k] == "file") rc.overridden[k] = *rc.effective.get(k);
    rc.effective.set(k, v);
    rc.origin[k] = "flag";
  }

  const int scenes = as_int("scenes", *rc.effective.get("scenes"), 0);
  for (const char* key : {"val_scenes", "test_scenes"})
    if (rc.effective.get(key) == "auto") rc.effective.set(key, std::to_string(scenes / 4));

  KeyValueConfig model_kv;
  for (const auto& [k, v] : rc.effective.entries())
    if (model_keys.contains(k)) model_kv.set(k, v);
  rc.model = ModelConfig::from_key_values(model_kv);
  parse_run_keys(rc);
  rc.model = ablation_config(rc.model, rc.variant);
  sync_model_keys(rc, "variant");
  rc.model.validate();
  return rc;
}

void echo_config(const RunConfig& rc, const std::string& config_path, std::ostream& out) {
  out << "# mftraj " << rc.command << " effective configuration\n";
  out << "# config file: " << (config_path.empty() ? "none" : config_path) << '\n';
  for (const auto& [k, v] : rc.effective.entries()) {
    out << k << " = " << v;
    const std::string& origin = rc.origin.at(k);
    if (origin == "file") {
      out << "  # config file";
    } else if (origin == "flag") {
      out << "  # flag";
      if (auto it = rc.overridden.find(k); it != rc.overridden.end())
        out << ", overrides config file value '" << it->second << "'";
    } else if (origin != "default") {
      out << "  # " << origin;
    }
    out << '\n';
  }
  out << std::flush;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream file(path, std::ios::trunc);
  if (!file) throw IoError("cannot write " + path.string());
  return file;
}

void write_sidecar(const RunConfig& rc, const fs::path& artifact) {
  fs::path sidecar = artifact;
  sidecar += ".config";
  auto file = open_output(sidecar);
  file << rc.effective.to_text();
  if (!file) throw IoError("failed writing " + sidecar.string());
}

std::vector<TrajectoryScene> load_windows(const std::string& path, const std::string& key, const RunConfig& rc,
                                          const ModelConfig& model) {
  if (path.empty()) throw ConfigError(rc.command + " needs a scene file (" + key + ")");
  if (!fs::exists(path)) throw ConfigError(key + " file not found: " + path);
  CsvSchema schema;
  schema.sample_rate_hz = model.sample_rate_hz;
  const auto scenes = load_scenes(path, schema);
  auto windows = segment(scenes, model.t_h, model.t_f, rc.stride);
  if (windows.empty() && !scenes.empty())
    throw ConfigError("no track in " + path + " spans t_h + 1 + t_f = " + std::to_string(model.t_h + 1 + model.t_f) +
                      " frames");
  log_info("loaded " + std::to_string(windows.size()) + " windows from " + path);
  return windows;
}

Checkpoint load_checkpoint(const RunConfig& rc) {
  if (rc.checkpoint.empty()) throw ConfigError(rc.command + " needs --checkpoint");
  if (!fs::exists(rc.checkpoint)) throw ConfigError("checkpoint not found: " + rc.checkpoint);
  return Checkpoint::load(rc.checkpoint);
}

/// Model settings come from the checkpoint; explicitly requested horizons
/// that disagree with it are rejected.
void adopt_checkpoint(RunConfig& rc, const Checkpoint& ck) {
  const KeyValueConfig stored = ck.config.to_key_values();
  for (const char* key : {"t_h", "t_f", "sample_rate_hz"}) {
    if (rc.origin.at(key) == "default") continue;
    if (parse_double(key, *rc.effective.get(key)) != parse_double(key, *stored.get(key)))
      throw ConfigError(std::string(key) + " = " + *rc.effective.get(key) + " does not match the checkpoint's " +
                        *stored.get(key));
  }
  const std::uint64_t seed = rc.model.seed;
  rc.model = ck.config;
  rc.model.seed = seed;
  sync_model_keys(rc, "checkpoint");
}

void print_report(const MetricReport& r, std::ostream& out) {
  out << std::left << std::setw(10) << r.label << " minADE " << format_double(r.min_ade_m) << "  minFDE "
      << format_double(r.min_fde_m) << "  MR " << format_double(r.miss_rate) << "  scenes " << r.scene_count << '\n';
}

void save_report(const fs::path& path, std::span<const MetricReport> rows) {
  auto file = open_output(path);
  write_report_csv(file, rows);
  if (!file) throw IoError("failed writing " + path.string());
}

void check_drops(const RunConfig& rc) {
  for (int k : rc.drops)
    if (k > 0 && rc.model.t_h < k + 1)
      throw ConfigError("drop count " + std::to_string(k) + " needs t_h >= " + std::to_string(k + 1) + " (t_h = " +
                        std::to_string(rc.model.t_h) + ")");
}

// ---------------------------------------------------------------------------
// Commands

void cmd_generate(RunConfig& rc, const std::string& config_path, std::ostream& out) {
  echo_config(rc, config_path, out);
  write_sidecar(rc, rc.out);
  std::string kind_name;
  for (ScenarioKind k : rc.kinds) kind_name += (kind_name.empty() ? "" : "+") + std::string(to_string(k));
  const struct {
    const char* name;
    int count;
    std::uint64_t stream;
  } splits[] = {{"train", rc.scenes, kTrainStream}, {"val", rc.val_scenes, kValStream}, {"test", rc.test_scenes, kTestStream}};
  for (const auto& split : splits) {
    std::vector<TrajectoryScene> scenes;
    if (split.count > 0) {
      SyntheticSpec spec;
      spec.kinds = rc.kinds;
      spec.scenes = split.count;
      spec.frames = rc.frames;
      spec.sample_rate_hz = rc.model.sample_rate_hz;
      spec.noise_sigma = rc.noise_sigma;
      spec.seed = mix_seed(rc.model.seed, split.stream);
      spec.neighbors = rc.neighbors;
      spec.id_prefix = kind_name + "_" + split.name;
      scenes = generate_synthetic(spec);
    }
    const std::string path = rc.out + "_" + split.name + ".csv";
    save_scenes(path, scenes);
    out << "wrote " << scenes.size() << " scenes to " << path << '\n';
  }
}

void cmd_train(RunConfig& rc, const std::string& config_path, std::ostream& out) {
  echo_config(rc, config_path, out);
  write_sidecar(rc, rc.checkpoint);
  const auto train_set = load_windows(rc.data, "data", rc, rc.model);
  const auto val_set =
      rc.val_data.empty() ? std::vector<TrajectoryScene>{} : load_windows(rc.val_data, "val_data", rc, rc.model);
  if (train_set.empty()) throw InputError("training set " + rc.data + " is empty");
  out << "parameters: " << parameter_count(rc.model) << '\n' << std::flush;

  TrainOptions options;
  options.epochs = rc.epochs;
  options.workers = rc.workers;
  const int every = std::max(1, rc.epochs / 20);
  options.on_epoch = [&](const EpochRecord& r) {
    std::string line = "epoch " + std::to_string(r.epoch) + " train_loss " + format_double(r.train_loss);
    if (!std::isnan(r.val_loss)) line += " val_loss " + format_double(r.val_loss);
    line += " lr " + format_double(r.learning_rate);
    if (r.epoch % every == 0 || r.epoch + 1 == rc.epochs)
      log_info(line);
    else
      log_debug(line);
  };
  const TrainResult result = train(train_set, val_set, rc.model, options);
  result.checkpoint.save(rc.checkpoint);
  auto curve = open_output(rc.out);
  write_loss_curve(curve, result.curve);
  if (!curve) throw IoError("failed writing " + rc.out);

  if (!result.curve.empty()) {
    const EpochRecord& last = result.curve.back();
    out << "final train_loss " << format_double(last.train_loss);
    if (!std::isnan(last.val_loss)) out << " val_loss " << format_double(last.val_loss);
    out << '\n';
  }
  out << "checkpoint written to " << rc.checkpoint << "\nloss curve written to " << rc.out << '\n';
}

void cmd_eval(RunConfig& rc, const std::string& config_path, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(rc);
  adopt_checkpoint(rc, ck);
  check_drops(rc);
  echo_config(rc, config_path, out);
  write_sidecar(rc, rc.out);
  const auto scenes = load_windows(rc.data, "data", rc, ck.config);
  std::vector<MetricReport> rows;
  if (rc.drops == std::vector<int>{0}) {
    rows.push_back(score(predict(ck, scenes, std::nullopt, rc.workers), scenes, ck.config.sample_rate_hz, "eval"));
  } else {
    SweepOptions sweep;
    sweep.drops = rc.drops;
    sweep.seeds = rc.drop_seeds;
    sweep.include_agents = rc.include_agents;
    sweep.workers = rc.workers;
    rows = robustness_sweep(ck, scenes, sweep);
  }
  for (const auto& r : rows) print_report(r, out);
  out << "loss " << format_double(evaluate_loss(ck, scenes, rc.workers)) << '\n';
  save_report(rc.out, rows);
  out << "report written to " << rc.out << '\n';
}

void cmd_predict(RunConfig& rc, const std::string& config_path, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(rc);
  adopt_checkpoint(rc, ck);
  if (rc.drops.size() != 1) throw ConfigError("predict takes a single drop count");
  check_drops(rc);
  echo_config(rc, config_path, out);
  write_sidecar(rc, rc.out);
  const auto scenes = load_windows(rc.data, "data", rc, ck.config);
  std::optional<DropSpec> drop;
  if (rc.drops.front() > 0) drop = DropSpec{rc.drops.front(), rc.drop_seeds.front(), rc.include_agents};
  const auto preds = predict(ck, scenes, drop, rc.workers);
  auto file = open_output(rc.out);
  write_predictions(file, preds);
  if (!file) throw IoError("failed writing " + rc.out);
  out << "wrote " << preds.size() << " predictions to " << rc.out << '\n';
}

void cmd_ablate(RunConfig& rc, const std::string& config_path, std::ostream& out) {
  echo_config(rc, config_path, out);
  write_sidecar(rc, rc.out);
  const auto dataset = load_windows(rc.data, "data", rc, rc.model);
  AblationOptions options;
  options.epochs = rc.epochs;
  options.workers = rc.workers;
  const auto rows = ablation_matrix(dataset, rc.model, options);
  for (const auto& r : rows) print_report(r, out);
  save_report(rc.out, rows);
  out << "report written to " << rc.out << '\n';
}

void cmd_robustness(RunConfig& rc, const std::string& config_path, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(rc);
  adopt_checkpoint(rc, ck);
  check_drops(rc);
  if (rc.retrain && rc.train_data.empty()) throw ConfigError("--retrain needs --train-data");
  echo_config(rc, config_path, out);
  write_sidecar(rc, rc.out);
  const auto scenes = load_windows(rc.data, "data", rc, ck.config);
  SweepOptions sweep;
  sweep.drops = rc.drops;
  sweep.seeds = rc.drop_seeds;
  sweep.include_agents = rc.include_agents;
  sweep.workers = rc.workers;
  if (rc.retrain) {
    sweep.retrain = true;
    sweep.train_set = load_windows(rc.train_data, "train_data", rc, ck.config);
    sweep.epochs = rc.epochs;
  }
  const auto rows = robustness_sweep(ck, scenes, sweep);
  for (const auto& r : rows) print_report(r, out);
  save_report(rc.out, rows);
  out << "report written to " << rc.out << '\n';
}

void cmd_inspect(RunConfig& rc, const std::string& config_path, std::ostream& out) {
  echo_config(rc, config_path, out);
  write_sidecar(rc, rc.out);
  if (rc.data.empty()) throw ConfigError("inspect needs a scene file (data)");
  if (!fs::exists(rc.data)) throw ConfigError("data file not found: " + rc.data);
  CsvSchema schema;
  schema.sample_rate_hz = rc.model.sample_rate_hz;
  const auto scenes = load_scenes(rc.data, schema);
  if (static_cast<std::size_t>(rc.scene_index) >= scenes.size())
    throw ConfigError("scene_index " + std::to_string(rc.scene_index) + " is out of range (" +
                      std::to_string(scenes.size()) + " scenes)");
  const TrajectoryScene& scene = scenes[static_cast<std::size_t>(rc.scene_index)];
  const std::string features = rc.out + "_features.csv", adjacency = rc.out + "_adjacency.csv";
  {
    auto file = open_output(features);
    write_behavior_csv(file, behavior_tensor(scene, rc.model.radius_m, rc.model.centrality()));
  }
  {
    auto file = open_output(adjacency);
    write_adjacency_csv(file, graph_series(scene, rc.model.radius_m));
  }
  out << "scene " << scene.scene_id << ": " << scene.node_count() << " nodes, " << scene.history_length()
      << " frames\nfeatures written to " << features << "\nadjacency written to " << adjacency << '\n';
}

// ---------------------------------------------------------------------------
// Flag table

struct Flag {
  const char* name;
  const char* key;  // nullptr for --config and --set
  const char* help;
  bool boolean = false;
};

const Flag kFlags[] = {
    {"--config", nullptr, "flat key = value config file"},
    {"--set", nullptr, "extra key=value override (repeatable)"},
    {"--seed", "seed", "root seed"},
    {"--workers", "workers", "worker threads"},
    {"--epochs", "epochs", "training epochs"},
    {"--lr", "learning_rate", "initial learning rate"},
    {"--batch", "batch_size", "scenes per optimizer step"},
    {"--radius", "radius_m", "proximity graph radius in meters"},
    {"--drops", "drops", "comma-separated drop counts"},
    {"--drop-seeds", "drop_seeds", "comma-separated drop seeds"},
    {"--kind", "kind", "scenario kind(s), comma-separated"},
    {"--scenes", "scenes", "number of generated training scenes"},
    {"--frames", "frames", "frames per generated track"},
    {"--out", "out", "output path (prefix for generate and inspect)"},
    {"--checkpoint", "checkpoint", "checkpoint path"},
    {"--data", "data", "scene CSV"},
    {"--val", "val_data", "validation scene CSV"},
    {"--train-data", "train_data", "training scene CSV for --retrain"},
    {"--variant", "variant", "ablation model A..F"},
    {"--scene-index", "scene_index", "scene inspected"},
    {"--precision", "precision", "f64 or f32"},
    {"--log", "log", "error, info or debug"},
    {"--retrain", "retrain", "retrain per drop count", true},
    {"--include-agents", "include_agents", "drop frames of surrounding agents too", true},
    {"--instantaneous-degree", "instantaneous_degree", "use the per-frame degree", true},
    {"--no-behavior", "disable_behavior", "drop the behavior module", true},
    {"--absolute-coords", "absolute_coords", "absolute instead of relative coordinates", true},
    {"--no-interaction", "disable_interaction", "drop the interaction module", true},
    {"--no-linformer", "disable_linformer", "drop the linear attention", true},
    {"--plain-gcn", "plain_gcn", "plain GCN over the radius adjacency", true},
};

using Command = void (*)(RunConfig&, const std::string&, std::ostream&);

struct Subcommand {
  const char* name;
  const char* help;
  Command run;
};

const Subcommand kCommands[] = {
    {"generate", "write synthetic train/val/test scene CSVs", cmd_generate},
    {"train", "train a model and write a checkpoint", cmd_train},
    {"eval", "score a checkpoint on a scene CSV", cmd_eval},
    {"predict", "write predicted trajectories", cmd_predict},
    {"ablate", "train and score the ablation models A..F", cmd_ablate},
    {"robustness", "missing-frame sweep over drop counts", cmd_robustness},
    {"inspect", "dump behavior features and adjacency of one scene", cmd_inspect},
};

}  // namespace

int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Map-free multi-agent trajectory prediction"};
  app.name(args.empty() ? "mftraj" : fs::path(args.front()).filename().string());
  app.require_subcommand(1);

  std::map<std::string, std::string> values;
  std::string config_path;
  std::vector<std::string> sets;
  struct Bound {
    CLI::App* app;
    Command run;
    std::vector<std::pair<CLI::Option*, const Flag*>> options;
  };
  std::vector<Bound> bound;
  for (const Subcommand& c : kCommands) {
    Bound b{app.add_subcommand(c.name, c.help), c.run, {}};
    for (const Flag& f : kFlags) {
      CLI::Option* opt = nullptr;
      if (f.key == nullptr)
        opt = std::string(f.name) == "--config" ? b.app->add_option(f.name, config_path, f.help)
                                                 : b.app->add_option(f.name, sets, f.help);
      else if (f.boolean)
        opt = b.app->add_flag(f.name, f.help);
      else
        opt = b.app->add_option(f.name, values[f.key], f.help);
      b.options.emplace_back(opt, &f);
    }
    bound.push_back(std::move(b));
  }

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  const Bound& chosen = *std::find_if(bound.begin(), bound.end(), [](const Bound& b) { return b.app->parsed(); });
  try {
    Entries flags;
    for (const std::string& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      std::string key = s.substr(0, eq), value = s.substr(eq + 1);
      const auto trim = [](std::string& t) {
        t.erase(0, t.find_first_not_of(" \t"));
        t.erase(t.find_last_not_of(" \t") + 1);
      };
      trim(key);
      trim(value);
      flags.emplace_back(std::move(key), std::move(value));
    }
    for (const auto& [opt, flag] : chosen.options) {
      if (flag->key == nullptr || opt->count() == 0) continue;
      flags.emplace_back(flag->key, flag->boolean ? "true" : values[flag->key]);
    }
    RunConfig rc = resolve(chosen.app->get_name(), config_path, flags);
    set_log_level(rc.log);
    chosen.run(rc, config_path, out);
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace mftraj
