#include "cli.hpp"

#include <CLI11.hpp>
#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <thread>

#include "eskin/duplex/scripted.hpp"
#include "eskin/nn/baselines.hpp"
#include "eskin/nn/checkpoint.hpp"
#include "eskin/nn/tsne.hpp"

namespace eskin::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Reads the keys of one JSON object, remembering which were consumed so the
// leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& into) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    try {
      into = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where(key) + " has the wrong type");
    }
  }

  template <typename T>
  void positive(const char* key, T& into) {
    get(key, into);
    if (!(into > T(0))) throw ConfigError(where(key) + " must be positive");
  }

  std::optional<Section> sub(const char* key) {
    used_.insert(key);
    if (!j_.contains(key)) return std::nullopt;
    return Section(j_.at(key), where(key));
  }

  const json& raw() const { return j_; }
  std::string where(const std::string& key = "") const {
    if (key.empty()) return path_.empty() ? "config" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  void done() const {
    for (const auto& [k, v] : j_.items())
      if (!used_.count(k)) throw ConfigError("unknown config key '" + where(k) + "'");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

void read_material(Section s, weighing::Material& m) {
  s.get("angle_of_repose_deg", m.angle_of_repose_deg);
  s.get("base_flow_gps", m.base_flow_gps);
  s.get("vib_gain", m.vib_gain);
  s.get("static_flow", m.static_flow);
  s.get("clump_mass_mean_g", m.clump_mass_mean_g);
  s.get("clump_rate_no_vib", m.clump_rate_no_vib);
  s.get("humidity_clump_factor", m.humidity_clump_factor);
  s.done();
}

void ensure_dir(const std::string& dir) { fs::create_directories(dir); }
std::string in_dir(const ScenarioConfig& c, const std::string& name) {
  return (fs::path(c.out) / name).string();
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  return f;
}

sensing::Dataset make_dataset(const ScenarioConfig& c) {
  sensing::DatasetConfig dc;
  dc.per_class = c.per_class;
  dc.seed = c.seed;
  dc.train_fraction = c.train_fraction;
  dc.acquisition.noise = c.noise;
  dc.acquisition.noise.rng_seed = c.seed;
  auto film = skin::MagneticFilm::uniform(c.geometry);
  auto classes = sensing::default_object_classes();
  return sensing::build_dataset(classes, dc, c.geometry, film);
}

// A dataset file holds the shuffled windows; the split follows the config.
sensing::Dataset read_dataset(const ScenarioConfig& c, const std::string& path) {
  sensing::Dataset d;
  d.windows = sensing::load_dataset(path);
  d.n_train = static_cast<std::size_t>(std::floor(c.train_fraction * static_cast<double>(d.windows.size())));
  return d;
}

json epoch_json(const nn::EpochRecord& r) {
  return {{"kind", "epoch"},           {"epoch", r.epoch},
          {"train_loss", r.train_loss}, {"train_accuracy", r.train_accuracy},
          {"test_accuracy", std::isnan(r.test_accuracy) ? json() : json(r.test_accuracy)}};
}

volatile std::sig_atomic_t g_stop = 0;
extern "C" void on_signal(int) { g_stop = 1; }

}  // namespace

weighing::Material ScenarioConfig::material(const std::string& name) const {
  if (auto it = materials.find(name); it != materials.end()) return it->second;
  return weighing::material_by_name(name);
}

ScenarioConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ScenarioConfig c;
  Section root(j, "");
  root.get("seed", c.seed);
  root.get("out", c.out);
  if (auto g = root.sub("geometry")) {
    g->get("sensor_plane_gap_mm", c.geometry.sensor_plane_gap_mm);
    g->get("film_thickness_mm", c.geometry.film_thickness_mm);
    g->get("elastomer_thickness_mm", c.geometry.elastomer_thickness_mm);
    g->get("circuit_thickness_mm", c.geometry.circuit_thickness_mm);
    g->done();
    try {
      c.geometry.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("geometry: ") + e.what());
    }
  }
  if (auto n = root.sub("noise")) {
    n->get("gaussian_sigma_uT", c.noise.gaussian_sigma_uT);
    n->get("quantization_step_uT", c.noise.quantization_step_uT);
    n->done();
    try {
      c.noise.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("noise: ") + e.what());
    }
  }
  if (auto d = root.sub("dataset")) {
    d->positive("per_class", c.per_class);
    d->positive("train_fraction", c.train_fraction);
    if (c.train_fraction >= 1.0) throw ConfigError("dataset.train_fraction must be below 1");
    d->done();
  }
  if (auto t = root.sub("train")) {
    t->positive("epochs", c.train.epochs);
    t->positive("learning_rate", c.train.learning_rate);
    t->get("momentum", c.train.momentum);
    t->positive("batch_size", c.train.batch_size);
    t->done();
  }
  if (auto t = root.sub("tsne")) {
    t->positive("points", c.tsne_points);
    t->positive("perplexity", c.perplexity);
    t->positive("iterations", c.tsne_iterations);
    t->done();
  }
  if (auto w = root.sub("weigh")) {
    w->positive("seeds", c.weigh_seeds);
    w->get("material", c.resolution_material);
    w->get("combo_materials", c.combo_materials);
    w->done();
  }
  if (auto m = root.sub("materials")) {
    for (const auto& [name, body] : m->raw().items()) {
      weighing::Material mat;
      try {
        mat = weighing::material_by_name(name);
      } catch (const std::invalid_argument&) {
        mat = weighing::Material{};
        mat.name = name;
      }
      read_material(Section(body, "materials." + name), mat);
      try {
        mat.validate();
      } catch (const std::invalid_argument& e) {
        throw ConfigError("materials." + name + ": " + e.what());
      }
      c.materials[name] = mat;
    }
  }
  if (auto i = root.sub("interference")) {
    i->get("press_force_n", c.interference.press_force_n);
    i->get("sensor", c.interference.sensor);
    i->positive("press_radius_mm", c.interference.press_radius_mm);
    i->positive("rate_hz", c.interference.rate_hz);
    i->positive("stage_ms", c.interference.stage_ms);
    i->done();
  }
  if (auto s = root.sub("serve")) {
    s->get("address", c.gateway.address);
    s->get("port", c.gateway.port);
    s->positive("telemetry_hz", c.gateway.telemetry_hz);
    s->get("duration_s", c.serve_duration_s);
    s->positive("tolerance_g", c.tolerance_g);
    s->done();
  }
  root.done();
  for (const auto& name : c.combo_materials) (void)c.material(name);
  (void)c.material(c.resolution_material);
  return c;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

namespace {

int cmd_dataset(const ScenarioConfig& c, std::ostream& out) {
  auto d = make_dataset(c);
  ensure_dir(c.out);
  auto path = in_dir(c, "dataset.eskd");
  sensing::save_dataset(path, d.windows);
  out << json{{"windows", d.windows.size()}, {"train", d.n_train},
              {"test", d.windows.size() - d.n_train}, {"channels", sensing::kChannels},
              {"steps", sensing::kSteps}, {"path", path}}.dump()
      << "\n";
  return kOk;
}

sensing::Dataset dataset_for(const ScenarioConfig& c, const std::string& data) {
  return data.empty() ? make_dataset(c) : read_dataset(c, data);
}

int cmd_train(const ScenarioConfig& c, const std::string& data, bool baselines, std::ostream& out) {
  auto d = dataset_for(c, data);
  ensure_dir(c.out);
  auto metrics_path = in_dir(c, "metrics.jsonl");
  auto metrics = open_out(metrics_path);
  auto cfg = c.train;
  cfg.seed = c.seed;
  auto res = nn::train(d.train(), cfg, d.test(), [&](const nn::EpochRecord& r) {
    auto line = epoch_json(r).dump();
    metrics << line << "\n";
    out << line << "\n";
  });
  auto model_path = in_dir(c, "model.eskm");
  nn::save_checkpoint(model_path, res.model);
  json fin = {{"kind", "final"},
              {"test_accuracy", nn::evaluate(res.model, d.test()).accuracy},
              {"model", model_path}};
  if (baselines) {
    fin["knn_accuracy"] = nn::knn_baseline(d.train(), d.test(), 5);
    nn::LogisticConfig lc;
    lc.seed = c.seed;
    fin["logistic_accuracy"] = nn::logistic_baseline(d.train(), d.test(), lc);
  }
  metrics << fin.dump() << "\n";
  out << fin.dump() << "\n";
  return kOk;
}

int cmd_eval(const ScenarioConfig& c, const std::string& model, const std::string& data,
             std::ostream& out) {
  auto net = nn::load_checkpoint(model.empty() ? in_dir(c, "model.eskm") : model);
  auto d = dataset_for(c, data);
  auto ev = nn::evaluate(net, d.test());
  json conf = json::array();
  for (const auto& row : ev.confusion) conf.push_back(row);
  json j = {{"accuracy", ev.accuracy}, {"total", ev.total}, {"confusion", conf}};
  ensure_dir(c.out);
  open_out(in_dir(c, "eval.json")) << j.dump() << "\n";
  out << j.dump() << "\n";
  return kOk;
}

int cmd_tsne(const ScenarioConfig& c, const std::string& model, const std::string& data,
             std::ostream& out) {
  auto net = nn::load_checkpoint(model.empty() ? in_dir(c, "model.eskm") : model);
  auto d = dataset_for(c, data);
  auto test = d.test();
  auto n = std::min(c.tsne_points, test.size());
  std::size_t dim = 0;
  auto feats = nn::embed_features(net, test.first(n), dim);
  nn::TsneConfig tc;
  tc.seed = c.seed;
  tc.perplexity = c.perplexity;
  tc.iterations = c.tsne_iterations;
  auto e = nn::tsne_embed(feats, n, dim, tc);
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = test[i].label.value_or(0);
  ensure_dir(c.out);
  auto path = in_dir(c, "embedding.csv");
  auto f = open_out(path);
  f << "x,y,label\n";
  f.precision(10);
  for (std::size_t i = 0; i < n; ++i) f << e.y[2 * i] << "," << e.y[2 * i + 1] << "," << labels[i] << "\n";
  out << json{{"points", n},
              {"kl_divergence", e.kl_divergence},
              {"silhouette", nn::silhouette_score(e.y, n, 2, labels)},
              {"path", path}}.dump()
      << "\n";
  return kOk;
}

void write_traces(std::ostream& f, const std::string& family, std::uint64_t seed,
                  const weighing::WeighTrace& t) {
  for (std::size_t i = 0; i < t.masses.size(); ++i)
    f << family << "," << seed << "," << static_cast<double>(i) * t.dt << "," << t.masses[i] << "\n";
}

int cmd_weigh(const ScenarioConfig& c, std::ostream& out) {
  ensure_dir(c.out);
  auto traces = open_out(in_dir(c, "weigh_traces.csv"));
  traces.precision(9);
  traces << "family,seed,t,mass\n";
  auto combos = open_out(in_dir(c, "weigh_combos.jsonl"));

  weighing::ResolutionConfig rc;
  rc.seed = c.seed;
  auto res = weighing::resolution_experiment(c.material(c.resolution_material), c.weigh_seeds, rc);
  for (std::size_t i = 0; i < res.still.size(); ++i) {
    write_traces(traces, "still", i, res.still[i]);
    write_traces(traces, "vibrated", i, res.vibrated[i]);
  }
  json report = {{"resolution",
                  {{"material", c.resolution_material},
                   {"seeds", c.weigh_seeds},
                   {"eps_still_g", res.mean_eps_still()},
                   {"eps_vibrated_g", res.mean_eps_vibrated()},
                   {"ratio", res.ratio()},
                   {"smaller_max_step", res.smaller_max_step_count()}}}};

  bool trends_ok = true;
  json combo_reports = json::array();
  for (const auto& name : c.combo_materials) {
    weighing::ComboConfig cc;
    cc.seed = c.seed;
    auto fams = weighing::nine_combo_experiment(c.material(name), c.weigh_seeds, cc);
    json means = json::object();
    for (const auto& f : fams) {
      for (std::size_t i = 0; i < f.traces.size(); ++i)
        write_traces(traces, name + "-" + std::to_string(f.label), f.seeds[i], f.traces[i]);
      double m = f.mean_t50();
      means[std::to_string(f.label)] = std::isnan(m) ? json() : json(m);
    }
    std::ostringstream lines;
    weighing::write_combo_jsonl(lines, fams);
    std::istringstream in(lines.str());
    for (std::string line; std::getline(in, line);) {
      auto j = json::parse(line);
      j["material"] = name;
      combos << j.dump() << "\n";
    }
    json rep = {{"material", name}, {"mean_t50_s", means}};
    if (c.weigh_seeds >= 2) {
      auto tr = weighing::check_trends(fams);
      rep["trends_ok"] = tr.ok;
      rep["trend_failures"] = tr.failures;
      trends_ok = trends_ok && tr.ok;
    }
    combo_reports.push_back(rep);
  }
  report["combos"] = combo_reports;
  open_out(in_dir(c, "weigh_report.json")) << report.dump(2) << "\n";
  out << report.dump() << "\n";
  return kOk;
}

int cmd_interference(const ScenarioConfig& c, std::ostream& out) {
  auto film = skin::MagneticFilm::uniform(c.geometry);
  auto tr = skin::interference_experiment(c.geometry, film, skin::MotorModel{}, c.interference);
  ensure_dir(c.out);
  auto path = in_dir(c, "interference.csv");
  auto f = open_out(path);
  f.precision(9);
  f << "t_ms,stage";
  const char* axes = "xyz";
  for (std::size_t s = 0; s < skin::kSensors; ++s)
    for (int a = 0; a < 3; ++a) f << ",s" << s << axes[a];
  f << "\n";
  for (std::size_t i = 0; i < tr.t_ms.size(); ++i) {
    int stage = i >= tr.stage_start[2] ? 3 : i >= tr.stage_start[1] ? 2 : 1;
    f << tr.t_ms[i] << "," << stage;
    for (double v : tr.delta_uT[i]) f << "," << v;
    f << "\n";
  }
  out << json{{"sensor", c.interference.sensor},
              {"press_force_n", c.interference.press_force_n},
              {"stage_max_uT", tr.max_delta_uT},
              {"noise_floor_uT", tr.noise_floor_uT},
              {"ratio", tr.ratio()},
              {"rows", tr.t_ms.size()},
              {"path", path}}.dump()
      << "\n";
  return kOk;
}

duplex::Script script_from(const std::string& spec, double target_g) {
  if (spec == "happy") return duplex::happy_path_script(target_g);
  std::ifstream f(spec);
  if (!f) throw std::runtime_error("cannot read script " + spec);
  std::stringstream ss;
  ss << f.rdbuf();
  return duplex::parse_script(ss.str());
}

int cmd_serve_script(const ScenarioConfig& c, const std::string& script_path, double target_g,
                     std::size_t seeds, std::ostream& out) {
  auto script = script_from(script_path, target_g);
  duplex::RunConfig rc;
  rc.session = c.gateway.session;
  rc.session.tolerance_g = c.tolerance_g;
  rc.robot = c.gateway.robot;
  ensure_dir(c.out);
  std::size_t within = 0;
  bool clean = true;
  for (std::size_t k = 0; k < seeds; ++k) {
    rc.seed = c.seed + k;
    auto r = duplex::run_script(script, rc);
    if (k == 0) {
      auto f = open_out(in_dir(c, "serve_log.txt"));
      for (const auto& e : r.log) f << duplex::to_string(e) << "\n";
    }
    bool ok = r.within_tolerance(c.tolerance_g);
    within += ok;
    clean = clean && r.completed && !r.safe_stopped;
    out << json{{"seed", rc.seed},
                {"completed", r.completed},
                {"final_stage", static_cast<int>(r.final_stage)},
                {"target_g", r.target_g ? json(*r.target_g) : json()},
                {"final_mass_g", r.final_mass_g},
                {"within_tolerance", ok},
                {"collisions", r.collisions_in_active_stage},
                {"cues", r.cues_received},
                {"nacks", r.nacks},
                {"safe_stopped", r.safe_stopped},
                {"replay_matches", r.replay_matches}}.dump()
        << "\n";
  }
  out << json{{"runs", seeds}, {"within_tolerance", within}}.dump() << "\n";
  return clean ? kOk : kRuntime;
}

int cmd_serve_live(const ScenarioConfig& c, std::ostream& out) {
  duplex::WsGateway gw(c.gateway);
  auto port = gw.start();
  out << json{{"listening", c.gateway.address}, {"port", port}}.dump() << std::endl;
  g_stop = 0;
  auto prev_int = std::signal(SIGINT, on_signal);
  auto prev_term = std::signal(SIGTERM, on_signal);
  auto until = std::chrono::steady_clock::now() + std::chrono::duration<double>(c.serve_duration_s);
  while (!g_stop && (c.serve_duration_s <= 0.0 || std::chrono::steady_clock::now() < until))
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  gw.stop();
  std::signal(SIGINT, prev_int);
  std::signal(SIGTERM, prev_term);
  auto s = gw.stats();
  out << json{{"connections", s.connections}, {"frames_in", s.frames_in},
              {"frames_out", s.frames_out}, {"safe_stops", s.safe_stops}}.dump()
      << "\n";
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Magnetic e-skin simulation toolkit", "eskin"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  std::string config_path;
  std::string out_dir;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "RNG seed");
    sub->add_option("--config", config_path, "JSON scenario config")->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory");
  };

  std::size_t per_class = 0;
  auto* dataset = app.add_subcommand("dataset", "generate the synthetic tactile dataset");
  add_common(dataset);
  dataset->add_option("--per-class", per_class, "windows per class")->check(CLI::PositiveNumber);

  std::string data;
  std::string model;
  std::size_t epochs = 0;
  bool baselines = false;
  auto* train = app.add_subcommand("train", "train the CNN, write model.eskm and metrics.jsonl");
  add_common(train);
  train->add_option("--data", data, "dataset file (default: generate)");
  train->add_option("--epochs", epochs)->check(CLI::PositiveNumber);
  train->add_flag("--baselines", baselines, "also report kNN and logistic accuracy");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  add_common(eval);
  eval->add_option("--model", model, "checkpoint (default: <out>/model.eskm)");
  eval->add_option("--data", data, "dataset file (default: generate)");

  std::size_t points = 0;
  auto* tsne = app.add_subcommand("tsne", "embed penultimate features, write embedding.csv");
  add_common(tsne);
  tsne->add_option("--model", model, "checkpoint (default: <out>/model.eskm)");
  tsne->add_option("--data", data, "dataset file (default: generate)");
  tsne->add_option("--points", points, "test windows to embed")->check(CLI::PositiveNumber);

  std::size_t seeds = 0;
  auto* weigh = app.add_subcommand("weigh", "resolution and nine-combination experiments");
  add_common(weigh);
  weigh->add_option("--seeds", seeds, "trials per family")->check(CLI::PositiveNumber);

  double force = -1.0;
  auto* interf = app.add_subcommand("interference", "staged motor-interference trace");
  add_common(interf);
  interf->add_option("--force", force, "press force (N)")->check(CLI::NonNegativeNumber);

  std::string script;
  double target_g = 1.0;
  std::size_t runs = 1;
  bool print_script = false;
  std::uint16_t port = 0;
  double duration = -1.0;
  auto* serve = app.add_subcommand("serve", "robot-side simulator with WebSocket gateway or scripted runs");
  add_common(serve);
  serve->add_option("--script", script, "operator script JSON, or 'happy' for the built-in run");
  serve->add_option("--target", target_g, "target grams for the built-in script")->check(CLI::PositiveNumber);
  serve->add_option("--seeds", runs, "scripted runs with consecutive seeds")->check(CLI::PositiveNumber);
  serve->add_flag("--print-script", print_script, "print the built-in script and exit");
  serve->add_option("--port", port, "gateway port (0 = ephemeral)");
  serve->add_option("--duration", duration, "seconds to serve (0 = until interrupted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "eskin: " << e.what() << "\n" << "run 'eskin --help' for usage\n";
    return kUsage;
  }

  ScenarioConfig cfg;
  try {
    if (!config_path.empty()) cfg = load_config(config_path);
  } catch (const ConfigError& e) {
    err << "eskin: " << e.what() << "\n";
    return kUsage;
  }
  auto given = [](CLI::App* sub, const char* name) { return sub->count(name) > 0; };
  auto* sub = app.get_subcommands().front();
  if (given(sub, "--seed")) cfg.seed = seed;
  if (given(sub, "--out")) cfg.out = out_dir;

  try {
    if (sub == dataset) {
      if (per_class) cfg.per_class = per_class;
      return cmd_dataset(cfg, out);
    }
    if (sub == train) {
      if (epochs) cfg.train.epochs = epochs;
      return cmd_train(cfg, data, baselines, out);
    }
    if (sub == eval) return cmd_eval(cfg, model, data, out);
    if (sub == tsne) {
      if (points) cfg.tsne_points = points;
      return cmd_tsne(cfg, model, data, out);
    }
    if (sub == weigh) {
      if (seeds) cfg.weigh_seeds = seeds;
      return cmd_weigh(cfg, out);
    }
    if (sub == interf) {
      if (force >= 0.0) cfg.interference.press_force_n = force;
      return cmd_interference(cfg, out);
    }
    if (print_script) {
      out << duplex::script_to_json(duplex::happy_path_script(target_g)) << "\n";
      return kOk;
    }
    if (!script.empty()) return cmd_serve_script(cfg, script, target_g, runs, out);
    if (given(sub, "--port")) cfg.gateway.port = port;
    if (duration >= 0.0) cfg.serve_duration_s = duration;
    return cmd_serve_live(cfg, out);
  } catch (const std::invalid_argument& e) {
    err << "eskin: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "eskin: " << e.what() << "\n";
    return kRuntime;
  }
}

}  // namespace eskin::cli
