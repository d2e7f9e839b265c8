#include "eskin/weighing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <nlohmann/json.hpp>

#include "eskin/sensing.hpp"

namespace eskin::weighing {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double sin_deg(double deg) { return std::sin(deg * std::numbers::pi / 180.0); }

double mean_of(std::span<const double> v) {
  if (v.empty()) return kNaN;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double max_step(const WeighTrace& t) {
  double m = 0.0;
  for (std::size_t i = 1; i < t.masses.size(); ++i) m = std::max(m, t.masses[i] - t.masses[i - 1]);
  return m;
}

template <typename F>
void for_each_index(std::size_t n, Exec exec, F&& f) {
  const auto count = static_cast<std::ptrdiff_t>(n);
  if (exec == Exec::serial) {
    for (std::ptrdiff_t i = 0; i < count; ++i) f(static_cast<std::size_t>(i));
    return;
  }
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < count; ++i) f(static_cast<std::size_t>(i));
}

actuation::VibrationProgram motors_program(std::size_t motors, double duty, double horizon_s) {
  if (motors == 0) return {};
  actuation::PresetParams p;
  p.n = motors;
  p.duty = duty;
  p.duration_ms = horizon_s * 1000.0;
  return actuation::preset("n-motors", p);
}

}  // namespace

void Material::validate() const {
  if (!(angle_of_repose_deg > 0.0 && angle_of_repose_deg < 90.0))
    throw std::invalid_argument("angle of repose must be in (0, 90) degrees");
  for (double v : {base_flow_gps, vib_gain, static_flow, clump_mass_mean_g, clump_rate_no_vib,
                   humidity_clump_factor})
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("material parameters must be finite and >= 0");
}

Material flour() {
  return {"flour", 45.0, 1.0, 8.0, 0.0, 0.2, 0.35, 1.0};
}

Material sugar() {
  return {"sugar", 28.0, 2.0, 2.0, 0.2, 0.05, 0.05, 1.0};
}

Material sesame() {
  return {"sesame", 25.0, 2.5, 1.5, 0.4, 0.03, 0.02, 1.0};
}

Material material_by_name(const std::string& name) {
  if (name == "flour") return flour();
  if (name == "sugar") return sugar();
  if (name == "sesame") return sesame();
  throw std::invalid_argument("unknown material '" + name + "'");
}

std::int64_t grams_to_ug(double g) {
  if (!(g >= 0.0) || !std::isfinite(g)) throw std::invalid_argument("mass must be finite and >= 0");
  return static_cast<std::int64_t>(std::llround(g * 1e6));
}

double continuous_flow_gps(const Material& m, double tilt_deg, double vib) {
  const double excess = std::max(0.0, sin_deg(tilt_deg) - sin_deg(m.angle_of_repose_deg));
  return m.base_flow_gps * excess * (m.static_flow + m.vib_gain * vib);
}

double clump_rate(const Material& m, double tilt_deg, double vib) {
  if (tilt_deg <= m.angle_of_repose_deg) return 0.0;
  return m.clump_rate_no_vib * m.humidity_clump_factor * std::max(0.0, 1.0 - vib / kClumpCutoff);
}

StepResult step(const SpoonState& state, const Material& m, double vib, double dt, std::mt19937_64& rng) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be > 0");
  if (state.load_ug < 0) throw std::invalid_argument("negative load");
  vib = std::clamp(vib, 0.0, 1.0);
  double grams = continuous_flow_gps(m, state.tilt_deg, vib) * dt;
  const double lambda = clump_rate(m, state.tilt_deg, vib) * dt;
  if (lambda > 0.0) {
    std::poisson_distribution<int> events(lambda);
    std::uniform_real_distribution<double> size(0.5, 1.5);
    for (int k = events(rng); k > 0; --k) grams += m.clump_mass_mean_g * size(rng);
  }
  StepResult r;
  r.released_ug = std::min<std::int64_t>(state.load_ug, std::llround(grams * 1e6));
  r.state = state;
  r.state.load_ug -= r.released_ug;
  return r;
}

TiltSchedule::TiltSchedule(std::vector<std::pair<double, double>> keyframes) : keys_(std::move(keyframes)) {
  if (keys_.empty()) throw std::invalid_argument("tilt schedule needs at least one keyframe");
  for (std::size_t i = 0; i < keys_.size(); ++i) {
    if (!(keys_[i].second >= 0.0 && keys_[i].second <= 90.0))
      throw std::invalid_argument("tilt must be within [0, 90] degrees");
    if (i > 0 && !(keys_[i].first > keys_[i - 1].first))
      throw std::invalid_argument("tilt keyframes must have increasing times");
  }
}

TiltSchedule TiltSchedule::ramp_hold(double to_deg, double ramp_s) {
  if (!(ramp_s > 0.0)) return TiltSchedule({{0.0, to_deg}});
  return TiltSchedule({{0.0, 0.0}, {ramp_s, to_deg}});
}

double TiltSchedule::at(double t) const {
  if (keys_.empty()) return 0.0;
  if (t <= keys_.front().first) return keys_.front().second;
  for (std::size_t i = 1; i < keys_.size(); ++i) {
    if (t < keys_[i].first) {
      const auto [t0, a0] = keys_[i - 1];
      const auto [t1, a1] = keys_[i];
      return a0 + (a1 - a0) * (t - t0) / (t1 - t0);
    }
  }
  return keys_.back().second;
}

std::optional<double> WeighTrace::time_to_reach(double grams) const {
  for (std::size_t i = 0; i < masses.size(); ++i)
    if (masses[i] >= grams) return static_cast<double>(i) * dt;
  return std::nullopt;
}

WeighTrace run_trial(const TiltSchedule& tilt, const actuation::VibrationProgram& program,
                     const Material& m, double load_g, std::uint64_t seed, double horizon_s, double dt) {
  m.validate();
  if (!(dt > 0.0) || !(horizon_s >= 0.0)) throw std::invalid_argument("dt must be > 0 and horizon >= 0");
  const auto steps = static_cast<std::size_t>(std::llround(horizon_s / dt));
  SpoonState s{tilt.at(0.0), grams_to_ug(load_g)};
  const std::int64_t initial = s.load_ug;
  std::mt19937_64 rng(sensing::mix_seed(seed, 0xF10u));
  WeighTrace tr;
  tr.dt = dt;
  tr.masses.reserve(steps + 1);
  tr.masses.push_back(0.0);
  std::int64_t on_scale = 0;
  for (std::size_t i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) * dt;
    s.tilt_deg = tilt.at(t);
    const double vib = actuation::mean_amplitude(actuation::amplitude_at(program, t * 1000.0));
    const auto r = step(s, m, vib, dt, rng);
    on_scale += r.released_ug;
    s = r.state;
    if (on_scale + s.load_ug != initial) throw std::logic_error("mass not conserved");
    tr.masses.push_back(static_cast<double>(on_scale) * 1e-6);
  }
  return tr;
}

double epsilon(std::span<const double> masses, std::size_t a) {
  if (a < 1) throw std::invalid_argument("interval a must be >= 1");
  if (masses.size() <= a) throw std::invalid_argument("trace shorter than interval");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i + a < masses.size(); ++i) {
    const double d = std::abs(masses[i + a] - masses[i]);
    if (d != 0.0) {
      sum += d;
      ++n;
    }
  }
  if (n == 0) throw NoNonzeroDifferences();
  return sum / static_cast<double>(n);
}

void write_trace_csv(std::ostream& out, const WeighTrace& trace) {
  out << "t,mass\n";
  for (std::size_t i = 0; i < trace.masses.size(); ++i)
    out << static_cast<double>(i) * trace.dt << ',' << trace.masses[i] << '\n';
}

double ComboFamily::mean_t50() const { return mean_of(t50); }

std::vector<ComboFamily> nine_combo_experiment(const Material& m, std::size_t seed_count,
                                               const ComboConfig& cfg, Exec exec) {
  if (seed_count < 1) throw std::invalid_argument("seed_count must be >= 1");
  m.validate();
  constexpr double kAngles[3] = {30.0, 45.0, 50.0};
  constexpr std::size_t kMotorCounts[3] = {2, 4, 8};
  std::vector<ComboFamily> fam(9);
  for (std::size_t k = 0; k < 9; ++k) {
    fam[k].label = static_cast<int>(k + 1);
    fam[k].tilt_deg = kAngles[k / 3];
    fam[k].motors = kMotorCounts[k % 3];
    fam[k].seeds.resize(seed_count);
    fam[k].eps.resize(seed_count);
    fam[k].t50.resize(seed_count);
    fam[k].traces.resize(seed_count);
  }
  for_each_index(9 * seed_count, exec, [&](std::size_t idx) {
    auto& f = fam[idx / seed_count];
    const std::size_t j = idx % seed_count;
    const std::uint64_t seed = sensing::mix_seed(cfg.seed, idx);
    auto tr = run_trial(TiltSchedule::ramp_hold(f.tilt_deg, cfg.ramp_s), motors_program(f.motors, cfg.duty, cfg.horizon_s),
                        m, cfg.load_g, seed, cfg.horizon_s);
    f.seeds[j] = seed;
    try {
      f.eps[j] = epsilon(tr.masses, 1);
    } catch (const NoNonzeroDifferences&) {
      f.eps[j] = kNaN;
    }
    f.t50[j] = tr.time_to_reach(0.5 * cfg.load_g).value_or(kNaN);
    f.traces[j] = std::move(tr);
  });
  return fam;
}

TrendReport check_trends(std::span<const ComboFamily> families, std::size_t resamples, std::uint64_t seed) {
  if (families.size() != 9) throw std::invalid_argument("expected nine families");
  TrendReport rep;
  std::mt19937_64 gen(seed);
  // Expect `faster` to have a strictly smaller mean t50 than `slower`.
  auto require = [&](const ComboFamily& faster, const ComboFamily& slower) {
    const auto& a = faster.t50;
    const auto& b = slower.t50;
    const double ma = mean_of(a);
    const double mb = mean_of(b);
    std::string pair = "label " + std::to_string(faster.label) + " vs " + std::to_string(slower.label);
    if (!std::isfinite(ma) || !std::isfinite(mb)) {
      rep.ok = false;
      rep.failures.push_back(pair + ": 50% mass not reached in every trial");
      return;
    }
    if (!(ma < mb)) {
      rep.ok = false;
      rep.failures.push_back(pair + ": mean t50 not smaller");
      return;
    }
    std::vector<double> diffs(resamples);
    std::uniform_int_distribution<std::size_t> pa(0, a.size() - 1), pb(0, b.size() - 1);
    for (auto& d : diffs) {
      double sa = 0.0, sb = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) sa += a[pa(gen)];
      for (std::size_t i = 0; i < b.size(); ++i) sb += b[pb(gen)];
      d = sb / static_cast<double>(b.size()) - sa / static_cast<double>(a.size());
    }
    std::sort(diffs.begin(), diffs.end());
    const double lo = diffs[static_cast<std::size_t>(0.025 * static_cast<double>(resamples - 1))];
    if (!(lo > 0.0)) {
      rep.ok = false;
      rep.failures.push_back(pair + ": 95% bootstrap interval includes zero");
    }
  };
  for (std::size_t angle = 0; angle < 3; ++angle)
    for (std::size_t mot = 0; mot + 1 < 3; ++mot) require(families[angle * 3 + mot + 1], families[angle * 3 + mot]);
  for (std::size_t mot = 0; mot < 3; ++mot)
    for (std::size_t angle = 0; angle + 1 < 3; ++angle)
      require(families[(angle + 1) * 3 + mot], families[angle * 3 + mot]);
  return rep;
}

void write_combo_jsonl(std::ostream& out, std::span<const ComboFamily> families) {
  for (const auto& f : families)
    for (std::size_t j = 0; j < f.seeds.size(); ++j) {
      nlohmann::json rec{{"label", f.label}, {"tilt_deg", f.tilt_deg}, {"motors", f.motors}, {"seed", f.seeds[j]}};
      rec["eps"] = std::isfinite(f.eps[j]) ? nlohmann::json(f.eps[j]) : nlohmann::json(nullptr);
      rec["t50"] = std::isfinite(f.t50[j]) ? nlohmann::json(f.t50[j]) : nlohmann::json(nullptr);
      out << rec.dump() << '\n';
    }
}

double ResolutionResult::mean_eps_still() const { return mean_of(eps_still); }
double ResolutionResult::mean_eps_vibrated() const { return mean_of(eps_vibrated); }

std::size_t ResolutionResult::smaller_max_step_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < max_step_still.size(); ++i)
    if (max_step_vibrated[i] < max_step_still[i]) ++n;
  return n;
}

ResolutionResult resolution_experiment(const Material& m, std::size_t seed_count, const ResolutionConfig& cfg,
                                       Exec exec) {
  if (seed_count < 1) throw std::invalid_argument("seed_count must be >= 1");
  ResolutionResult r;
  r.still.resize(seed_count);
  r.vibrated.resize(seed_count);
  const auto tilt = TiltSchedule::ramp_hold(90.0, cfg.ramp_s);
  const auto vib = motors_program(cfg.motors, cfg.duty, cfg.horizon_s);
  for_each_index(2 * seed_count, exec, [&](std::size_t idx) {
    const std::size_t j = idx / 2;
    const std::uint64_t seed = sensing::mix_seed(cfg.seed, idx);
    if (idx % 2 == 0)
      r.still[j] = run_trial(tilt, {}, m, cfg.load_g, seed, cfg.horizon_s);
    else
      r.vibrated[j] = run_trial(tilt, vib, m, cfg.load_g, seed, cfg.horizon_s);
  });
  for (std::size_t j = 0; j < seed_count; ++j) {
    r.eps_still.push_back(epsilon(r.still[j].masses, 1));
    r.eps_vibrated.push_back(epsilon(r.vibrated[j].masses, 1));
    r.max_step_still.push_back(max_step(r.still[j]));
    r.max_step_vibrated.push_back(max_step(r.vibrated[j]));
  }
  return r;
}

}  // namespace eskin::weighing
