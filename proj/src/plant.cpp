#include "mixdiag/plant.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <fmt/format.h>

#include "json.hpp"
#include "mixdiag/text.hpp"

namespace mixdiag::plant {

namespace {

// Level and volume thresholds count as reached within this many liters.
constexpr double kLevelEps = 1e-9;

double quantize_ms(double t_s) { return std::round(t_s * 1000.0) / 1000.0; }

}  // namespace

const Tank* PlantConfig::find_tank(const std::string& id) const {
  auto it = std::find_if(tanks.begin(), tanks.end(), [&](const Tank& t) { return t.id == id; });
  return it == tanks.end() ? nullptr : &*it;
}

const Actuator* PlantConfig::find_actuator(const std::string& id) const {
  auto it = std::find_if(actuators.begin(), actuators.end(), [&](const Actuator& a) { return a.id == id; });
  return it == actuators.end() ? nullptr : &*it;
}

std::vector<std::string> PlantConfig::actuator_ids() const {
  std::vector<std::string> ids;
  ids.reserve(actuators.size());
  for (const auto& a : actuators) ids.push_back(a.id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

PlantConfig default_config() {
  PlantConfig c;
  c.tanks = {
      {"B201", 10.0, 8.0}, {"B202", 10.0, 8.0}, {"B203", 10.0, 8.0},
      {"B204", 20.0, 0.0}, {"B205", 20.0, 0.0},
  };
  c.actuators = {
      {"V201", ActuatorKind::Valve, "B201", "B204", ""},
      {"V202", ActuatorKind::Valve, "B202", "B204", ""},
      {"V203", ActuatorKind::Valve, "B203", "B204", ""},
      {"M201", ActuatorKind::Stirrer, "", "", "B204"},
      {"P201", ActuatorKind::Pump, "B204", "B205", ""},
      {"V205", ActuatorKind::Valve, "B205", "", ""},
  };
  for (const char* tank : {"B201", "B202", "B203", "B204", "B205"}) {
    std::string id = std::string("L") + (tank + 1);
    c.sensors.push_back({id, SensorKind::Level, tank, "din61360:FillLevel"});
  }
  c.sensors.push_back({"F201", SensorKind::Flow, "P201", "din61360:FlowRate"});
  c.sensors.push_back({"T204", SensorKind::Temperature, "B204", "din61360:Temperature"});
  c.flows = {{"V201", 0.1}, {"V202", 0.1}, {"V203", 0.1}, {"P201", 0.2}, {"V205", 0.3}};
  c.phases = {
      {"Idle", {}, TimerElapsed{5.0}},
      {"Dose1", {{"V201", true}}, LevelReached{"B204", 2.0}},
      {"Dose2", {{"V202", true}}, LevelReached{"B204", 4.0}},
      {"Dose3", {{"V203", true}}, LevelReached{"B204", 6.0}},
      {"Mix", {{"M201", true}}, TimerElapsed{10.0}},
      {"Transfer", {{"P201", true}}, LevelReached{"B204", 0.0}},
      {"Drain", {{"V205", true}}, LevelReached{"B205", 0.0}},
  };
  c.dt_s = 0.1;
  return c;
}

void validate(const PlantConfig& config) {
  if (!(config.dt_s > 0.0)) throw ConfigError("dt_s must be > 0");
  if (config.sensor_noise_sigma < 0.0) throw ConfigError("sensor_noise_sigma must be >= 0");
  std::set<std::string> tank_ids;
  for (const auto& t : config.tanks) {
    if (!tank_ids.insert(t.id).second) throw ConfigError("duplicate tank '" + t.id + "'");
    if (!(t.capacity_l > 0.0)) throw ConfigError("tank '" + t.id + "' capacity must be > 0");
    if (t.initial_l < 0.0 || t.initial_l > t.capacity_l) {
      throw ConfigError("tank '" + t.id + "' initial level outside [0, capacity]");
    }
  }
  std::set<std::string> actuator_ids;
  for (const auto& a : config.actuators) {
    if (a.id.empty()) throw ConfigError("actuator with empty id");
    if (!actuator_ids.insert(a.id).second) throw ConfigError("duplicate actuator '" + a.id + "'");
    for (const auto* ref : {&a.from, &a.to, &a.acts_on}) {
      if (!ref->empty() && !tank_ids.count(*ref)) {
        throw ConfigError("actuator '" + a.id + "' references unknown tank '" + *ref + "'");
      }
    }
    if (a.from.empty() && !a.to.empty()) throw ConfigError("actuator '" + a.id + "' has `to` without `from`");
    if (a.moves_liquid() && !config.flows.count(a.id)) {
      throw ConfigError("actuator '" + a.id + "' moves liquid but has no flow rate");
    }
  }
  for (const auto& [id, rate] : config.flows) {
    if (!actuator_ids.count(id)) throw ConfigError("flow for unknown actuator '" + id + "'");
    if (!(rate > 0.0)) throw ConfigError("flow rate of '" + id + "' must be > 0");
  }
  for (const auto& s : config.sensors) {
    if (s.attached_to.empty() || (!tank_ids.count(s.attached_to) && !actuator_ids.count(s.attached_to))) {
      throw ConfigError("sensor '" + s.id + "' attached to unknown element '" + s.attached_to + "'");
    }
    if (s.kind == SensorKind::Flow && !actuator_ids.count(s.attached_to)) {
      throw ConfigError("flow sensor '" + s.id + "' must be attached to an actuator pipe");
    }
  }
  if (config.phases.empty()) throw ConfigError("phase list is empty");
  for (const auto& p : config.phases) {
    for (const auto& [id, on] : p.actuator_vector) {
      if (!actuator_ids.count(id)) {
        throw ConfigError("phase '" + p.name + "' references unknown actuator '" + id + "'");
      }
    }
    if (const auto* lr = std::get_if<LevelReached>(&p.end_condition)) {
      if (!tank_ids.count(lr->tank)) throw ConfigError("phase '" + p.name + "' waits on unknown tank");
    }
    if (const auto* te = std::get_if<TimerElapsed>(&p.end_condition); te && !(te->seconds > 0.0)) {
      throw ConfigError("phase '" + p.name + "' timer must be > 0");
    }
    if (const auto* vt = std::get_if<VolumeTransferred>(&p.end_condition); vt && !(vt->liters > 0.0)) {
      throw ConfigError("phase '" + p.name + "' volume must be > 0");
    }
  }
}

void validate(const FaultSpec& fault, const PlantConfig& config) {
  if (fault.onset_s < 0.0) throw ConfigError("fault onset must be >= 0");
  if (!(fault.duration_s > 0.0)) throw ConfigError("fault duration must be > 0");
  if (fault.kind == FaultKind::Leakage) {
    if (!config.find_tank(fault.target)) throw ConfigError("leakage targets unknown tank '" + fault.target + "'");
    if (!(fault.magnitude > 0.0)) throw ConfigError("leak rate must be > 0");
  } else {
    const auto* a = config.find_actuator(fault.target);
    if (!a) throw ConfigError("blockage targets unknown actuator '" + fault.target + "'");
    if (!a->moves_liquid()) throw ConfigError("blockage target '" + fault.target + "' moves no liquid");
    if (!(fault.magnitude > 0.0 && fault.magnitude < 1.0)) {
      throw ConfigError("blockage multiplier must lie strictly in (0,1)");
    }
  }
}

const char* unit_of(SensorKind kind) {
  switch (kind) {
    case SensorKind::Level: return "L";
    case SensorKind::Flow: return "L/s";
    case SensorKind::Temperature: return "degC";
  }
  return "";
}

namespace {

class Simulator {
 public:
  Simulator(const PlantConfig& config, const std::vector<FaultSpec>& faults, std::uint64_t seed,
            const StepObserver& observer)
      : config_(config), faults_(faults), observer_(observer), rng_(seed), ids_(config.actuator_ids()) {
    for (const auto& t : config_.tanks) levels_[t.id] = t.initial_l;
    for (const auto& id : ids_) {
      vector_[id] = false;
      last_flow_[id] = 0.0;
    }
    std::set<std::string> fed;
    for (const auto& a : config_.actuators) {
      if (!a.to.empty()) fed.insert(a.to);
    }
    for (const auto& t : config_.tanks) {
      if (!fed.count(t.id)) source_tanks_.push_back(t.id);
    }
    sensors_ = config_.sensors;
    std::sort(sensors_.begin(), sensors_.end(), [](const Sensor& a, const Sensor& b) { return a.id < b.id; });
  }

  SimulationLog run(int n_cycles) {
    for (const auto& id : ids_) log_.actuator_records.push_back({0.0, id, false});
    for (int cycle = 0; cycle < n_cycles; ++cycle) {
      for (const auto& tank : source_tanks_) levels_[tank] = config_.find_tank(tank)->initial_l;
      for (const auto& phase : config_.phases) run_phase(phase, cycle);
    }
    switch_to({});
    maybe_sample();
    return std::move(log_);
  }

 private:
  double now() const { return quantize_ms(static_cast<double>(step_) * config_.dt_s); }

  double total_liquid() const {
    double sum = 0.0;
    for (const auto& [id, level] : levels_) sum += level;
    return sum;
  }

  void switch_to(const std::map<std::string, bool>& wanted) {
    const double t = now();
    for (const auto& id : ids_) {
      auto it = wanted.find(id);
      const bool on = it != wanted.end() && it->second;
      if (vector_[id] != on) {
        vector_[id] = on;
        log_.actuator_records.push_back({t, id, on});
      }
    }
  }

  void maybe_sample() {
    const double t = now();
    const auto second = static_cast<std::int64_t>(std::floor(t + 1e-9));
    if (second <= last_sampled_second_) return;
    last_sampled_second_ = second;
    for (const auto& s : sensors_) {
      double value = 0.0;
      switch (s.kind) {
        case SensorKind::Level: value = levels_.at(s.attached_to); break;
        case SensorKind::Flow: value = last_flow_.count(s.attached_to) ? last_flow_.at(s.attached_to) : 0.0; break;
        case SensorKind::Temperature: value = 20.0; break;
      }
      if (config_.sensor_noise_sigma > 0.0) value += noise_(rng_) * config_.sensor_noise_sigma;
      log_.sensor_records.push_back({t, s.id, value});
    }
  }

  double flow_multiplier(const std::string& actuator, double t) const {
    double m = 1.0;
    for (const auto& f : faults_) {
      if (f.kind == FaultKind::Blockage && f.target == actuator && f.active_at(t)) m *= f.magnitude;
    }
    return m;
  }

  // Fault-free duration of `phase` from the current levels; nullopt when the
  // end condition can never be met.
  std::optional<double> nominal_duration(const Phase& phase) const {
    auto active = [&](const Actuator& a) {
      auto it = phase.actuator_vector.find(a.id);
      return it != phase.actuator_vector.end() && it->second && a.moves_liquid();
    };
    return std::visit(
        [&](const auto& cond) -> std::optional<double> {
          using T = std::decay_t<decltype(cond)>;
          if constexpr (std::is_same_v<T, TimerElapsed>) {
            return cond.seconds;
          } else if constexpr (std::is_same_v<T, VolumeTransferred>) {
            double rate = 0.0;
            for (const auto& a : config_.actuators) {
              if (active(a)) rate += config_.flows.at(a.id);
            }
            if (rate <= 0.0) return std::nullopt;
            return cond.liters / rate;
          } else {
            double net = 0.0;
            for (const auto& a : config_.actuators) {
              if (!active(a)) continue;
              if (a.to == cond.tank) net += config_.flows.at(a.id);
              if (a.from == cond.tank) net -= config_.flows.at(a.id);
            }
            const double gap = cond.liters - levels_.at(cond.tank);
            if (std::abs(gap) <= kLevelEps) return config_.dt_s;
            if (gap * net <= 0.0) return std::nullopt;
            return gap / net;
          }
        },
        phase.end_condition);
  }

  void run_phase(const Phase& phase, int cycle) {
    switch_to(phase.actuator_vector);
    const auto nominal = nominal_duration(phase);
    if (!nominal) {
      throw PhaseUnreachable(fmt::format("phase '{}' in cycle {} can never end", phase.name, cycle + 1));
    }
    const double cap_s = std::max(10.0 * *nominal, 10.0 * config_.dt_s);
    const double start_t = now();

    bool rising = false;
    if (const auto* lr = std::get_if<LevelReached>(&phase.end_condition)) {
      rising = levels_.at(lr->tank) < lr->liters;
    }
    double moved = 0.0;

    for (;;) {
      maybe_sample();
      moved += integrate_step();
      const double elapsed = now() - start_t;
      const bool done = std::visit(
          [&](const auto& cond) {
            using T = std::decay_t<decltype(cond)>;
            if constexpr (std::is_same_v<T, TimerElapsed>) {
              return elapsed >= cond.seconds - 1e-9;
            } else if constexpr (std::is_same_v<T, VolumeTransferred>) {
              return moved >= cond.liters - kLevelEps;
            } else {
              const double level = levels_.at(cond.tank);
              return rising ? level >= cond.liters - kLevelEps : level <= cond.liters + kLevelEps;
            }
          },
          phase.end_condition);
      if (done) return;
      if (elapsed > cap_s) {
        throw PhaseUnreachable(fmt::format("phase '{}' in cycle {} exceeded {} s (10x nominal)", phase.name,
                                           cycle + 1, text::format_double(cap_s)));
      }
    }
  }

  // One Euler step; returns liters moved by active flow actuators.
  double integrate_step() {
    const double t = now();
    const double dt = config_.dt_s;
    StepBalance balance;
    if (observer_) {
      balance.step = step_;
      balance.total_before_l = total_liquid();
    }
    double moved = 0.0;
    for (const auto& id : ids_) {
      last_flow_[id] = 0.0;
      const Actuator& a = *config_.find_actuator(id);
      if (!vector_[id] || !a.moves_liquid()) continue;
      double amount = config_.flows.at(id) * flow_multiplier(id, t) * dt;
      amount = std::min(amount, levels_[a.from]);
      if (!a.to.empty()) {
        amount = std::min(amount, config_.find_tank(a.to)->capacity_l - levels_[a.to]);
      }
      amount = std::max(amount, 0.0);
      levels_[a.from] -= amount;
      if (a.to.empty()) {
        balance.outflow_l += amount;
      } else {
        levels_[a.to] += amount;
      }
      last_flow_[id] = amount / dt;
      moved += amount;
    }
    for (const auto& f : faults_) {
      if (f.kind != FaultKind::Leakage || !f.active_at(t)) continue;
      double& level = levels_[f.target];
      const double leak = std::min(f.magnitude * dt, level);
      level -= leak;
      balance.leaked_l += leak;
    }
    ++step_;
    if (observer_) {
      balance.t_s = now();
      balance.total_after_l = total_liquid();
      balance.levels_l = levels_;
      observer_(balance);
    }
    return moved;
  }

  const PlantConfig& config_;
  const std::vector<FaultSpec>& faults_;
  const StepObserver& observer_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> noise_{0.0, 1.0};
  std::vector<std::string> ids_;
  std::vector<Sensor> sensors_;
  std::vector<std::string> source_tanks_;
  std::map<std::string, double> levels_;
  std::map<std::string, bool> vector_;
  std::map<std::string, double> last_flow_;
  std::int64_t step_ = 0;
  std::int64_t last_sampled_second_ = -1;
  SimulationLog log_;
};

}  // namespace

SimulationLog simulate(const PlantConfig& config, int n_cycles, const std::vector<FaultSpec>& faults,
                       std::uint64_t seed, const StepObserver& observer) {
  if (n_cycles < 1) throw PreconditionError("n_cycles must be >= 1");
  validate(config);
  for (const auto& f : faults) validate(f, config);
  Simulator sim(config, faults, seed, observer);
  SimulationLog log = sim.run(n_cycles);
  log.meta = {seed, n_cycles, faults};
  return log;
}

std::string to_string(ActuatorKind kind) {
  switch (kind) {
    case ActuatorKind::Valve: return "valve";
    case ActuatorKind::Pump: return "pump";
    case ActuatorKind::Stirrer: return "stirrer";
  }
  return "";
}

std::string to_string(SensorKind kind) {
  switch (kind) {
    case SensorKind::Level: return "level";
    case SensorKind::Flow: return "flow";
    case SensorKind::Temperature: return "temperature";
  }
  return "";
}

std::string to_string(FaultKind kind) { return kind == FaultKind::Leakage ? "leakage" : "blockage"; }

namespace {

using nlohmann::json;

ActuatorKind actuator_kind_from(const std::string& s) {
  if (s == "valve") return ActuatorKind::Valve;
  if (s == "pump") return ActuatorKind::Pump;
  if (s == "stirrer") return ActuatorKind::Stirrer;
  throw ConfigError("unknown actuator kind '" + s + "'");
}

SensorKind sensor_kind_from(const std::string& s) {
  if (s == "level") return SensorKind::Level;
  if (s == "flow") return SensorKind::Flow;
  if (s == "temperature") return SensorKind::Temperature;
  throw ConfigError("unknown sensor kind '" + s + "'");
}

json end_condition_json(const EndCondition& cond) {
  return std::visit(
      [](const auto& c) -> json {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, TimerElapsed>) {
          return {{"type", "TimerElapsed"}, {"seconds", c.seconds}};
        } else if constexpr (std::is_same_v<T, VolumeTransferred>) {
          return {{"type", "VolumeTransferred"}, {"liters", c.liters}};
        } else {
          return {{"type", "LevelReached"}, {"tank", c.tank}, {"liters", c.liters}};
        }
      },
      cond);
}

EndCondition end_condition_from(const json& j) {
  const auto type = j.at("type").get<std::string>();
  if (type == "TimerElapsed") return TimerElapsed{j.at("seconds").get<double>()};
  if (type == "VolumeTransferred") return VolumeTransferred{j.at("liters").get<double>()};
  if (type == "LevelReached") return LevelReached{j.at("tank").get<std::string>(), j.at("liters").get<double>()};
  throw ConfigError("unknown end condition '" + type + "'");
}

std::string opt_string(const json& j, const char* key) {
  auto it = j.find(key);
  return it == j.end() || it->is_null() ? std::string{} : it->get<std::string>();
}

}  // namespace

std::string config_to_json_text(const PlantConfig& c) {
  json j;
  j["tanks"] = json::array();
  for (const auto& t : c.tanks) {
    j["tanks"].push_back({{"id", t.id}, {"capacity_l", t.capacity_l}, {"initial_l", t.initial_l}});
  }
  j["actuators"] = json::array();
  for (const auto& a : c.actuators) {
    json ja{{"id", a.id}, {"kind", to_string(a.kind)}};
    if (!a.from.empty()) ja["from"] = a.from;
    if (!a.to.empty()) ja["to"] = a.to;
    if (!a.acts_on.empty()) ja["acts_on"] = a.acts_on;
    j["actuators"].push_back(ja);
  }
  j["sensors"] = json::array();
  for (const auto& s : c.sensors) {
    j["sensors"].push_back({{"id", s.id},
                            {"kind", to_string(s.kind)},
                            {"attached_to", s.attached_to},
                            {"observes_property", s.observes_property}});
  }
  j["flows"] = c.flows;
  j["phases"] = json::array();
  for (const auto& p : c.phases) {
    j["phases"].push_back(
        {{"name", p.name}, {"actuator_vector", p.actuator_vector}, {"end_condition", end_condition_json(p.end_condition)}});
  }
  j["dt_s"] = c.dt_s;
  j["sensor_noise_sigma"] = c.sensor_noise_sigma;
  return j.dump(2) + "\n";
}

PlantConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(0, std::string("plant config: ") + e.what());
  }
  PlantConfig c;
  try {
    for (const auto& t : j.at("tanks")) {
      c.tanks.push_back({t.at("id").get<std::string>(), t.at("capacity_l").get<double>(), t.at("initial_l").get<double>()});
    }
    for (const auto& a : j.at("actuators")) {
      c.actuators.push_back({a.at("id").get<std::string>(), actuator_kind_from(a.at("kind").get<std::string>()),
                             opt_string(a, "from"), opt_string(a, "to"), opt_string(a, "acts_on")});
    }
    for (const auto& s : j.at("sensors")) {
      c.sensors.push_back({s.at("id").get<std::string>(), sensor_kind_from(s.at("kind").get<std::string>()),
                           s.at("attached_to").get<std::string>(), s.at("observes_property").get<std::string>()});
    }
    c.flows = j.at("flows").get<std::map<std::string, double>>();
    for (const auto& p : j.at("phases")) {
      c.phases.push_back({p.at("name").get<std::string>(), p.value("actuator_vector", std::map<std::string, bool>{}),
                          end_condition_from(p.at("end_condition"))});
    }
    c.dt_s = j.at("dt_s").get<double>();
    c.sensor_noise_sigma = j.value("sensor_noise_sigma", 0.0);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("plant config: ") + e.what());
  }
  validate(c);
  return c;
}

PlantConfig load_config(const std::string& path) { return config_from_json_text(text::read_file(path)); }

FaultSpec parse_fault(const std::string& spec) {
  const auto parts = text::split(spec, ':');
  if (parts.size() < 3 || parts.size() > 5) {
    throw ConfigError("fault must look like kind:target:magnitude[:onset[:duration]], got '" + spec + "'");
  }
  FaultSpec f;
  if (parts[0] == "leakage") {
    f.kind = FaultKind::Leakage;
  } else if (parts[0] == "blockage") {
    f.kind = FaultKind::Blockage;
  } else {
    throw ConfigError("unknown fault kind '" + parts[0] + "'");
  }
  f.target = parts[1];
  try {
    f.magnitude = text::parse_double(parts[2]);
    if (parts.size() > 3) f.onset_s = text::parse_double(parts[3]);
    if (parts.size() > 4) f.duration_s = text::parse_double(parts[4]);
  } catch (const ParseError& e) {
    throw ConfigError(std::string("fault: ") + e.what());
  }
  return f;
}

std::string write_log_csv(const SimulationLog& log) {
  std::string out = "t_s,kind,id,value\n";
  auto a = log.actuator_records.begin();
  auto s = log.sensor_records.begin();
  while (a != log.actuator_records.end() || s != log.sensor_records.end()) {
    if (s == log.sensor_records.end() || (a != log.actuator_records.end() && a->t_s <= s->t_s)) {
      out += fmt::format("{:.3f},actuator,{},{}\n", a->t_s, a->actuator_id, a->value ? 1 : 0);
      ++a;
    } else {
      out += fmt::format("{:.3f},sensor,{},{}\n", s->t_s, s->sensor_id, text::format_double(s->value));
      ++s;
    }
  }
  return out;
}

}  // namespace mixdiag::plant
