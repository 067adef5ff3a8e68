#pragma once

// Discrete-time model of the five-tank mixing module.
//
// Liquid moves at constant rates through actuators that connect two tanks
// (or a tank and the outside). The phase list is a fixed recipe; each phase
// switches a set of actuators on and runs until its end condition holds.

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mixdiag/error.hpp"

namespace mixdiag::plant {

class PhaseUnreachable : public Error {
 public:
  using Error::Error;
};

enum class ActuatorKind { Valve, Pump, Stirrer };
enum class SensorKind { Level, Flow, Temperature };

struct Tank {
  std::string id;
  double capacity_l = 0.0;
  double initial_l = 0.0;

  bool operator==(const Tank&) const = default;
};

struct Actuator {
  std::string id;
  ActuatorKind kind = ActuatorKind::Valve;
  // Flow path. Empty `from` means the actuator moves no liquid; empty `to`
  // with a set `from` drains to the outside.
  std::string from;
  std::string to;
  // Tank a non-flow actuator (stirrer) works on.
  std::string acts_on;

  bool moves_liquid() const { return !from.empty(); }
  bool operator==(const Actuator&) const = default;
};

struct Sensor {
  std::string id;
  SensorKind kind = SensorKind::Level;
  std::string attached_to;        // tank id, or the actuator id of a pipe
  std::string observes_property;  // prefixed IRI, e.g. din61360:FillLevel

  bool operator==(const Sensor&) const = default;
};

struct VolumeTransferred {
  double liters = 0.0;
  bool operator==(const VolumeTransferred&) const = default;
};
struct LevelReached {
  std::string tank;
  double liters = 0.0;
  bool operator==(const LevelReached&) const = default;
};
struct TimerElapsed {
  double seconds = 0.0;
  bool operator==(const TimerElapsed&) const = default;
};
using EndCondition = std::variant<VolumeTransferred, LevelReached, TimerElapsed>;

struct Phase {
  std::string name;
  // Actuators switched on during the phase; anything absent is off.
  std::map<std::string, bool> actuator_vector;
  EndCondition end_condition;

  bool operator==(const Phase&) const = default;
};

struct PlantConfig {
  std::vector<Tank> tanks;
  std::vector<Actuator> actuators;
  std::vector<Sensor> sensors;
  std::map<std::string, double> flows;  // actuator id -> L/s
  std::vector<Phase> phases;
  double dt_s = 0.1;
  double sensor_noise_sigma = 0.0;

  const Tank* find_tank(const std::string& id) const;
  const Actuator* find_actuator(const std::string& id) const;
  std::vector<std::string> actuator_ids() const;  // sorted

  bool operator==(const PlantConfig&) const = default;
};

enum class FaultKind { Leakage, Blockage };

struct FaultSpec {
  FaultKind kind = FaultKind::Leakage;
  std::string target;  // tank id (leakage) or actuator id (blockage)
  double magnitude = 0.0;
  double onset_s = 0.0;
  double duration_s = std::numeric_limits<double>::infinity();

  bool active_at(double t_s) const { return t_s >= onset_s && t_s < onset_s + duration_s; }
  bool operator==(const FaultSpec&) const = default;
};

struct ActuatorRecord {
  double t_s = 0.0;
  std::string actuator_id;
  bool value = false;

  bool operator==(const ActuatorRecord&) const = default;
};

struct SensorRecord {
  double t_s = 0.0;
  std::string sensor_id;
  double value = 0.0;

  bool operator==(const SensorRecord&) const = default;
};

struct LogMeta {
  std::uint64_t seed = 0;
  int n_cycles = 0;
  std::vector<FaultSpec> faults;
};

struct SimulationLog {
  std::vector<ActuatorRecord> actuator_records;
  std::vector<SensorRecord> sensor_records;
  LogMeta meta;

  // Records only; meta is not part of the CSV form.
  bool operator==(const SimulationLog& other) const {
    return actuator_records == other.actuator_records && sensor_records == other.sensor_records;
  }
};

/// Per-step bookkeeping handed to a simulation observer.
struct StepBalance {
  std::int64_t step = 0;
  double t_s = 0.0;  // time at the end of the step
  double total_before_l = 0.0;
  double total_after_l = 0.0;
  double inflow_l = 0.0;   // from outside the module (none in the reference plant)
  double outflow_l = 0.0;  // drained to outside
  double leaked_l = 0.0;
  std::map<std::string, double> levels_l;
};

using StepObserver = std::function<void(const StepBalance&)>;

PlantConfig default_config();

/// Throws ConfigError naming the first violated invariant.
void validate(const PlantConfig& config);
void validate(const FaultSpec& fault, const PlantConfig& config);

SimulationLog simulate(const PlantConfig& config, int n_cycles, const std::vector<FaultSpec>& faults,
                       std::uint64_t seed, const StepObserver& observer = {});

const char* unit_of(SensorKind kind);

// Text forms.
std::string to_string(ActuatorKind kind);
std::string to_string(SensorKind kind);
std::string to_string(FaultKind kind);

std::string config_to_json_text(const PlantConfig& config);
PlantConfig config_from_json_text(const std::string& text);
PlantConfig load_config(const std::string& path);

/// Parses `leakage:B204:0.02[:onset[:duration]]` or `blockage:P201:0.5[:onset[:duration]]`.
FaultSpec parse_fault(const std::string& text);

/// CSV with header `t_s,kind,id,value`, rows ordered by time, then kind, then id.
std::string write_log_csv(const SimulationLog& log);

}  // namespace mixdiag::plant
