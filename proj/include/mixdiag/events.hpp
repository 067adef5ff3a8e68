#pragma once

// Actuator event traces reconstructed from simulation logs.

#include <atomic>
#include <compare>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "mixdiag/error.hpp"
#include "mixdiag/plant.hpp"

namespace mixdiag::events {

class EmptyLog : public Error {
 public:
  using Error::Error;
};

class SourceUnavailable : public Error {
 public:
  using Error::Error;
};

/// On/off state of every actuator, keyed (and therefore ordered) by id.
struct ActuatorVector {
  std::map<std::string, bool> signals;

  std::vector<std::string> ids() const;
  std::vector<std::string> active() const;
  /// Active ids joined by '+', or "idle" when everything is off.
  std::string describe() const;

  auto operator<=>(const ActuatorVector&) const = default;
};

ActuatorVector all_off(const std::vector<std::string>& ids);

struct Event {
  std::string label;  // e.g. "V201↓,V202↑"
  double t_s = 0.0;

  bool operator==(const Event&) const = default;
};

/// Canonical label of the change from `from` to `to`. Both vectors must share
/// one id set and differ in at least one signal.
std::string make_label(const ActuatorVector& from, const ActuatorVector& to);

/// Applies a label to a vector. Throws PreconditionError for malformed labels,
/// unknown ids or edges that contradict the current signal.
ActuatorVector apply_label(const ActuatorVector& vector, std::string_view label);

struct TraceStep {
  Event event;
  ActuatorVector resulting_vector;
  double dwell_s = 0.0;  // time spent in the previous vector

  bool operator==(const TraceStep&) const = default;
};

struct EventTrace {
  ActuatorVector initial_vector;
  double start_t_s = 0.0;
  std::vector<TraceStep> steps;

  ActuatorVector final_vector() const { return steps.empty() ? initial_vector : steps.back().resulting_vector; }
  bool operator==(const EventTrace&) const = default;
};

plant::SimulationLog parse_log(std::string_view csv_text);

/// Actuator changes at the same timestamp (or within `merge_window_s` of the
/// first change of a group) become one event. Sensor rows are ignored.
EventTrace to_trace(const plant::SimulationLog& log, const plant::PlantConfig& config, double merge_window_s = 0.0);

/// Splits after every step that re-enters `idle`. Each returned segment ends on
/// its return to idle; trailing steps without a return form a last segment.
std::vector<EventTrace> split_cycles(const EventTrace& trace, const ActuatorVector& idle);

/// True iff replaying the labels from the initial vector reproduces every
/// recorded resulting vector.
bool replays_consistently(const EventTrace& trace);

std::string trace_to_json_text(const EventTrace& trace);
EventTrace trace_from_json_text(const std::string& text);

/// Sensor rows of a log CSV on disk, read afresh on every scan.
class SensorCsvSource {
 public:
  explicit SensorCsvSource(std::string path) : path_(std::move(path)) {}

  const std::string& path() const { return path_; }

  /// Throws SourceUnavailable when the file cannot be read or parsed.
  void scan(const std::function<void(const plant::SensorRecord&)>& visit) const;

  std::size_t scan_count() const { return scans_.load(); }

 private:
  std::string path_;
  mutable std::atomic<std::size_t> scans_{0};
};

}  // namespace mixdiag::events
