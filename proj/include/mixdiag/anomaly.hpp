#pragma once

// Replays an event trace against a learned timed automaton and reports where
// it leaves the learned behaviour.

#include <optional>
#include <string>
#include <vector>

#include "mixdiag/automaton.hpp"
#include "mixdiag/events.hpp"

namespace mixdiag::anomaly {

enum class AnomalyKind { TimingAboveMax, TimingBelowMin, UnknownEvent, UnknownState };

std::string to_string(AnomalyKind kind);
AnomalyKind anomaly_kind_from(const std::string& text);

inline bool is_timing(AnomalyKind k) { return k == AnomalyKind::TimingAboveMax || k == AnomalyKind::TimingBelowMin; }

/// A state reference: the learned state id when the vector is known.
struct StateRef {
  std::optional<ta::StateId> id;
  events::ActuatorVector vector;

  bool operator==(const StateRef&) const = default;
};

struct Anomaly {
  AnomalyKind kind = AnomalyKind::UnknownState;
  StateRef source;
  std::optional<StateRef> target;  // absent for UnknownState
  std::string event_label;
  std::optional<double> observed_dwell_s;  // timing kinds only
  std::optional<double> bound_s;           // the violated t_min / t_max
  std::optional<double> deviation_s;       // |observed - bound|, > 0
  double at_t_s = 0.0;

  bool operator==(const Anomaly&) const = default;
};

/// Effective tolerance for a bound b is max(abs_tol_s, rel_tol * b).
struct DetectionSettings {
  double abs_tol_s = 0.5;
  double rel_tol = 0.10;

  double tolerance_for(double bound_s) const;
  void validate() const;
};

struct Detection {
  std::vector<Anomaly> anomalies;
  // Trace did not start in the automaton's initial state; detection began at
  // the first vector the automaton knows.
  bool initial_mismatch = false;
};

/// Throws PreconditionError when the trace's actuator-id set differs from the automaton's.
Detection detect(const ta::TimedAutomaton& automaton, const events::EventTrace& trace,
                 const DetectionSettings& settings = {});

std::string anomalies_to_json_text(const std::vector<Anomaly>& anomalies);
std::vector<Anomaly> anomalies_from_json_text(const std::string& text);

}  // namespace mixdiag::anomaly
