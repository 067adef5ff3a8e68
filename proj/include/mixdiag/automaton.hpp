#pragma once

// Deterministic timed automaton learned passively from actuator event traces.
//
// A state is an exact actuator vector. A transition is keyed by (source, event
// label) and keeps running timing statistics of the dwell time spent in the
// source state before the event: exact min/max plus a Welford mean and
// second-moment accumulator.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mixdiag/error.hpp"
#include "mixdiag/events.hpp"

namespace mixdiag::ta {

class InconsistentTraces : public Error {
 public:
  using Error::Error;
};

class DeterminismViolation : public Error {
 public:
  using Error::Error;
};

using StateId = int;

struct State {
  StateId id = 0;
  events::ActuatorVector vector;
  bool is_initial = false;

  bool operator==(const State&) const = default;
};

struct Transition {
  StateId source = 0;
  std::string event_label;
  StateId target = 0;
  double t_min_s = 0.0;
  double t_max_s = 0.0;
  double mean_s = 0.0;
  double m2_s2 = 0.0;
  std::uint64_t count = 0;

  double variance_s2() const { return count == 0 ? 0.0 : m2_s2 / static_cast<double>(count); }
  double stddev_s() const;

  bool operator==(const Transition&) const = default;
};

class TimedAutomaton {
 public:
  TimedAutomaton() = default;

  /// Starts an automaton with a single initial state.
  explicit TimedAutomaton(events::ActuatorVector initial);

  const std::vector<State>& states() const { return states_; }
  const std::map<std::pair<StateId, std::string>, Transition>& transitions() const { return transitions_; }
  const std::vector<std::string>& alphabet() const { return alphabet_; }

  StateId initial_state() const;
  const State& state(StateId id) const;
  std::optional<StateId> find_state(const events::ActuatorVector& vector) const;
  const Transition* find_transition(StateId source, const std::string& label) const;

  /// Folds one observed step into the automaton and returns the target state.
  StateId update(StateId current, const events::Event& event, const events::ActuatorVector& new_vector,
                 double dwell_s);

  /// True iff the last `window` updates created nothing and moved no bound by
  /// more than `epsilon_s`.
  bool has_converged(std::size_t window, double epsilon_s) const;

  std::size_t update_count() const { return history_.size(); }

  /// Renumbers states breadth-first from the initial state, following
  /// outgoing transitions in label order. Unreachable states go last, ordered
  /// by vector.
  void canonicalize();

  /// Builds an automaton from explicit parts; checks every invariant.
  static TimedAutomaton from_parts(std::vector<State> states, std::vector<Transition> transitions,
                                   std::vector<std::string> alphabet);

  /// Structural equality (states, transitions, alphabet); update history is
  /// learner state and is ignored.
  bool operator==(const TimedAutomaton& other) const {
    return states_ == other.states_ && transitions_ == other.transitions_ && alphabet_ == other.alphabet_;
  }

 private:
  struct UpdateRecord {
    bool created = false;
    double bound_shift_s = 0.0;
  };

  void check_invariants() const;

  std::vector<State> states_;  // index == id
  std::map<std::pair<StateId, std::string>, Transition> transitions_;
  std::vector<std::string> alphabet_;  // sorted, unique
  std::map<events::ActuatorVector, StateId> by_vector_;
  std::vector<UpdateRecord> history_;
};

/// Learns one automaton from traces sharing an actuator-id set and initial vector.
TimedAutomaton learn(const std::vector<events::EventTrace>& traces);

std::string serialize(const TimedAutomaton& automaton);
TimedAutomaton deserialize(const std::string& text);

}  // namespace mixdiag::ta
