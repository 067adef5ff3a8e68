#include "mixdiag/automaton.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>

#include "json.hpp"

namespace mixdiag::ta {

double Transition::stddev_s() const { return std::sqrt(std::max(0.0, variance_s2())); }

TimedAutomaton::TimedAutomaton(events::ActuatorVector initial) {
  states_.push_back({0, initial, true});
  by_vector_.emplace(std::move(initial), 0);
}

StateId TimedAutomaton::initial_state() const {
  for (const auto& s : states_) {
    if (s.is_initial) return s.id;
  }
  throw PreconditionError("automaton has no initial state");
}

const State& TimedAutomaton::state(StateId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= states_.size()) {
    throw PreconditionError("unknown state id " + std::to_string(id));
  }
  return states_[static_cast<std::size_t>(id)];
}

std::optional<StateId> TimedAutomaton::find_state(const events::ActuatorVector& vector) const {
  auto it = by_vector_.find(vector);
  if (it == by_vector_.end()) return std::nullopt;
  return it->second;
}

const Transition* TimedAutomaton::find_transition(StateId source, const std::string& label) const {
  auto it = transitions_.find({source, label});
  return it == transitions_.end() ? nullptr : &it->second;
}

StateId TimedAutomaton::update(StateId current, const events::Event& event, const events::ActuatorVector& new_vector,
                               double dwell_s) {
  const State& source = state(current);
  if (!(dwell_s > 0.0)) throw PreconditionError("dwell must be > 0");
  if (new_vector.ids() != source.vector.ids()) throw PreconditionError("vector has a different actuator set");

  events::ActuatorVector expected;
  try {
    expected = events::apply_label(source.vector, event.label);
  } catch (const PreconditionError& e) {
    throw DeterminismViolation("event '" + event.label + "' cannot fire in state " + std::to_string(current) +
                               ": " + e.what());
  }
  if (expected != new_vector) {
    throw DeterminismViolation("event '" + event.label + "' from state " + std::to_string(current) +
                               " leads to " + expected.describe() + ", not " + new_vector.describe());
  }

  UpdateRecord record;
  StateId target = 0;
  if (auto found = find_state(new_vector)) {
    target = *found;
  } else {
    target = static_cast<StateId>(states_.size());
    states_.push_back({target, new_vector, false});
    by_vector_.emplace(new_vector, target);
    record.created = true;
  }

  auto key = std::make_pair(current, event.label);
  auto it = transitions_.find(key);
  if (it == transitions_.end()) {
    Transition t;
    t.source = current;
    t.event_label = event.label;
    t.target = target;
    t.t_min_s = t.t_max_s = t.mean_s = dwell_s;
    t.m2_s2 = 0.0;
    t.count = 1;
    transitions_.emplace(key, t);
    auto pos = std::lower_bound(alphabet_.begin(), alphabet_.end(), event.label);
    if (pos == alphabet_.end() || *pos != event.label) alphabet_.insert(pos, event.label);
    record.created = true;
  } else {
    Transition& t = it->second;
    if (t.target != target) {
      throw DeterminismViolation("transition (" + std::to_string(current) + ", " + event.label +
                                 ") already leads to state " + std::to_string(t.target));
    }
    const double old_min = t.t_min_s;
    const double old_max = t.t_max_s;
    t.t_min_s = std::min(t.t_min_s, dwell_s);
    t.t_max_s = std::max(t.t_max_s, dwell_s);
    ++t.count;
    const double delta = dwell_s - t.mean_s;
    t.mean_s += delta / static_cast<double>(t.count);
    t.m2_s2 += delta * (dwell_s - t.mean_s);
    t.mean_s = std::clamp(t.mean_s, t.t_min_s, t.t_max_s);
    record.bound_shift_s = std::max(old_min - t.t_min_s, t.t_max_s - old_max);
  }
  history_.push_back(record);
  return target;
}

bool TimedAutomaton::has_converged(std::size_t window, double epsilon_s) const {
  if (window == 0) throw PreconditionError("convergence window must be >= 1");
  if (history_.size() < window) return false;
  return std::all_of(history_.end() - static_cast<std::ptrdiff_t>(window), history_.end(),
                     [&](const UpdateRecord& r) { return !r.created && r.bound_shift_s <= epsilon_s; });
}

void TimedAutomaton::canonicalize() {
  if (states_.empty()) return;
  std::map<StateId, std::vector<const Transition*>> outgoing;
  for (const auto& [key, t] : transitions_) outgoing[t.source].push_back(&t);  // label order within a source

  std::vector<StateId> order;
  std::vector<bool> seen(states_.size(), false);
  std::deque<StateId> queue{initial_state()};
  seen[static_cast<std::size_t>(initial_state())] = true;
  while (!queue.empty()) {
    const StateId s = queue.front();
    queue.pop_front();
    order.push_back(s);
    for (const Transition* t : outgoing[s]) {
      if (!seen[static_cast<std::size_t>(t->target)]) {
        seen[static_cast<std::size_t>(t->target)] = true;
        queue.push_back(t->target);
      }
    }
  }
  std::vector<StateId> rest;
  for (const auto& s : states_) {
    if (!seen[static_cast<std::size_t>(s.id)]) rest.push_back(s.id);
  }
  std::sort(rest.begin(), rest.end(), [&](StateId a, StateId b) { return state(a).vector < state(b).vector; });
  order.insert(order.end(), rest.begin(), rest.end());

  std::vector<StateId> remap(states_.size());
  for (std::size_t i = 0; i < order.size(); ++i) remap[static_cast<std::size_t>(order[i])] = static_cast<StateId>(i);

  std::vector<State> states(states_.size());
  for (const auto& s : states_) {
    State moved = s;
    moved.id = remap[static_cast<std::size_t>(s.id)];
    states[static_cast<std::size_t>(moved.id)] = std::move(moved);
  }
  std::map<std::pair<StateId, std::string>, Transition> transitions;
  for (const auto& [key, t] : transitions_) {
    Transition moved = t;
    moved.source = remap[static_cast<std::size_t>(t.source)];
    moved.target = remap[static_cast<std::size_t>(t.target)];
    transitions.emplace(std::make_pair(moved.source, moved.event_label), moved);
  }
  states_ = std::move(states);
  transitions_ = std::move(transitions);
  by_vector_.clear();
  for (const auto& s : states_) by_vector_.emplace(s.vector, s.id);
}

void TimedAutomaton::check_invariants() const {
  std::size_t initial = 0;
  for (std::size_t i = 0; i < states_.size(); ++i) {
    if (states_[i].id != static_cast<StateId>(i)) throw ParseError(0, "state ids must be 0..n-1 in order");
    if (states_[i].is_initial) ++initial;
    if (states_[i].vector.ids() != states_.front().vector.ids()) {
      throw ParseError(0, "state " + std::to_string(i) + " has a different actuator set");
    }
  }
  if (initial != 1) throw ParseError(0, "automaton must have exactly one initial state, found " + std::to_string(initial));
  if (by_vector_.size() != states_.size()) throw ParseError(0, "state vectors must be pairwise distinct");
  const std::set<std::string> sigma(alphabet_.begin(), alphabet_.end());
  for (const auto& [key, t] : transitions_) {
    const auto n = static_cast<StateId>(states_.size());
    if (t.source < 0 || t.source >= n || t.target < 0 || t.target >= n) {
      throw ParseError(0, "transition references an unknown state");
    }
    if (t.count < 1) throw ParseError(0, "transition count must be >= 1");
    if (!(t.t_min_s <= t.mean_s && t.mean_s <= t.t_max_s)) throw ParseError(0, "transition needs t_min <= mean <= t_max");
    if (t.m2_s2 < 0.0) throw ParseError(0, "negative variance accumulator");
    if (!sigma.count(t.event_label)) throw ParseError(0, "transition label '" + t.event_label + "' not in alphabet");
  }
}

TimedAutomaton TimedAutomaton::from_parts(std::vector<State> states, std::vector<Transition> transitions,
                                          std::vector<std::string> alphabet) {
  TimedAutomaton a;
  std::sort(states.begin(), states.end(), [](const State& x, const State& y) { return x.id < y.id; });
  a.states_ = std::move(states);
  for (const auto& s : a.states_) a.by_vector_.emplace(s.vector, s.id);
  std::sort(alphabet.begin(), alphabet.end());
  if (std::adjacent_find(alphabet.begin(), alphabet.end()) != alphabet.end()) {
    throw ParseError(0, "alphabet contains duplicates");
  }
  a.alphabet_ = std::move(alphabet);
  for (auto& t : transitions) {
    auto key = std::make_pair(t.source, t.event_label);
    if (!a.transitions_.emplace(key, std::move(t)).second) {
      throw ParseError(0, "duplicate (source, label) transition breaks determinism");
    }
  }
  a.check_invariants();
  return a;
}

TimedAutomaton learn(const std::vector<events::EventTrace>& traces) {
  if (traces.empty()) throw PreconditionError("learn needs at least one trace");
  const auto& initial = traces.front().initial_vector;
  for (const auto& t : traces) {
    if (t.initial_vector.ids() != initial.ids()) throw InconsistentTraces("traces disagree on the actuator-id set");
    if (t.initial_vector != initial) throw InconsistentTraces("traces start at different vectors");
  }
  TimedAutomaton a(initial);
  for (const auto& trace : traces) {
    StateId current = a.initial_state();
    for (const auto& step : trace.steps) {
      current = a.update(current, step.event, step.resulting_vector, step.dwell_s);
    }
  }
  a.canonicalize();
  return a;
}

namespace {

using nlohmann::json;

}  // namespace

std::string serialize(const TimedAutomaton& a) {
  json j;
  j["format"] = "timed-automaton/1";
  j["alphabet"] = a.alphabet();
  j["states"] = json::array();
  for (const auto& s : a.states()) {
    j["states"].push_back({{"id", s.id}, {"initial", s.is_initial}, {"vector", s.vector.signals}});
  }
  j["transitions"] = json::array();
  for (const auto& [key, t] : a.transitions()) {
    j["transitions"].push_back({{"source", t.source},
                                {"event", t.event_label},
                                {"target", t.target},
                                {"t_min_s", t.t_min_s},
                                {"t_max_s", t.t_max_s},
                                {"mean_s", t.mean_s},
                                {"m2_s2", t.m2_s2},
                                {"count", t.count}});
  }
  return j.dump(2) + "\n";
}

TimedAutomaton deserialize(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(0, std::string("automaton: ") + e.what());
  }
  try {
    if (j.value("format", std::string{}) != "timed-automaton/1") throw ParseError(0, "automaton: unknown format tag");
    std::vector<State> states;
    for (const auto& s : j.at("states")) {
      State st;
      st.id = s.at("id").get<StateId>();
      st.is_initial = s.at("initial").get<bool>();
      st.vector.signals = s.at("vector").get<std::map<std::string, bool>>();
      states.push_back(std::move(st));
    }
    std::vector<Transition> transitions;
    for (const auto& t : j.at("transitions")) {
      Transition tr;
      tr.source = t.at("source").get<StateId>();
      tr.event_label = t.at("event").get<std::string>();
      tr.target = t.at("target").get<StateId>();
      tr.t_min_s = t.at("t_min_s").get<double>();
      tr.t_max_s = t.at("t_max_s").get<double>();
      tr.mean_s = t.at("mean_s").get<double>();
      tr.m2_s2 = t.at("m2_s2").get<double>();
      tr.count = t.at("count").get<std::uint64_t>();
      transitions.push_back(std::move(tr));
    }
    auto alphabet = j.at("alphabet").get<std::vector<std::string>>();
    TimedAutomaton a = TimedAutomaton::from_parts(std::move(states), std::move(transitions), std::move(alphabet));
    // Labels must also agree with the vectors they connect.
    for (const auto& [key, t] : a.transitions()) {
      events::ActuatorVector reached;
      try {
        reached = events::apply_label(a.state(t.source).vector, t.event_label);
      } catch (const PreconditionError& e) {
        throw ParseError(0, std::string("automaton: ") + e.what());
      }
      if (reached != a.state(t.target).vector) {
        throw ParseError(0, "automaton: label '" + t.event_label + "' does not lead to the target vector");
      }
    }
    return a;
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("automaton: ") + e.what());
  }
}

}  // namespace mixdiag::ta
