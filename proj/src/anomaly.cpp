#include "mixdiag/anomaly.hpp"

#include <algorithm>

#include "json.hpp"

namespace mixdiag::anomaly {

std::string to_string(AnomalyKind kind) {
  switch (kind) {
    case AnomalyKind::TimingAboveMax: return "TimingAboveMax";
    case AnomalyKind::TimingBelowMin: return "TimingBelowMin";
    case AnomalyKind::UnknownEvent: return "UnknownEvent";
    case AnomalyKind::UnknownState: return "UnknownState";
  }
  return "";
}

AnomalyKind anomaly_kind_from(const std::string& text) {
  for (auto k : {AnomalyKind::TimingAboveMax, AnomalyKind::TimingBelowMin, AnomalyKind::UnknownEvent,
                 AnomalyKind::UnknownState}) {
    if (to_string(k) == text) return k;
  }
  throw ParseError(0, "unknown anomaly kind '" + text + "'");
}

double DetectionSettings::tolerance_for(double bound_s) const { return std::max(abs_tol_s, rel_tol * bound_s); }

void DetectionSettings::validate() const {
  if (!(abs_tol_s >= 0.0)) throw PreconditionError("abs_tol_s must be >= 0");
  if (!(rel_tol >= 0.0 && rel_tol < 1.0)) throw PreconditionError("rel_tol must lie in [0, 1)");
}

Detection detect(const ta::TimedAutomaton& automaton, const events::EventTrace& trace,
                 const DetectionSettings& settings) {
  settings.validate();
  const ta::StateId initial = automaton.initial_state();
  if (trace.initial_vector.ids() != automaton.state(initial).vector.ids()) {
    throw PreconditionError("trace and automaton have different actuator sets");
  }

  Detection out;
  auto ref = [&](const events::ActuatorVector& v) { return StateRef{automaton.find_state(v), v}; };

  std::optional<ta::StateId> current = automaton.find_state(trace.initial_vector);
  if (trace.initial_vector != automaton.state(initial).vector) out.initial_mismatch = true;
  if (!current) {
    Anomaly a;
    a.kind = AnomalyKind::UnknownState;
    a.source = ref(trace.initial_vector);
    a.at_t_s = trace.start_t_s;
    out.anomalies.push_back(std::move(a));
  }

  events::ActuatorVector previous = trace.initial_vector;
  for (const auto& step : trace.steps) {
    const auto& label = step.event.label;
    const auto target = automaton.find_state(step.resulting_vector);

    if (!current) {
      // Re-synchronise at the next vector the automaton knows.
      if (!target) {
        Anomaly a;
        a.kind = AnomalyKind::UnknownState;
        a.source = ref(step.resulting_vector);
        a.event_label = label;
        a.at_t_s = step.event.t_s;
        out.anomalies.push_back(std::move(a));
      }
      current = target;
      previous = step.resulting_vector;
      continue;
    }

    const ta::Transition* tr = automaton.find_transition(*current, label);
    if (!tr) {
      Anomaly a;
      a.source = ref(previous);
      a.event_label = label;
      a.at_t_s = step.event.t_s;
      if (target) {
        a.kind = AnomalyKind::UnknownEvent;
        a.target = ref(step.resulting_vector);
      } else {
        // The unknown vector itself is the symptom; report it as the state.
        a.kind = AnomalyKind::UnknownState;
        a.source = ref(step.resulting_vector);
      }
      out.anomalies.push_back(std::move(a));
      current = target;
      previous = step.resulting_vector;
      continue;
    }

    const double dwell = step.dwell_s;
    std::optional<AnomalyKind> kind;
    double bound = 0.0;
    if (dwell > tr->t_max_s + settings.tolerance_for(tr->t_max_s)) {
      kind = AnomalyKind::TimingAboveMax;
      bound = tr->t_max_s;
    } else if (dwell < tr->t_min_s - settings.tolerance_for(tr->t_min_s)) {
      kind = AnomalyKind::TimingBelowMin;
      bound = tr->t_min_s;
    }
    if (kind) {
      Anomaly a;
      a.kind = *kind;
      a.source = ref(previous);
      a.target = ref(step.resulting_vector);
      a.event_label = label;
      a.observed_dwell_s = dwell;
      a.bound_s = bound;
      a.deviation_s = *kind == AnomalyKind::TimingAboveMax ? dwell - bound : bound - dwell;
      a.at_t_s = step.event.t_s;
      out.anomalies.push_back(std::move(a));
    }
    current = tr->target;
    previous = step.resulting_vector;
  }
  std::stable_sort(out.anomalies.begin(), out.anomalies.end(),
                   [](const Anomaly& x, const Anomaly& y) { return x.at_t_s < y.at_t_s; });
  return out;
}

namespace {

using nlohmann::json;

json state_ref_json(const StateRef& r) {
  json j{{"vector", r.vector.signals}};
  j["state"] = r.id ? json(*r.id) : json(nullptr);
  return j;
}

StateRef state_ref_from(const json& j) {
  StateRef r;
  r.vector.signals = j.at("vector").get<std::map<std::string, bool>>();
  if (!j.at("state").is_null()) r.id = j.at("state").get<ta::StateId>();
  return r;
}

}  // namespace

std::string anomalies_to_json_text(const std::vector<Anomaly>& anomalies) {
  json j = json::array();
  for (const auto& a : anomalies) {
    json ja;
    ja["kind"] = to_string(a.kind);
    ja["source"] = state_ref_json(a.source);
    ja["target"] = a.target ? state_ref_json(*a.target) : json(nullptr);
    ja["event_label"] = a.event_label;
    ja["observed_dwell_s"] = a.observed_dwell_s ? json(*a.observed_dwell_s) : json(nullptr);
    ja["bound_s"] = a.bound_s ? json(*a.bound_s) : json(nullptr);
    ja["deviation_s"] = a.deviation_s ? json(*a.deviation_s) : json(nullptr);
    ja["at_t_s"] = a.at_t_s;
    j.push_back(std::move(ja));
  }
  return j.dump(2) + "\n";
}

std::vector<Anomaly> anomalies_from_json_text(const std::string& text) {
  std::vector<Anomaly> out;
  try {
    const json j = json::parse(text);
    for (const auto& ja : j) {
      Anomaly a;
      a.kind = anomaly_kind_from(ja.at("kind").get<std::string>());
      a.source = state_ref_from(ja.at("source"));
      if (!ja.at("target").is_null()) a.target = state_ref_from(ja.at("target"));
      a.event_label = ja.at("event_label").get<std::string>();
      if (!ja.at("observed_dwell_s").is_null()) a.observed_dwell_s = ja.at("observed_dwell_s").get<double>();
      if (!ja.at("bound_s").is_null()) a.bound_s = ja.at("bound_s").get<double>();
      if (!ja.at("deviation_s").is_null()) a.deviation_s = ja.at("deviation_s").get<double>();
      a.at_t_s = ja.at("at_t_s").get<double>();
      if (is_timing(a.kind) != a.deviation_s.has_value()) {
        throw ParseError(0, "anomalies: deviation present exactly for timing kinds");
      }
      out.push_back(std::move(a));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("anomalies: ") + e.what());
  }
  return out;
}

}  // namespace mixdiag::anomaly
