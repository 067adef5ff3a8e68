#include "mixdiag/annotate.hpp"

#include <algorithm>
#include <set>

#include "mixdiag/text.hpp"

namespace mixdiag::annotate {

using kg::Iri;
using kg::Literal;
using kg::Term;
using kg::Triple;

namespace {

Iri ex(const std::string& local) { return Iri::from_prefixed("ex:" + local); }
Iri sm(const std::string& local) { return Iri::from_prefixed("sm:" + local); }

std::string label_hash(const std::string& label) { return text::hex16(text::fnv1a64(label)); }

const Iri& has_signal() {
  static const Iri v = ex("hasSignal");
  return v;
}

}  // namespace

Iri machine_iri() { return ex("TA"); }
Iri state_iri(ta::StateId id) { return ex("TA_s_" + std::to_string(id)); }
Iri event_iri(const std::string& label) { return ex("TA_e_" + label_hash(label)); }
Iri transition_iri(ta::StateId source, const std::string& label, ta::StateId target) {
  return ex("TA_t_" + std::to_string(source) + "_" + label_hash(label) + "_" + std::to_string(target));
}

std::vector<Triple> annotate_automaton(const ta::TimedAutomaton& automaton,
                                       const std::map<ta::StateId, Iri>& equipment_map) {
  const Iri& type = kg::vocab::rdf_type();
  const Iri& label = kg::vocab::rdfs_label();
  const Iri machine = machine_iri();
  std::vector<Triple> out;
  auto add = [&](Iri s, Iri p, Term o) { out.push_back({std::move(s), std::move(p), std::move(o)}); };

  add(machine, type, sm("StateMachine"));
  add(sm("StateMachine"), kg::vocab::rdfs_sub_class_of(), Iri::from_prefixed("iso17359:DiagnosticModel"));

  for (const auto& s : automaton.states()) {
    const Iri si = state_iri(s.id);
    add(machine, sm("hasState"), si);
    add(si, type, sm("State"));
    add(si, sm("isInitial"), Literal::of(s.is_initial));
    add(si, label, Literal::of(s.vector.describe()));
    add(si, ex("stateId"), Literal::of(static_cast<std::int64_t>(s.id)));
    for (const auto& [actuator, on] : s.vector.signals) {
      const Iri sig = ex("TA_s_" + std::to_string(s.id) + "_" + actuator);
      add(si, has_signal(), sig);
      add(sig, label, Literal::of(actuator));
      add(sig, Iri::from_prefixed("din61360:hasValue"), Literal::of(on));
      add(sig, ex("signalOf"), ex(actuator));
    }
  }

  for (const auto& l : automaton.alphabet()) {
    const Iri ei = event_iri(l);
    add(machine, sm("hasEvent"), ei);
    add(ei, type, sm("Event"));
    add(ei, label, Literal::of(l));
  }

  for (const auto& [key, t] : automaton.transitions()) {
    const Iri ti = transition_iri(t.source, t.event_label, t.target);
    add(machine, sm("hasTransition"), ti);
    add(ti, type, sm("Transition"));
    add(ti, sm("source"), state_iri(t.source));
    add(ti, sm("target"), state_iri(t.target));
    add(ti, sm("onEvent"), event_iri(t.event_label));
    add(ti, ex("tMinSeconds"), Literal::of(t.t_min_s));
    add(ti, ex("tMaxSeconds"), Literal::of(t.t_max_s));
    add(ti, ex("meanSeconds"), Literal::of(t.mean_s));
    add(ti, ex("m2Seconds2"), Literal::of(t.m2_s2));
    add(ti, ex("observationCount"), Literal::of(static_cast<std::int64_t>(t.count)));
    if (auto it = equipment_map.find(t.source); it != equipment_map.end()) {
      add(ti, Iri::from_prefixed("isa88:relatesToEquipment"), it->second);
    }
  }
  return out;
}

namespace {

class View {
 public:
  explicit View(const std::vector<Triple>& triples) {
    for (const auto& t : triples) by_subject_[t.subject].emplace(t.predicate, t.object);
  }

  std::vector<Term> objects(const Iri& s, const Iri& p) const {
    std::vector<Term> out;
    auto it = by_subject_.find(s);
    if (it == by_subject_.end()) return out;
    auto [lo, hi] = it->second.equal_range(p);
    for (auto i = lo; i != hi; ++i) out.push_back(i->second);
    return out;
  }

  Term one(const Iri& s, const Iri& p) const {
    const auto values = objects(s, p);
    if (values.empty()) throw MalformedAnnotation("missing " + p.compact() + " of " + s.compact());
    if (values.size() > 1) throw MalformedAnnotation("duplicated " + p.compact() + " of " + s.compact());
    return values.front();
  }

  Iri one_iri(const Iri& s, const Iri& p) const {
    const Term t = one(s, p);
    if (const auto* i = std::get_if<Iri>(&t)) return *i;
    throw MalformedAnnotation(p.compact() + " of " + s.compact() + " is not an IRI");
  }

  Literal one_literal(const Iri& s, const Iri& p) const {
    const Term t = one(s, p);
    if (const auto* l = std::get_if<Literal>(&t)) return *l;
    throw MalformedAnnotation(p.compact() + " of " + s.compact() + " is not a literal");
  }

  std::vector<Iri> subjects_of_type(const Iri& cls) const {
    std::vector<Iri> out;
    for (const auto& [s, props] : by_subject_) {
      auto [lo, hi] = props.equal_range(kg::vocab::rdf_type());
      for (auto i = lo; i != hi; ++i) {
        if (i->second == Term(cls)) out.push_back(s);
      }
    }
    return out;
  }

 private:
  std::map<Iri, std::multimap<Iri, Term>> by_subject_;
};

double number(const Literal& l, const Iri& s, const Iri& p) {
  if (!l.is_numeric()) throw MalformedAnnotation(p.compact() + " of " + s.compact() + " is not numeric");
  return l.as_double();
}

}  // namespace

ta::TimedAutomaton rebuild_automaton(const std::vector<Triple>& triples) {
  const View view(triples);
  const auto machines = view.subjects_of_type(sm("StateMachine"));
  if (machines.empty()) throw MalformedAnnotation("no sm:StateMachine individual");
  if (machines.size() > 1) throw MalformedAnnotation("more than one sm:StateMachine individual");
  const Iri machine = machines.front();
  const Iri& label = kg::vocab::rdfs_label();

  auto as_iri = [&](const Term& t, const std::string& what) {
    if (const auto* i = std::get_if<Iri>(&t)) return *i;
    throw MalformedAnnotation(what + " of " + machine.compact() + " is not an IRI");
  };

  std::vector<ta::State> states;
  std::map<Iri, ta::StateId> ids;
  int initial_count = 0;
  for (const auto& term : view.objects(machine, sm("hasState"))) {
    const Iri si = as_iri(term, "sm:hasState");
    ta::State s;
    const Literal id = view.one_literal(si, ex("stateId"));
    if (id.datatype() != kg::Datatype::Integer) throw MalformedAnnotation("ex:stateId of " + si.compact() + " is not an integer");
    s.id = static_cast<ta::StateId>(text::parse_int(id.lexical()));
    const Literal initial = view.one_literal(si, sm("isInitial"));
    if (initial.datatype() != kg::Datatype::Boolean) throw MalformedAnnotation("sm:isInitial of " + si.compact() + " is not boolean");
    s.is_initial = initial.as_bool();
    initial_count += s.is_initial ? 1 : 0;
    for (const auto& sig_term : view.objects(si, has_signal())) {
      const Iri sig = as_iri(sig_term, "ex:hasSignal");
      const Literal name = view.one_literal(sig, label);
      const Literal value = view.one_literal(sig, Iri::from_prefixed("din61360:hasValue"));
      if (value.datatype() != kg::Datatype::Boolean) throw MalformedAnnotation("signal value of " + sig.compact() + " is not boolean");
      if (!s.vector.signals.emplace(name.lexical(), value.as_bool()).second) {
        throw MalformedAnnotation("duplicated signal " + name.lexical() + " of " + si.compact());
      }
    }
    if (!ids.emplace(si, s.id).second) throw MalformedAnnotation("duplicated state " + si.compact());
    states.push_back(std::move(s));
  }
  if (states.empty()) throw MalformedAnnotation("state machine has no states");
  if (initial_count == 0) throw MalformedAnnotation("missing initial state");
  if (initial_count > 1) throw MalformedAnnotation("duplicated initial state");

  auto state_id = [&](const Iri& si) {
    auto it = ids.find(si);
    if (it == ids.end()) throw MalformedAnnotation("transition references unknown state " + si.compact());
    return it->second;
  };

  std::vector<std::string> alphabet;
  for (const auto& term : view.objects(machine, sm("hasEvent"))) {
    alphabet.push_back(view.one_literal(as_iri(term, "sm:hasEvent"), label).lexical());
  }

  std::vector<ta::Transition> transitions;
  for (const auto& term : view.objects(machine, sm("hasTransition"))) {
    const Iri ti = as_iri(term, "sm:hasTransition");
    ta::Transition t;
    t.source = state_id(view.one_iri(ti, sm("source")));
    t.target = state_id(view.one_iri(ti, sm("target")));
    t.event_label = view.one_literal(view.one_iri(ti, sm("onEvent")), label).lexical();
    t.t_min_s = number(view.one_literal(ti, ex("tMinSeconds")), ti, ex("tMinSeconds"));
    t.t_max_s = number(view.one_literal(ti, ex("tMaxSeconds")), ti, ex("tMaxSeconds"));
    t.mean_s = number(view.one_literal(ti, ex("meanSeconds")), ti, ex("meanSeconds"));
    t.m2_s2 = number(view.one_literal(ti, ex("m2Seconds2")), ti, ex("m2Seconds2"));
    const Literal count = view.one_literal(ti, ex("observationCount"));
    if (count.datatype() != kg::Datatype::Integer) throw MalformedAnnotation("ex:observationCount of " + ti.compact() + " is not an integer");
    t.count = static_cast<std::uint64_t>(text::parse_int(count.lexical()));
    transitions.push_back(std::move(t));
  }

  try {
    return ta::TimedAutomaton::from_parts(std::move(states), std::move(transitions), std::move(alphabet));
  } catch (const ParseError& e) {
    throw MalformedAnnotation(std::string("inconsistent state machine: ") + e.what());
  } catch (const PreconditionError& e) {
    throw MalformedAnnotation(std::string("inconsistent state machine: ") + e.what());
  }
}

std::vector<Triple> annotate_anomalies(const std::vector<anomaly::Anomaly>& anomalies,
                                       const std::vector<Triple>& automaton_graph) {
  const Iri& type = kg::vocab::rdf_type();
  std::set<Iri> known_transitions, known_states;
  for (const auto& t : automaton_graph) {
    if (t.predicate != type) continue;
    if (t.object == Term(sm("Transition"))) known_transitions.insert(t.subject);
    if (t.object == Term(sm("State"))) known_states.insert(t.subject);
  }

  std::vector<Triple> out;
  auto add = [&](Iri s, Iri p, Term o) { out.push_back({std::move(s), std::move(p), std::move(o)}); };
  for (std::size_t k = 0; k < anomalies.size(); ++k) {
    const auto& a = anomalies[k];
    const Iri ai = ex("anomaly_" + std::to_string(k + 1));
    std::optional<Iri> location;
    if (anomaly::is_timing(a.kind)) {
      if (!a.source.id || !a.target || !a.target->id) {
        throw UnknownTransition("timing anomaly at t=" + text::format_double(a.at_t_s) + " has no learned transition");
      }
      const Iri ti = transition_iri(*a.source.id, a.event_label, *a.target->id);
      if (!known_transitions.count(ti)) {
        throw UnknownTransition("transition " + ti.compact() + " is not in the automaton graph");
      }
      location = ti;
    } else if (a.source.id && known_states.count(state_iri(*a.source.id))) {
      location = state_iri(*a.source.id);
    }

    add(ai, type, Iri::from_prefixed("iso17359:Symptom"));
    add(ai, type, ex(anomaly::is_timing(a.kind) ? "TimingAnomaly" : "BehaviorAnomaly"));
    if (location) add(ai, Iri::from_prefixed("iso17359:locatedAt"), *location);
    add(ai, ex("anomalyKind"), Literal::of(anomaly::to_string(a.kind)));
    add(ai, ex("eventLabel"), Literal::of(a.event_label));
    add(ai, ex("atTimeSeconds"), Literal::of(a.at_t_s));
    if (a.observed_dwell_s) add(ai, ex("observedDwellSeconds"), Literal::of(*a.observed_dwell_s));
    if (a.bound_s) add(ai, ex("boundSeconds"), Literal::of(*a.bound_s));
    if (a.deviation_s) add(ai, ex("deviationSeconds"), Literal::of(*a.deviation_s));
  }
  return out;
}

}  // namespace mixdiag::annotate
