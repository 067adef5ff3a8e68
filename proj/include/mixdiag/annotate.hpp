#pragma once

// Semantic annotation of a learned automaton (UML state-machine vocabulary,
// declared a diagnostic model) and of detected anomalies (symptoms).
//
// IRIs are stable across runs:
//   ex:TA                              the state machine
//   ex:TA_s_{id}                       state
//   ex:TA_s_{id}_{actuator}            one actuator signal of a state
//   ex:TA_e_{hash}                     event (hash = FNV-1a 64 of the label, hex)
//   ex:TA_t_{source}_{hash}_{target}   transition
//   ex:anomaly_{k}                     k-th anomaly, 1-based

#include <map>
#include <vector>

#include "mixdiag/anomaly.hpp"
#include "mixdiag/automaton.hpp"
#include "mixdiag/kg/term.hpp"

namespace mixdiag::annotate {

class MalformedAnnotation : public Error {
 public:
  using Error::Error;
};

class UnknownTransition : public Error {
 public:
  using Error::Error;
};

kg::Iri machine_iri();
kg::Iri state_iri(ta::StateId id);
kg::Iri event_iri(const std::string& label);
kg::Iri transition_iri(ta::StateId source, const std::string& label, ta::StateId target);

/// `equipment_map` links the transitions leaving a state to plant equipment;
/// states without an entry get no link.
std::vector<kg::Triple> annotate_automaton(const ta::TimedAutomaton& automaton,
                                           const std::map<ta::StateId, kg::Iri>& equipment_map = {});

/// Inverse of annotate_automaton. Throws MalformedAnnotation naming the
/// missing or duplicated element.
ta::TimedAutomaton rebuild_automaton(const std::vector<kg::Triple>& triples);

/// Timing anomalies are located at their transition, which must be present in
/// `automaton_graph` (else UnknownTransition). Other kinds are located at their
/// source state when it is known.
std::vector<kg::Triple> annotate_anomalies(const std::vector<anomaly::Anomaly>& anomalies,
                                           const std::vector<kg::Triple>& automaton_graph);

}  // namespace mixdiag::annotate
