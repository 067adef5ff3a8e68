#pragma once

// In-memory triple store with copy-on-write snapshots.
//
// A KnowledgeGraph value holds the asserted triples, an optional materialised
// inference cache and a list of virtual bindings. Copies share storage until
// one of them is mutated; any mutation drops the inference cache.

#include <functional>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "mixdiag/events.hpp"
#include "mixdiag/kg/term.hpp"

namespace mixdiag::kg {

/// Set of triples indexed by subject, predicate and object.
class TripleIndex {
 public:
  TripleIndex() = default;
  TripleIndex(const TripleIndex& other);
  TripleIndex& operator=(const TripleIndex& other);
  TripleIndex(TripleIndex&&) noexcept = default;
  TripleIndex& operator=(TripleIndex&&) noexcept = default;

  bool insert(const Triple& t);
  bool erase(const Triple& t);
  bool contains(const Triple& t) const { return triples_.count(t) != 0; }
  std::size_t size() const { return triples_.size(); }
  bool empty() const { return triples_.empty(); }
  const std::set<Triple>& all() const { return triples_; }

  /// Calls `visit` for every triple matching the bound positions (nullptr = any).
  void match(const Iri* s, const Iri* p, const Term* o, const std::function<void(const Triple&)>& visit) const;

 private:
  void rebuild();

  std::set<Triple> triples_;
  std::map<Iri, std::vector<const Triple*>> by_subject_;
  std::map<Iri, std::vector<const Triple*>> by_predicate_;
  std::map<Term, std::vector<const Triple*>> by_object_;
};

/// OBDA-style access to sensor observations kept in a log CSV. Serves only:
///   ?obs rdf:type sosa:Observation
///   ?obs sosa:madeBySensor ex:<sensor>
///   ?obs sosa:hasSimpleResult "<value>"^^xsd:double
///   ?obs sosa:resultTime "<seconds>"^^xsd:double
struct VirtualBinding {
  std::string name;
  std::shared_ptr<const events::SensorCsvSource> source;

  /// Whether a pattern with this (possibly unbound) predicate and object is served.
  static bool serves(const Iri* predicate, const Term* object);

  /// Scans the source; throws events::SourceUnavailable.
  void materialize(const std::function<void(const Triple&)>& emit) const;
};

class KnowledgeGraph {
 public:
  KnowledgeGraph();

  std::size_t size() const { return asserted_->size(); }
  const std::set<Triple>& asserted() const { return asserted_->all(); }
  const TripleIndex& asserted_index() const { return *asserted_; }
  bool contains(const Triple& t) const { return asserted_->contains(t); }

  bool is_inferred() const { return inferred_ != nullptr; }
  /// Entailed triples not already asserted; empty unless infer() ran since the last mutation.
  const TripleIndex& inferred_index() const;
  /// Asserted plus inferred, for callers that need the full closure.
  std::set<Triple> all_triples() const;

  const std::vector<VirtualBinding>& virtual_bindings() const { return virtual_; }

  bool insert(const Triple& t);
  bool retract(const Triple& t);
  void add_binding(VirtualBinding binding);
  bool remove_binding(const std::string& name);
  void set_inferred(TripleIndex inferred);

 private:
  TripleIndex& mutable_asserted();

  std::shared_ptr<TripleIndex> asserted_;  // shared between copies until written
  std::shared_ptr<const TripleIndex> inferred_;
  std::vector<VirtualBinding> virtual_;
};

KnowledgeGraph insert(KnowledgeGraph graph, std::span<const Triple> triples);
KnowledgeGraph retract(KnowledgeGraph graph, std::span<const Triple> triples);

enum class Alignment { EquivalentTo, Subclass, AttributeToClass, RelationTo };

std::string to_string(Alignment mechanism);
Alignment alignment_from(const std::string& text);

/// The triple an alignment asserts.
Triple alignment_triple(Alignment mechanism, const Iri& a, const Iri& b);
KnowledgeGraph align(KnowledgeGraph graph, Alignment mechanism, const Iri& a, const Iri& b);

/// Materialises the fixpoint of:
///   subClassOf transitivity;  x type C, C subClassOf D  =>  x type D
///   equivalentClass symmetry/transitivity; a equivalentClass b  =>  a subClassOf b
///   x a y, a relationTo b  =>  x b y
///   x a v, a attributeToClass C  =>  x type C
KnowledgeGraph infer(KnowledgeGraph graph);

KnowledgeGraph bind_virtual(KnowledgeGraph graph, VirtualBinding binding);
KnowledgeGraph unbind_virtual(KnowledgeGraph graph, const std::string& name);

}  // namespace mixdiag::kg
