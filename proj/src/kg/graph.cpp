#include "mixdiag/kg/graph.hpp"

#include <algorithm>
#include <cmath>

namespace mixdiag::kg {

namespace {

template <class Map, class Key>
void erase_ptr(Map& map, const Key& key, const Triple* t) {
  auto it = map.find(key);
  if (it == map.end()) return;
  auto& vec = it->second;
  vec.erase(std::remove(vec.begin(), vec.end(), t), vec.end());
  if (vec.empty()) map.erase(it);
}

}  // namespace

TripleIndex::TripleIndex(const TripleIndex& other) : triples_(other.triples_) { rebuild(); }

TripleIndex& TripleIndex::operator=(const TripleIndex& other) {
  if (this != &other) {
    triples_ = other.triples_;
    rebuild();
  }
  return *this;
}

void TripleIndex::rebuild() {
  by_subject_.clear();
  by_predicate_.clear();
  by_object_.clear();
  for (const auto& t : triples_) {
    by_subject_[t.subject].push_back(&t);
    by_predicate_[t.predicate].push_back(&t);
    by_object_[t.object].push_back(&t);
  }
}

bool TripleIndex::insert(const Triple& t) {
  auto [it, inserted] = triples_.insert(t);
  if (!inserted) return false;
  const Triple* p = &*it;
  by_subject_[p->subject].push_back(p);
  by_predicate_[p->predicate].push_back(p);
  by_object_[p->object].push_back(p);
  return true;
}

bool TripleIndex::erase(const Triple& t) {
  auto it = triples_.find(t);
  if (it == triples_.end()) return false;
  const Triple* p = &*it;
  erase_ptr(by_subject_, p->subject, p);
  erase_ptr(by_predicate_, p->predicate, p);
  erase_ptr(by_object_, p->object, p);
  triples_.erase(it);
  return true;
}

void TripleIndex::match(const Iri* s, const Iri* p, const Term* o,
                        const std::function<void(const Triple&)>& visit) const {
  const std::vector<const Triple*>* best = nullptr;
  auto consider = [&](const auto& map, const auto* key) -> bool {
    if (!key) return true;
    auto it = map.find(*key);
    if (it == map.end()) return false;  // a bound position with no triples
    if (!best || it->second.size() < best->size()) best = &it->second;
    return true;
  };
  if (!consider(by_subject_, s) || !consider(by_predicate_, p) || !consider(by_object_, o)) return;

  auto accept = [&](const Triple& t) {
    return (!s || t.subject == *s) && (!p || t.predicate == *p) && (!o || t.object == *o);
  };
  if (best) {
    for (const Triple* t : *best) {
      if (accept(*t)) visit(*t);
    }
  } else {
    for (const auto& t : triples_) visit(t);
  }
}

bool VirtualBinding::serves(const Iri* predicate, const Term* object) {
  static const Iri made_by = Iri::from_prefixed("sosa:madeBySensor");
  static const Iri result = Iri::from_prefixed("sosa:hasSimpleResult");
  static const Iri time = Iri::from_prefixed("sosa:resultTime");
  static const Term observation = Iri::from_prefixed("sosa:Observation");
  if (!predicate) return false;
  if (*predicate == made_by || *predicate == result || *predicate == time) return true;
  return *predicate == vocab::rdf_type() && object && *object == observation;
}

void VirtualBinding::materialize(const std::function<void(const Triple&)>& emit) const {
  if (!source) throw events::SourceUnavailable("virtual binding '" + name + "' has no source");
  static const Iri made_by = Iri::from_prefixed("sosa:madeBySensor");
  static const Iri result = Iri::from_prefixed("sosa:hasSimpleResult");
  static const Iri time = Iri::from_prefixed("sosa:resultTime");
  static const Iri observation = Iri::from_prefixed("sosa:Observation");
  source->scan([&](const plant::SensorRecord& r) {
    const auto t_ms = static_cast<long long>(std::llround(r.t_s * 1000.0));
    const Iri obs = Iri::from_prefixed("ex:obs_" + r.sensor_id + "_" + std::to_string(t_ms));
    emit({obs, vocab::rdf_type(), observation});
    emit({obs, made_by, Iri::from_prefixed("ex:" + r.sensor_id)});
    emit({obs, result, Literal::of(r.value)});
    emit({obs, time, Literal::of(r.t_s)});
  });
}

KnowledgeGraph::KnowledgeGraph() : asserted_(std::make_shared<TripleIndex>()) {}

const TripleIndex& KnowledgeGraph::inferred_index() const {
  static const TripleIndex empty;
  return inferred_ ? *inferred_ : empty;
}

std::set<Triple> KnowledgeGraph::all_triples() const {
  std::set<Triple> out = asserted_->all();
  if (inferred_) out.insert(inferred_->all().begin(), inferred_->all().end());
  return out;
}

TripleIndex& KnowledgeGraph::mutable_asserted() {
  if (asserted_.use_count() > 1) asserted_ = std::make_shared<TripleIndex>(*asserted_);
  inferred_.reset();
  return *asserted_;
}

bool KnowledgeGraph::insert(const Triple& t) {
  if (asserted_->contains(t)) return false;
  return mutable_asserted().insert(t);
}

bool KnowledgeGraph::retract(const Triple& t) {
  if (!asserted_->contains(t)) return false;
  return mutable_asserted().erase(t);
}

void KnowledgeGraph::add_binding(VirtualBinding binding) {
  remove_binding(binding.name);
  virtual_.push_back(std::move(binding));
}

bool KnowledgeGraph::remove_binding(const std::string& name) {
  auto it = std::remove_if(virtual_.begin(), virtual_.end(), [&](const VirtualBinding& b) { return b.name == name; });
  const bool removed = it != virtual_.end();
  virtual_.erase(it, virtual_.end());
  return removed;
}

void KnowledgeGraph::set_inferred(TripleIndex inferred) {
  inferred_ = std::make_shared<const TripleIndex>(std::move(inferred));
}

KnowledgeGraph insert(KnowledgeGraph graph, std::span<const Triple> triples) {
  for (const auto& t : triples) graph.insert(t);
  return graph;
}

KnowledgeGraph retract(KnowledgeGraph graph, std::span<const Triple> triples) {
  for (const auto& t : triples) graph.retract(t);
  return graph;
}

std::string to_string(Alignment mechanism) {
  switch (mechanism) {
    case Alignment::EquivalentTo: return "equivalent_to";
    case Alignment::Subclass: return "subclass";
    case Alignment::AttributeToClass: return "attribute_to_class";
    case Alignment::RelationTo: return "relation_to";
  }
  return "";
}

Alignment alignment_from(const std::string& text) {
  for (auto m : {Alignment::EquivalentTo, Alignment::Subclass, Alignment::AttributeToClass, Alignment::RelationTo}) {
    if (to_string(m) == text) return m;
  }
  throw KgError("unknown alignment mechanism '" + text + "'");
}

Triple alignment_triple(Alignment mechanism, const Iri& a, const Iri& b) {
  switch (mechanism) {
    case Alignment::EquivalentTo: return {a, vocab::owl_equivalent_class(), b};
    case Alignment::Subclass: return {a, vocab::rdfs_sub_class_of(), b};
    case Alignment::AttributeToClass: return {a, vocab::ex_attribute_to_class(), b};
    case Alignment::RelationTo: return {a, vocab::ex_relation_to(), b};
  }
  throw KgError("unknown alignment mechanism");
}

KnowledgeGraph align(KnowledgeGraph graph, Alignment mechanism, const Iri& a, const Iri& b) {
  graph.insert(alignment_triple(mechanism, a, b));
  return graph;
}

namespace {

// One round of every rule over `closure`; returns triples not yet present.
std::vector<Triple> derive_round(const TripleIndex& closure) {
  std::vector<Triple> fresh;
  auto add = [&](Triple t) {
    if (!closure.contains(t)) fresh.push_back(std::move(t));
  };
  const Iri& type = vocab::rdf_type();
  const Iri& sub = vocab::rdfs_sub_class_of();
  const Iri& eqv = vocab::owl_equivalent_class();

  closure.match(nullptr, &sub, nullptr, [&](const Triple& ab) {
    const auto* b = std::get_if<Iri>(&ab.object);
    if (!b) return;
    closure.match(b, &sub, nullptr, [&](const Triple& bc) { add({ab.subject, sub, bc.object}); });
    const Term a_term = ab.subject;
    closure.match(nullptr, &type, &a_term, [&](const Triple& xa) { add({xa.subject, type, *b}); });
  });

  closure.match(nullptr, &eqv, nullptr, [&](const Triple& ab) {
    const auto* b = std::get_if<Iri>(&ab.object);
    if (!b) return;
    add({*b, eqv, ab.subject});
    add({ab.subject, sub, *b});
    add({*b, sub, ab.subject});
    closure.match(b, &eqv, nullptr, [&](const Triple& bc) { add({ab.subject, eqv, bc.object}); });
  });

  closure.match(nullptr, &vocab::ex_relation_to(), nullptr, [&](const Triple& ab) {
    const auto* b = std::get_if<Iri>(&ab.object);
    if (!b) return;
    closure.match(nullptr, &ab.subject, nullptr, [&](const Triple& xy) { add({xy.subject, *b, xy.object}); });
  });

  closure.match(nullptr, &vocab::ex_attribute_to_class(), nullptr, [&](const Triple& ac) {
    const auto* c = std::get_if<Iri>(&ac.object);
    if (!c) return;
    closure.match(nullptr, &ac.subject, nullptr, [&](const Triple& xv) { add({xv.subject, type, *c}); });
  });
  return fresh;
}

}  // namespace

KnowledgeGraph infer(KnowledgeGraph graph) {
  TripleIndex closure = graph.asserted_index();
  for (;;) {
    auto fresh = derive_round(closure);
    bool grew = false;
    for (const auto& t : fresh) grew |= closure.insert(t);
    if (!grew) break;
  }
  TripleIndex inferred;
  for (const auto& t : closure.all()) {
    if (!graph.contains(t)) inferred.insert(t);
  }
  graph.set_inferred(std::move(inferred));
  return graph;
}

KnowledgeGraph bind_virtual(KnowledgeGraph graph, VirtualBinding binding) {
  if (binding.name.empty()) throw KgError("virtual binding needs a name");
  graph.add_binding(std::move(binding));
  return graph;
}

KnowledgeGraph unbind_virtual(KnowledgeGraph graph, const std::string& name) {
  graph.remove_binding(name);
  return graph;
}

}  // namespace mixdiag::kg
