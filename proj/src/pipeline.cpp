#include "mixdiag/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include <fmt/format.h>

#include "json.hpp"
#include "mixdiag/annotate.hpp"
#include "mixdiag/events.hpp"
#include "mixdiag/kg/mapping.hpp"
#include "mixdiag/kg/ntriples.hpp"
#include "mixdiag/text.hpp"

namespace mixdiag::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;

std::string to_string(CqPhase phase) {
  return phase == CqPhase::Contextualization ? "contextualization" : "diagnosis";
}

kg::Term parse_term(const std::string& raw) {
  const std::string_view s = text::trim(raw);
  if (s.empty()) throw ParseError(0, "empty term");
  if (s.front() != '"') {
    try {
      return kg::Iri::parse(s);
    } catch (const kg::KgError& e) {
      throw ParseError(0, e.what());
    }
  }
  std::string lex;
  std::size_t i = 1;
  for (; i < s.size() && s[i] != '"'; ++i) {
    char c = s[i];
    if (c == '\\' && i + 1 < s.size()) {
      switch (s[++i]) {
        case 'n': c = '\n'; break;
        case 't': c = '\t'; break;
        case 'r': c = '\r'; break;
        default: c = s[i];
      }
    }
    lex += c;
  }
  if (i >= s.size()) throw ParseError(0, "unterminated literal " + std::string(s));
  const std::string_view rest = s.substr(i + 1);
  try {
    if (rest.empty()) return kg::Literal::of(lex);
    if (rest.substr(0, 2) != "^^") throw ParseError(0, "expected ^^datatype after literal " + std::string(s));
    return kg::Literal::make(lex, kg::datatype_from_iri(kg::Iri::parse(rest.substr(2))));
  } catch (const kg::KgError& e) {
    throw ParseError(0, e.what());
  }
}

Orsd parse_orsd(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(0, std::string("ORSD: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("questions") || !doc["questions"].is_array()) {
    throw ParseError(0, "ORSD: expected an object with a 'questions' array");
  }
  Orsd orsd;
  for (const auto& j : doc["questions"]) {
    CompetencyQuestion cq;
    try {
      cq.id = j.at("id").get<std::string>();
      const std::string phase = j.at("phase").get<std::string>();
      if (phase == "contextualization") {
        cq.phase = CqPhase::Contextualization;
      } else if (phase == "diagnosis") {
        cq.phase = CqPhase::Diagnosis;
      } else {
        throw ParseError(0, "ORSD " + cq.id + ": unknown phase '" + phase + "'");
      }
      cq.question = j.at("question").get<std::string>();
      cq.query_text = j.at("query").get<std::string>();
      if (j.contains("expected") && !j["expected"].is_null()) {
        std::vector<kg::Solution> rows;
        for (const auto& row : j["expected"]) {
          kg::Solution sol;
          for (const auto& [var, term] : row.items()) sol.emplace(var, parse_term(term.get<std::string>()));
          rows.push_back(std::move(sol));
        }
        cq.expected = std::move(rows);
      }
    } catch (const json::exception& e) {
      throw ParseError(0, "ORSD " + cq.id + ": " + e.what());
    }
    try {
      cq.query = kg::parse_query(cq.query_text);
    } catch (const kg::QueryError& e) {
      throw ParseError(0, "ORSD " + cq.id + ": " + e.what());
    }
    if (std::any_of(orsd.questions.begin(), orsd.questions.end(),
                    [&](const CompetencyQuestion& q) { return q.id == cq.id; })) {
      throw ParseError(0, "ORSD: duplicate question id '" + cq.id + "'");
    }
    orsd.questions.push_back(std::move(cq));
  }
  return orsd;
}

Orsd load_orsd(const std::string& path) { return parse_orsd(text::read_file(path)); }

std::vector<CqResult> validate_orsd(const kg::KnowledgeGraph& graph, const Orsd& orsd) {
  std::vector<CqResult> out;
  for (const auto& cq : orsd.questions) {
    CqResult r;
    r.id = cq.id;
    r.phase = cq.phase;
    r.question = cq.question;
    r.has_expectation = cq.expected.has_value();
    try {
      r.actual = kg::query(graph, cq.query);
    } catch (const Error& e) {
      r.error = e.what();
      out.push_back(std::move(r));
      continue;
    }
    if (cq.expected) {
      auto want = *cq.expected;
      auto got = r.actual;
      std::sort(want.begin(), want.end());
      std::sort(got.begin(), got.end());
      r.passed = want == got;
    } else {
      r.passed = !r.actual.empty();
    }
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Services

AnomalyServiceResult anomaly_service(const std::string& automaton_file, const std::string& trace_file,
                                     const anomaly::DetectionSettings& settings) {
  const auto automaton = ta::deserialize(text::read_file(automaton_file));
  const auto trace = events::trace_from_json_text(text::read_file(trace_file));
  AnomalyServiceResult r;
  r.anomalies = anomaly::detect(automaton, trace, settings).anomalies;
  r.gateway = !r.anomalies.empty();
  return r;
}

namespace {

std::string angle(const kg::Iri& i) { return "<" + i.str() + ">"; }

std::vector<kg::Iri> iris(const kg::KnowledgeGraph& graph, const std::string& q, const std::string& var) {
  std::vector<kg::Iri> out;
  for (const auto& sol : kg::query(graph, kg::parse_query(q))) {
    if (const auto* i = std::get_if<kg::Iri>(&sol.at(var))) {
      if (std::find(out.begin(), out.end(), *i) == out.end()) out.push_back(*i);
    }
  }
  return out;
}

}  // namespace

std::vector<AnomalyContext> context_service(const kg::KnowledgeGraph& graph,
                                            const std::vector<anomaly::Anomaly>& anomalies) {
  std::vector<AnomalyContext> out;
  for (const auto& a : anomalies) {
    AnomalyContext ctx;
    if (anomaly::is_timing(a.kind) && a.source.id && a.target && a.target->id) {
      const kg::Iri t = annotate::transition_iri(*a.source.id, a.event_label, *a.target->id);
      const auto rows = kg::query(
          graph, kg::parse_query("SELECT ?s ?g ?sl ?gl WHERE { " + angle(t) + " a sm:Transition . " + angle(t) +
                                 " sm:source ?s . " + angle(t) + " sm:target ?g . ?s rdfs:label ?sl . "
                                 "?g rdfs:label ?gl }"));
      if (rows.size() == 1) {
        const auto& row = rows.front();
        ctx.resolved = true;
        ctx.transition = t;
        ctx.source_state = std::get<kg::Iri>(row.at("s"));
        ctx.target_state = std::get<kg::Iri>(row.at("g"));
        ctx.source_label = std::get<kg::Literal>(row.at("sl")).lexical();
        ctx.target_label = std::get<kg::Literal>(row.at("gl")).lexical();
        ctx.equipment = iris(graph, "SELECT ?e WHERE { " + angle(t) + " isa88:relatesToEquipment ?e }", "e");
        for (const auto& e : ctx.equipment) {
          for (const auto& f : iris(graph,
                                    "SELECT ?f WHERE { ?f a vdi3682:ProcessOperator . ?f vdi3682:isAssignedTo " +
                                        angle(e) + " }",
                                    "f")) {
            ctx.functions.push_back(f);
          }
          for (const auto& s :
               iris(graph, "SELECT ?s WHERE { ?s a sosa:Sensor . ?s isa88:isPartOf " + angle(e) + " }", "s")) {
            ctx.sensors.push_back(s);
          }
        }
      }
    }
    out.push_back(std::move(ctx));
  }
  return out;
}

Report report_service(std::string scenario, double generated_at_s, std::vector<anomaly::Anomaly> anomalies,
                      std::vector<AnomalyContext> contexts, std::vector<CqResult> cq_answers) {
  if (contexts.size() != anomalies.size()) contexts.resize(anomalies.size());
  Report r;
  r.scenario = std::move(scenario);
  r.generated_at_s = generated_at_s;
  r.anomalies = std::move(anomalies);
  r.contexts = std::move(contexts);
  r.cq_answers = std::move(cq_answers);
  return r;
}

namespace {

json iri_list(const std::vector<kg::Iri>& v) {
  json j = json::array();
  for (const auto& i : v) j.push_back(i.compact());
  return j;
}

json context_json(const AnomalyContext& c) {
  if (!c.resolved) return json{{"resolved", false}, {"status", "unresolved"}};
  return json{{"resolved", true},
              {"transition", c.transition->compact()},
              {"source_state", c.source_state->compact()},
              {"target_state", c.target_state->compact()},
              {"source_label", c.source_label},
              {"target_label", c.target_label},
              {"equipment", iri_list(c.equipment)},
              {"functions", iri_list(c.functions)},
              {"sensors", iri_list(c.sensors)}};
}

json cq_json(const CqResult& r) {
  json rows = json::array();
  for (const auto& sol : r.actual) {
    json row = json::object();
    for (const auto& [var, term] : sol) row[var] = kg::to_string(term);
    rows.push_back(std::move(row));
  }
  json j{{"id", r.id},
         {"phase", to_string(r.phase)},
         {"question", r.question},
         {"has_expectation", r.has_expectation},
         {"passed", r.passed},
         {"rows", std::move(rows)}};
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

std::string row_text(const kg::Solution& sol) {
  std::string out;
  for (const auto& [var, term] : sol) {
    if (!out.empty()) out += ' ';
    out += "?" + var + "=" + kg::to_string(term);
  }
  return out;
}

std::string join(const std::vector<kg::Iri>& v) {
  if (v.empty()) return "(none)";
  std::string out;
  for (const auto& i : v) out += (out.empty() ? "" : ", ") + i.compact();
  return out;
}

}  // namespace

std::string render_report_json(const Report& report) {
  json anomalies = json::parse(anomaly::anomalies_to_json_text(report.anomalies));
  for (std::size_t i = 0; i < anomalies.size(); ++i) anomalies[i]["context"] = context_json(report.contexts[i]);
  json cqs = json::array();
  for (const auto& r : report.cq_answers) cqs.push_back(cq_json(r));
  json j{{"scenario", report.scenario},
         {"generated_at_s", report.generated_at_s},
         {"anomaly_count", report.anomalies.size()},
         {"status", report.anomalies.empty() ? "no anomalies detected" : "anomalies detected"},
         {"anomalies", std::move(anomalies)},
         {"competency_questions", std::move(cqs)}};
  return j.dump(2) + "\n";
}

std::string render_report_text(const Report& report) {
  // Human-readable numbers are rounded to microseconds; report.json keeps exact values.
  auto format_double = [](double v) { return text::format_double(std::round(v * 1e6) / 1e6); };
  std::string out = fmt::format("Diagnosis report: scenario {}, generated at t={} s\n\n", report.scenario,
                                format_double(report.generated_at_s));
  if (report.anomalies.empty()) {
    out += "No anomalies detected.\n";
  } else {
    out += fmt::format("{} anomal{} detected.\n", report.anomalies.size(), report.anomalies.size() == 1 ? "y" : "ies");
  }
  for (std::size_t i = 0; i < report.anomalies.size(); ++i) {
    const auto& a = report.anomalies[i];
    const auto& c = report.contexts[i];
    out += fmt::format("\n[{}] {} at t={} s, event {}\n", i + 1, anomaly::to_string(a.kind), format_double(a.at_t_s),
                       a.event_label);
    if (a.observed_dwell_s) {
      out += fmt::format("    observed dwell {} s, bound {} s, deviation {} s\n", format_double(*a.observed_dwell_s),
                         format_double(*a.bound_s), format_double(*a.deviation_s));
    }
    if (!c.resolved) {
      out += "    context: unresolved\n";
      continue;
    }
    out += fmt::format("    transition {} ({} -> {})\n", c.transition->compact(), c.source_label, c.target_label);
    out += fmt::format("    equipment: {}\n", join(c.equipment));
    out += fmt::format("    function: {}\n", join(c.functions));
    out += fmt::format("    sensors: {}\n", join(c.sensors));
  }
  if (!report.cq_answers.empty()) out += "\nCompetency questions\n";
  for (const auto& r : report.cq_answers) {
    out += fmt::format("  {} {}  {}\n", r.id, r.passed ? "pass" : "FAIL", r.question);
    for (const auto& sol : r.actual) out += "      " + row_text(sol) + "\n";
    if (!r.error.empty()) out += "      error: " + r.error + "\n";
  }
  return out;
}

std::string render_validation_json(const std::vector<CqResult>& results) {
  json j = json::array();
  for (const auto& r : results) j.push_back(cq_json(r));
  const bool all = std::all_of(results.begin(), results.end(), [](const CqResult& r) { return r.passed; });
  return json{{"all_passed", all}, {"questions", std::move(j)}}.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Graph population

std::map<ta::StateId, kg::Iri> equipment_map_for(const ta::TimedAutomaton& automaton) {
  std::map<ta::StateId, kg::Iri> out;
  for (const auto& s : automaton.states()) {
    const auto active = s.vector.active();
    if (!active.empty()) out.emplace(s.id, kg::Iri::from_prefixed("ex:" + active.front()));
  }
  return out;
}

namespace {

std::string csv_field(const std::string& v) {
  if (v.find_first_of(",\"\n") == std::string::npos) return v;
  std::string out = "\"";
  for (char c : v) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

std::string csv(const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + csv_field(row[i]);
    out += '\n';
  }
  return out;
}

}  // namespace

void export_sources(const plant::PlantConfig& config, const std::string& dir) {
  fs::create_directories(dir);
  std::vector<std::vector<std::string>> tanks{{"id", "capacity_l", "initial_l"}};
  for (const auto& t : config.tanks) {
    tanks.push_back({t.id, text::format_double(t.capacity_l), text::format_double(t.initial_l)});
  }
  std::vector<std::vector<std::string>> functions{{"function", "resource"}};
  std::vector<std::vector<std::string>> inputs{{"function", "product"}};
  std::vector<std::vector<std::string>> outputs{{"function", "product"}};
  for (const auto& phase : config.phases) {
    for (const auto& [id, on] : phase.actuator_vector) {
      if (!on) continue;
      const auto* a = config.find_actuator(id);
      if (!a) continue;
      functions.push_back({phase.name, id});
      if (a->moves_liquid()) {
        inputs.push_back({phase.name, a->from});
        if (!a->to.empty()) outputs.push_back({phase.name, a->to});
      } else if (!a->acts_on.empty()) {
        inputs.push_back({phase.name, a->acts_on});
        outputs.push_back({phase.name, a->acts_on});
      }
    }
  }
  text::write_file(dir + "/tanks.csv", csv(tanks));
  text::write_file(dir + "/functions.csv", csv(functions));
  text::write_file(dir + "/function_inputs.csv", csv(inputs));
  text::write_file(dir + "/function_outputs.csv", csv(outputs));
  text::write_file(dir + "/plant.json", plant::config_to_json_text(config));
}

kg::KnowledgeGraph apply_alignments(kg::KnowledgeGraph graph) {
  using kg::Alignment;
  using kg::iri;
  graph = kg::align(std::move(graph), Alignment::EquivalentTo, iri("sosa:Actuator"), iri("vdi3682:TechnicalResource"));
  graph = kg::align(std::move(graph), Alignment::Subclass, iri("sm:StateMachine"), iri("iso17359:DiagnosticModel"));
  graph = kg::align(std::move(graph), Alignment::Subclass, iri("ex:TimingAnomaly"), iri("iso17359:Symptom"));
  graph = kg::align(std::move(graph), Alignment::Subclass, iri("ex:BehaviorAnomaly"), iri("iso17359:Symptom"));
  graph = kg::align(std::move(graph), Alignment::Subclass, iri("ex:Tank"), iri("isa88:Equipment"));
  graph = kg::align(std::move(graph), Alignment::AttributeToClass, iri("ex:capacityLiters"), iri("ex:Tank"));
  graph = kg::align(std::move(graph), Alignment::RelationTo, iri("ex:attachedTo"), iri("isa88:isPartOf"));
  return graph;
}

namespace {

kg::Update ground_insert(const std::vector<kg::Triple>& triples) {
  kg::Update u;
  for (const auto& t : triples) {
    kg::PatternTerm o;
    if (const auto* i = std::get_if<kg::Iri>(&t.object)) {
      o = *i;
    } else {
      o = std::get<kg::Literal>(t.object);
    }
    u.insert.push_back({t.subject, t.predicate, o});
  }
  return u;
}

}  // namespace

kg::KnowledgeGraph populate_graph(const PopulateInputs& inputs, const ta::TimedAutomaton& automaton,
                                  const std::vector<anomaly::Anomaly>& anomalies) {
  const auto rules = kg::parse_mapping_rules(text::read_file(inputs.mappings_file));
  const auto sources = kg::SourceSet::load(rules, inputs.sources_dir);
  const auto mapped = kg::apply_mappings(rules, sources);
  kg::KnowledgeGraph graph = kg::insert(kg::KnowledgeGraph{}, mapped);
  graph = apply_alignments(std::move(graph));

  const auto machine = annotate::annotate_automaton(automaton, equipment_map_for(automaton));
  graph = kg::update(std::move(graph), ground_insert(machine));
  graph = kg::update(std::move(graph), ground_insert(annotate::annotate_anomalies(anomalies, machine)));

  if (!inputs.sensor_log_file.empty()) {
    graph = kg::bind_virtual(std::move(graph),
                             {"sensor-log", std::make_shared<const events::SensorCsvSource>(inputs.sensor_log_file)});
  }
  return kg::infer(std::move(graph));
}

// ---------------------------------------------------------------------------
// End to end

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::Nominal: return "nominal";
    case Scenario::Leakage: return "leakage";
    case Scenario::Blockage: return "blockage";
  }
  return "";
}

Scenario scenario_from(const std::string& text) {
  for (auto s : {Scenario::Nominal, Scenario::Leakage, Scenario::Blockage}) {
    if (to_string(s) == text) return s;
  }
  throw PreconditionError("unknown scenario '" + text + "' (expected nominal, leakage or blockage)");
}

std::vector<plant::FaultSpec> scenario_faults(Scenario s) {
  switch (s) {
    case Scenario::Nominal: return {};
    case Scenario::Leakage: return {plant::parse_fault("leakage:B204:0.02")};
    case Scenario::Blockage: return {plant::parse_fault("blockage:P201:0.5")};
  }
  return {};
}

std::string default_data_dir() {
#ifdef MIXDIAG_DATA_DIR
  return MIXDIAG_DATA_DIR;
#else
  return "data";
#endif
}

namespace {

template <class F>
auto stage(const char* name, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

double end_time(const plant::SimulationLog& log) {
  double t = 0.0;
  if (!log.actuator_records.empty()) t = std::max(t, log.actuator_records.back().t_s);
  if (!log.sensor_records.empty()) t = std::max(t, log.sensor_records.back().t_s);
  return t;
}

}  // namespace

PipelineResult run_pipeline(const PipelineOptions& options) {
  const std::string out = options.out_dir.empty() ? std::string(".") : options.out_dir;
  const std::string data = default_data_dir();
  auto path = [&](const char* name) { return out + "/" + name; };

  const plant::PlantConfig config = stage("config", [&] {
    fs::create_directories(out);
    auto c = options.config_file.empty() ? plant::default_config() : plant::load_config(options.config_file);
    plant::validate(c);
    options.settings.validate();
    if (options.nominal_cycles < 1) throw PreconditionError("nominal cycles must be at least 1");
    return c;
  });

  const auto [nominal_log, scenario_log] = stage("simulate", [&] {
    auto nominal = plant::simulate(config, options.nominal_cycles, {}, options.seed);
    auto scenario = plant::simulate(config, 1, scenario_faults(options.scenario), options.seed + 1);
    text::write_file(path("nominal_log.csv"), plant::write_log_csv(nominal));
    text::write_file(path("scenario_log.csv"), plant::write_log_csv(scenario));
    return std::make_pair(std::move(nominal), std::move(scenario));
  });

  const auto nominal_trace = stage("trace", [&] {
    text::write_file(path("scenario_trace.json"), events::trace_to_json_text(events::to_trace(scenario_log, config)));
    return events::to_trace(nominal_log, config);
  });

  PipelineResult result;
  result.automaton = stage("learn", [&] {
    const auto idle = events::all_off(config.actuator_ids());
    auto a = ta::learn(events::split_cycles(nominal_trace, idle));
    text::write_file(path("automaton.json"), ta::serialize(a));
    return a;
  });

  const auto detected = stage("detect", [&] {
    auto r = anomaly_service(path("automaton.json"), path("scenario_trace.json"), options.settings);
    text::write_file(path("anomalies.json"), anomaly::anomalies_to_json_text(r.anomalies));
    return r;
  });
  result.anomalies = detected.anomalies;

  result.graph = stage("populate", [&] {
    export_sources(config, path("sources"));
    PopulateInputs in;
    in.mappings_file = options.mappings_file.empty() ? data + "/mappings.json" : options.mappings_file;
    in.sources_dir = path("sources");
    in.sensor_log_file = path("scenario_log.csv");
    auto g = populate_graph(in, result.automaton, result.anomalies);
    text::write_file(path("graph.nt"), kg::serialize_ntriples(g));
    return g;
  });

  // The single gateway: context is only collected when something was found.
  std::vector<AnomalyContext> contexts;
  if (detected.gateway) {
    contexts = stage("context", [&] { return context_service(result.graph, result.anomalies); });
  }

  result.validation = stage("validate", [&] {
    const auto orsd = load_orsd(options.orsd_file.empty() ? data + "/orsd.json" : options.orsd_file);
    auto v = validate_orsd(result.graph, orsd);
    text::write_file(path("validation.json"), render_validation_json(v));
    return v;
  });

  result.report = stage("report", [&] {
    auto r = report_service(to_string(options.scenario), end_time(scenario_log), result.anomalies, contexts,
                            result.validation);
    text::write_file(path("report.json"), render_report_json(r));
    text::write_file(path("report.txt"), render_report_text(r));
    return r;
  });
  return result;
}

}  // namespace mixdiag::pipeline
