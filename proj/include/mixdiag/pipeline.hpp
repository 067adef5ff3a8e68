#pragma once

// The diagnosis flow: anomaly service, a single gateway on "anomalies found",
// context collection over the knowledge graph, and the technician report.
// Competency questions from an ORSD file validate the populated graph.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mixdiag/anomaly.hpp"
#include "mixdiag/automaton.hpp"
#include "mixdiag/kg/graph.hpp"
#include "mixdiag/kg/query.hpp"
#include "mixdiag/plant.hpp"

namespace mixdiag::pipeline {

/// A pipeline stage failed; what() starts with the stage name.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& reason)
      : Error(stage + ": " + reason), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

enum class CqPhase { Contextualization, Diagnosis };
std::string to_string(CqPhase phase);

struct CompetencyQuestion {
  std::string id;
  CqPhase phase = CqPhase::Contextualization;
  std::string question;
  std::string query_text;
  kg::Query query;
  std::optional<std::vector<kg::Solution>> expected;
};

struct Orsd {
  std::vector<CompetencyQuestion> questions;
};

/// `{"questions": [{"id", "phase", "question", "query", "expected"?: [{var: term}]}]}`
/// where a term is `prefix:local`, `<iri>` or `"lex"^^xsd:type`.
Orsd parse_orsd(const std::string& json_text);
Orsd load_orsd(const std::string& path);

/// Inverse of kg::to_string(Term).
kg::Term parse_term(const std::string& text);

struct CqResult {
  std::string id;
  CqPhase phase = CqPhase::Contextualization;
  std::string question;
  bool has_expectation = false;
  bool passed = false;
  std::vector<kg::Solution> actual;
  std::string error;  // evaluation failure, empty otherwise
};

/// Passes iff the expected rows equal the actual rows as multisets, or, for a
/// question without expectation, iff there is at least one row.
std::vector<CqResult> validate_orsd(const kg::KnowledgeGraph& graph, const Orsd& orsd);

// ---------------------------------------------------------------------------
// Services

struct AnomalyServiceResult {
  std::vector<anomaly::Anomaly> anomalies;
  bool gateway = false;  // anomalies found
};

AnomalyServiceResult anomaly_service(const std::string& automaton_file, const std::string& trace_file,
                                     const anomaly::DetectionSettings& settings);

struct AnomalyContext {
  bool resolved = false;
  std::optional<kg::Iri> transition;
  std::optional<kg::Iri> source_state;
  std::optional<kg::Iri> target_state;
  std::string source_label;
  std::string target_label;
  std::vector<kg::Iri> equipment;
  std::vector<kg::Iri> functions;
  std::vector<kg::Iri> sensors;
};

/// One context per anomaly, in order. Timing anomalies are resolved through
/// their annotated transition; anything else stays unresolved.
std::vector<AnomalyContext> context_service(const kg::KnowledgeGraph& graph,
                                            const std::vector<anomaly::Anomaly>& anomalies);

struct Report {
  std::string scenario;
  double generated_at_s = 0.0;  // simulated time at the end of the scenario log
  std::vector<anomaly::Anomaly> anomalies;
  std::vector<AnomalyContext> contexts;
  std::vector<CqResult> cq_answers;
};

Report report_service(std::string scenario, double generated_at_s, std::vector<anomaly::Anomaly> anomalies,
                      std::vector<AnomalyContext> contexts, std::vector<CqResult> cq_answers);
std::string render_report_json(const Report& report);
std::string render_report_text(const Report& report);
std::string render_validation_json(const std::vector<CqResult>& results);

// ---------------------------------------------------------------------------
// Graph population

/// State id -> the first actuator active in that state (idle states get none).
std::map<ta::StateId, kg::Iri> equipment_map_for(const ta::TimedAutomaton& automaton);

/// Writes the mapping sources derived from `config` into `dir`: tanks.csv,
/// functions.csv, function_inputs.csv, function_outputs.csv and plant.json.
void export_sources(const plant::PlantConfig& config, const std::string& dir);

/// The fixed alignment set between the pattern vocabularies.
kg::KnowledgeGraph apply_alignments(kg::KnowledgeGraph graph);

struct PopulateInputs {
  std::string mappings_file;
  std::string sources_dir;
  std::string sensor_log_file;  // empty: no virtual binding
};

/// Mappings, alignments, automaton and anomaly annotation (via update), an
/// optional virtual binding of the sensor log, then inference.
kg::KnowledgeGraph populate_graph(const PopulateInputs& inputs, const ta::TimedAutomaton& automaton,
                                  const std::vector<anomaly::Anomaly>& anomalies);

// ---------------------------------------------------------------------------
// End to end

enum class Scenario { Nominal, Leakage, Blockage };
std::string to_string(Scenario s);
/// Throws PreconditionError for an unknown name.
Scenario scenario_from(const std::string& text);
std::vector<plant::FaultSpec> scenario_faults(Scenario s);

std::string default_data_dir();

struct PipelineOptions {
  std::string config_file;  // empty: built-in default plant
  Scenario scenario = Scenario::Nominal;
  std::string out_dir;
  std::uint64_t seed = 42;
  int nominal_cycles = 10;
  anomaly::DetectionSettings settings;
  std::string mappings_file;  // empty: <data>/mappings.json
  std::string orsd_file;      // empty: <data>/orsd.json
};

struct PipelineResult {
  ta::TimedAutomaton automaton;
  std::vector<anomaly::Anomaly> anomalies;
  kg::KnowledgeGraph graph;
  Report report;
  std::vector<CqResult> validation;
};

/// Writes nominal_log.csv, scenario_log.csv, scenario_trace.json,
/// automaton.json, anomalies.json, sources/, graph.nt, report.json,
/// report.txt and validation.json. Throws StageError.
PipelineResult run_pipeline(const PipelineOptions& options);

}  // namespace mixdiag::pipeline
