#include <filesystem>

#include <fmt/core.h>

#include "doctest.h"
#include "helpers.hpp"
#include "mixdiag/pipeline.hpp"
#include "mixdiag/text.hpp"

using namespace mixdiag;
using namespace mixdiag::pipeline;

namespace {

/// Shared blockage and nominal runs; the pipeline is deterministic, so once is enough.
const PipelineResult& run_once(Scenario s) {
  static std::map<Scenario, PipelineResult> cache;
  auto it = cache.find(s);
  if (it == cache.end()) {
    PipelineOptions o;
    o.scenario = s;
    o.out_dir = helpers::scratch_dir("pipeline_" + to_string(s));
    it = cache.emplace(s, run_pipeline(o)).first;
  }
  return it->second;
}

std::string out_dir(Scenario s) {
  return (std::filesystem::temp_directory_path() / ("mixdiag_test_pipeline_" + to_string(s))).string();
}

const char* kOrsdOneQuestion = R"({"questions": [
  {"id": "Q", "phase": "contextualization", "question": "tanks?", "query": "SELECT ?t WHERE { ?t a ex:Tank }"}]})";

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("anomaly service and gateway") {
    const auto& blockage = run_once(Scenario::Blockage);
    const auto& nominal = run_once(Scenario::Nominal);
    const anomaly::DetectionSettings settings;
    const auto b = anomaly_service(out_dir(Scenario::Blockage) + "/automaton.json",
                                   out_dir(Scenario::Blockage) + "/scenario_trace.json", settings);
    CHECK(b.gateway);
    CHECK(b.anomalies == blockage.anomalies);
    CHECK(b.anomalies.size() == 1);
    const auto n = anomaly_service(out_dir(Scenario::Nominal) + "/automaton.json",
                                   out_dir(Scenario::Nominal) + "/scenario_trace.json", settings);
    CHECK_FALSE(n.gateway);
    CHECK(n.anomalies.empty());
    CHECK(nominal.anomalies.empty());
    CHECK_THROWS(anomaly_service("/nonexistent/automaton.json", "/nonexistent/trace.json", settings));
  }

  TEST_CASE("context for the blockage anomaly") {
    const auto& r = run_once(Scenario::Blockage);
    const auto ctx = context_service(r.graph, r.anomalies);
    REQUIRE(ctx.size() == 1);
    CHECK(ctx[0].resolved);
    CHECK(ctx[0].source_label == "P201");
    CHECK(ctx[0].target_label == "V205");
    CHECK(ctx[0].equipment == std::vector<kg::Iri>{kg::iri("ex:P201")});
    CHECK(ctx[0].functions == std::vector<kg::Iri>{kg::iri("ex:Transfer")});
    CHECK(ctx[0].sensors == std::vector<kg::Iri>{kg::iri("ex:F201")});
    CHECK(context_service(r.graph, {}).empty());

    auto stray = r.anomalies;
    stray.front().event_label = "V999\xE2\x86\x91";
    const auto unresolved = context_service(r.graph, stray);
    REQUIRE(unresolved.size() == 1);
    CHECK_FALSE(unresolved[0].resolved);
  }

  TEST_CASE("reports") {
    const auto empty = report_service("nominal", 10.0, {}, {}, {});
    CHECK(render_report_text(empty).find("No anomalies detected.") != std::string::npos);
    CHECK(render_report_json(empty).find("\"anomaly_count\": 0") != std::string::npos);

    const auto& r = run_once(Scenario::Blockage);
    const auto text = render_report_text(r.report);
    const auto json = render_report_json(r.report);
    CHECK(text.find("30") != std::string::npos);
    CHECK(json.find(fmt::format("\"deviation_s\": {}", *r.anomalies.front().deviation_s)) != std::string::npos);
    CHECK(text == text::read_file(out_dir(Scenario::Blockage) + "/report.txt"));
    CHECK(json == text::read_file(out_dir(Scenario::Blockage) + "/report.json"));
  }

  TEST_CASE("ORSD validation") {
    const auto orsd = load_orsd(default_data_dir() + "/orsd.json");
    CHECK(orsd.questions.size() == 5);
    for (const auto& r : validate_orsd(kg::KnowledgeGraph{}, orsd)) CHECK_FALSE(r.passed);

    kg::KnowledgeGraph one;
    one.insert({kg::iri("ex:B201"), kg::vocab::rdf_type(), kg::iri("ex:Tank")});
    const auto res = validate_orsd(one, parse_orsd(kOrsdOneQuestion));
    REQUIRE(res.size() == 1);
    CHECK(res[0].passed);
    CHECK_FALSE(res[0].has_expectation);

    for (const auto& q : validate_orsd(run_once(Scenario::Blockage).graph, orsd)) {
      CHECK_MESSAGE(q.passed, q.id);
    }
    for (const auto& q : run_once(Scenario::Nominal).validation) {
      if (q.phase == CqPhase::Contextualization) CHECK_MESSAGE(q.passed, q.id);
    }
  }

  TEST_CASE("ORSD parse errors") {
    CHECK_THROWS_AS(parse_orsd("{"), ParseError);
    CHECK_THROWS_AS(parse_orsd(R"({"questions": [{"id": "Q", "phase": "later", "question": "?", "query": "SELECT * WHERE { ?a ?b ?c }"}]})"),
                    ParseError);
    CHECK_THROWS(parse_orsd(R"({"questions": [{"id": "Q", "phase": "diagnosis", "question": "?", "query": "SELECT WHERE"}]})"));
    CHECK(parse_term("\"30\"^^xsd:double") == kg::Term(kg::Literal::of(30.0)));
    CHECK(parse_term("ex:B201") == kg::Term(kg::iri("ex:B201")));
  }

  TEST_CASE("nominal run") {
    const auto& r = run_once(Scenario::Nominal);
    CHECK(r.report.anomalies.empty());
    CHECK(r.report.contexts.empty());
    CHECK(r.automaton.states().size() == 7);
    for (const char* f : {"nominal_log.csv", "scenario_log.csv", "scenario_trace.json", "automaton.json",
                          "anomalies.json", "graph.nt", "validation.json", "report.json", "report.txt"}) {
      CHECK_MESSAGE(std::filesystem::exists(out_dir(Scenario::Nominal) + "/" + f), f);
    }
  }

  TEST_CASE("blockage run") {
    const auto& r = run_once(Scenario::Blockage);
    REQUIRE(r.anomalies.size() == 1);
    CHECK(r.anomalies.front().kind == anomaly::AnomalyKind::TimingAboveMax);
    CHECK(r.report.contexts.size() == 1);
    for (const auto& q : r.validation) {
      if (q.phase == CqPhase::Diagnosis) CHECK_MESSAGE(q.passed, q.id);
    }
  }

  TEST_CASE("scenario names") {
    CHECK(scenario_from("leakage") == Scenario::Leakage);
    CHECK_THROWS_AS(scenario_from("flood"), PreconditionError);
    CHECK(scenario_faults(Scenario::Nominal).empty());
  }

  TEST_CASE("stage failures name the stage") {
    PipelineOptions o;
    o.out_dir = helpers::scratch_dir("pipeline_bad_config");
    o.config_file = o.out_dir + "/missing.json";
    try {
      run_pipeline(o);
      FAIL("expected StageError");
    } catch (const StageError& e) {
      CHECK(e.stage() == "config");
    }
    o.config_file.clear();
    o.orsd_file = o.out_dir + "/missing_orsd.json";
    try {
      run_pipeline(o);
      FAIL("expected StageError");
    } catch (const StageError& e) {
      CHECK(e.stage() == "validate");
    }
    o.orsd_file.clear();
    o.nominal_cycles = 0;
    try {
      run_pipeline(o);
      FAIL("expected StageError");
    } catch (const StageError& e) {
      CHECK(e.stage() == "config");
    }
  }
}
