// mixdiag: command-line front end for simulation, learning, detection,
// annotation, querying and the end-to-end diagnosis pipeline.
//
// Exit codes: 0 success (no anomaly for `detect`), 2 anomalies found
// (`detect`), 1 any error.

#include <filesystem>
#include <iostream>
#include <memory>

#include "CLI11.hpp"
#include "mixdiag/anomaly.hpp"
#include "mixdiag/annotate.hpp"
#include "mixdiag/automaton.hpp"
#include "mixdiag/events.hpp"
#include "mixdiag/kg/ntriples.hpp"
#include "mixdiag/kg/query.hpp"
#include "mixdiag/pipeline.hpp"
#include "mixdiag/plant.hpp"
#include "mixdiag/text.hpp"

namespace {

using namespace mixdiag;

struct Common {
  std::string config_file;
  std::string output;
  std::uint64_t seed = 42;
  int cycles = 1;
  double tolerance = 0.5;
  double rel_tolerance = 0.10;
  std::string scenario = "nominal";
  std::string out_dir;
};

void emit(const std::string& output, const std::string& content) {
  if (output.empty() || output == "-") {
    std::cout << content;
  } else {
    text::write_file(output, content);
  }
}

plant::PlantConfig config_of(const Common& c) {
  return c.config_file.empty() ? plant::default_config() : plant::load_config(c.config_file);
}

events::EventTrace load_trace(const std::string& path, const plant::PlantConfig& config) {
  const std::string body = text::read_file(path);
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0) {
    return events::to_trace(events::parse_log(body), config);
  }
  return events::trace_from_json_text(body);
}

kg::KnowledgeGraph load_graph(const std::vector<std::string>& files, const std::string& sensor_log) {
  kg::KnowledgeGraph graph;
  for (const auto& f : files) {
    const auto part = kg::parse_ntriples(text::read_file(f));
    for (const auto& t : part.asserted()) graph.insert(t);
  }
  if (!sensor_log.empty()) {
    graph = kg::bind_virtual(std::move(graph),
                             {"sensor-log", std::make_shared<const events::SensorCsvSource>(sensor_log)});
  }
  return kg::infer(std::move(graph));
}

anomaly::DetectionSettings settings_of(const Common& c) {
  anomaly::DetectionSettings s{c.tolerance, c.rel_tolerance};
  s.validate();
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Timed-automaton anomaly detection with knowledge-graph diagnosis context"};
  app.require_subcommand(1);
  Common c;
  int code = 0;

  auto add_config = [&](CLI::App* sub) { sub->add_option("--config", c.config_file, "Plant configuration JSON"); };
  auto add_output = [&](CLI::App* sub) { sub->add_option("-o,--output", c.output, "Output file (default stdout)"); };
  auto add_tolerance = [&](CLI::App* sub) {
    sub->add_option("--tolerance", c.tolerance, "Absolute timing tolerance in seconds")->capture_default_str();
    sub->add_option("--rel-tolerance", c.rel_tolerance, "Relative timing tolerance")->capture_default_str();
  };

  // simulate
  std::vector<std::string> faults;
  auto* simulate = app.add_subcommand("simulate", "Simulate the plant and write a log CSV");
  add_config(simulate);
  add_output(simulate);
  simulate->add_option("--cycles", c.cycles, "Recipe cycles")->capture_default_str();
  simulate->add_option("--seed", c.seed, "Sensor noise seed")->capture_default_str();
  simulate->add_option("--scenario", c.scenario, "nominal, leakage or blockage")->capture_default_str();
  simulate->add_option("--fault", faults, "Extra fault kind:target:magnitude[:onset[:duration]]");
  simulate->callback([&] {
    const auto config = config_of(c);
    auto all = pipeline::scenario_faults(pipeline::scenario_from(c.scenario));
    for (const auto& f : faults) all.push_back(plant::parse_fault(f));
    emit(c.output, plant::write_log_csv(plant::simulate(config, c.cycles, all, c.seed)));
  });

  // trace
  std::string log_file;
  double merge_window = 0.0;
  auto* trace = app.add_subcommand("trace", "Turn a log CSV into an event trace JSON");
  add_config(trace);
  add_output(trace);
  trace->add_option("log", log_file, "Log CSV")->required();
  trace->add_option("--merge-window", merge_window, "Merge actuator changes within this many seconds");
  trace->callback([&] {
    const auto t = events::to_trace(events::parse_log(text::read_file(log_file)), config_of(c), merge_window);
    emit(c.output, events::trace_to_json_text(t));
  });

  // learn
  std::vector<std::string> log_files;
  auto* learn = app.add_subcommand("learn", "Learn a timed automaton from nominal log CSVs");
  add_config(learn);
  add_output(learn);
  learn->add_option("logs", log_files, "Nominal log CSVs")->required();
  learn->callback([&] {
    const auto config = config_of(c);
    const auto idle = events::all_off(config.actuator_ids());
    std::vector<events::EventTrace> cycles;
    for (const auto& f : log_files) {
      auto segments = events::split_cycles(events::to_trace(events::parse_log(text::read_file(f)), config), idle);
      cycles.insert(cycles.end(), segments.begin(), segments.end());
    }
    emit(c.output, ta::serialize(ta::learn(cycles)));
  });

  // detect
  std::string automaton_file, trace_file;
  auto* detect = app.add_subcommand("detect", "Check a trace (JSON or log CSV) against a learned automaton");
  add_config(detect);
  add_output(detect);
  add_tolerance(detect);
  detect->add_option("--automaton", automaton_file, "Automaton JSON")->required();
  detect->add_option("--trace", trace_file, "Trace JSON or log CSV")->required();
  detect->callback([&] {
    const auto automaton = ta::deserialize(text::read_file(automaton_file));
    const auto result = anomaly::detect(automaton, load_trace(trace_file, config_of(c)), settings_of(c));
    emit(c.output, anomaly::anomalies_to_json_text(result.anomalies) + "\n");
    if (result.initial_mismatch) std::cerr << "warning: trace did not start in the initial state\n";
    code = result.anomalies.empty() ? 0 : 2;
  });

  // annotate
  std::string anomalies_file;
  auto* annotate = app.add_subcommand("annotate", "Emit N-Triples for an automaton and its anomalies");
  add_output(annotate);
  annotate->add_option("--automaton", automaton_file, "Automaton JSON")->required();
  annotate->add_option("--anomalies", anomalies_file, "Anomaly JSON");
  annotate->callback([&] {
    const auto automaton = ta::deserialize(text::read_file(automaton_file));
    auto triples = annotate::annotate_automaton(automaton, pipeline::equipment_map_for(automaton));
    if (!anomalies_file.empty()) {
      const auto extra =
          annotate::annotate_anomalies(anomaly::anomalies_from_json_text(text::read_file(anomalies_file)), triples);
      triples.insert(triples.end(), extra.begin(), extra.end());
    }
    emit(c.output, kg::serialize_ntriples(std::set<kg::Triple>(triples.begin(), triples.end())));
  });

  // query
  std::vector<std::string> graph_files;
  std::string sensor_log, query_text, query_file;
  auto* query = app.add_subcommand("query", "Run a SELECT query over N-Triples files (after inference)");
  add_output(query);
  query->add_option("--graph", graph_files, "N-Triples file (repeatable)")->required()->allow_extra_args(false);
  query->add_option("--sensor-log", sensor_log, "Log CSV bound as virtual observations");
  auto* qtext = query->add_option("query", query_text, "Query text");
  query->add_option("--query-file", query_file, "File holding the query")->excludes(qtext);
  query->callback([&] {
    if (!query_file.empty()) query_text = text::read_file(query_file);
    if (query_text.empty()) throw PreconditionError("no query given");
    const auto q = kg::parse_query(query_text);
    const auto graph = load_graph(graph_files, sensor_log);
    const auto rows = kg::query(graph, q);
    const auto vars = q.select.empty() ? kg::pattern_variables(q.where) : q.select;
    std::string out;
    for (std::size_t i = 0; i < vars.size(); ++i) out += (i ? "\t?" : "?") + vars[i];
    out += '\n';
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < vars.size(); ++i) out += (i ? "\t" : "") + kg::to_string(row.at(vars[i]));
      out += '\n';
    }
    emit(c.output, out);
  });

  // validate
  std::string orsd_file;
  auto* validate = app.add_subcommand("validate", "Validate ORSD competency questions against a graph");
  add_output(validate);
  validate->add_option("--graph", graph_files, "N-Triples file (repeatable)")->required()->allow_extra_args(false);
  validate->add_option("--sensor-log", sensor_log, "Log CSV bound as virtual observations");
  validate->add_option("--orsd", orsd_file, "ORSD JSON (default: bundled)");
  validate->callback([&] {
    const auto orsd =
        pipeline::load_orsd(orsd_file.empty() ? pipeline::default_data_dir() + "/orsd.json" : orsd_file);
    const auto results = pipeline::validate_orsd(load_graph(graph_files, sensor_log), orsd);
    emit(c.output, pipeline::render_validation_json(results));
    for (const auto& r : results) {
      if (!r.passed) {
        std::cerr << r.id << " failed\n";
        code = 1;
      }
    }
  });

  // report
  std::string mappings_file;
  auto* report = app.add_subcommand("report", "Detect, collect context and render the technician report");
  add_config(report);
  add_tolerance(report);
  report->add_option("--automaton", automaton_file, "Automaton JSON")->required();
  report->add_option("--trace", trace_file, "Trace JSON")->required();
  report->add_option("--sensor-log", sensor_log, "Scenario log CSV bound as virtual observations");
  report->add_option("--orsd", orsd_file, "ORSD JSON (default: bundled)");
  report->add_option("--mappings", mappings_file, "Mapping rules JSON (default: bundled)");
  report->add_option("--out-dir", c.out_dir, "Directory for report.json, report.txt and sources/")->required();
  report->add_option("--scenario", c.scenario, "Scenario name shown in the report")->capture_default_str();
  report->callback([&] {
    const auto config = config_of(c);
    const auto automaton = ta::deserialize(text::read_file(automaton_file));
    const auto detected = pipeline::anomaly_service(automaton_file, trace_file, settings_of(c));
    std::filesystem::create_directories(c.out_dir);
    pipeline::export_sources(config, c.out_dir + "/sources");
    pipeline::PopulateInputs in;
    in.mappings_file = mappings_file.empty() ? pipeline::default_data_dir() + "/mappings.json" : mappings_file;
    in.sources_dir = c.out_dir + "/sources";
    in.sensor_log_file = sensor_log;
    const auto graph = pipeline::populate_graph(in, automaton, detected.anomalies);
    std::vector<pipeline::AnomalyContext> contexts;
    if (detected.gateway) contexts = pipeline::context_service(graph, detected.anomalies);
    const auto orsd =
        pipeline::load_orsd(orsd_file.empty() ? pipeline::default_data_dir() + "/orsd.json" : orsd_file);
    const auto trace = events::trace_from_json_text(text::read_file(trace_file));
    const double end = trace.steps.empty() ? trace.start_t_s : trace.steps.back().event.t_s;
    const auto r = pipeline::report_service(c.scenario, end, detected.anomalies, contexts,
                                            pipeline::validate_orsd(graph, orsd));
    text::write_file(c.out_dir + "/report.json", pipeline::render_report_json(r));
    text::write_file(c.out_dir + "/report.txt", pipeline::render_report_text(r));
    std::cout << pipeline::render_report_text(r);
  });

  // pipeline
  auto* run = app.add_subcommand("pipeline", "Simulate, learn, detect, annotate, report and validate end to end");
  add_config(run);
  add_tolerance(run);
  c.cycles = 1;
  int nominal_cycles = 10;
  run->add_option("--scenario", c.scenario, "nominal, leakage or blockage")->capture_default_str();
  run->add_option("--seed", c.seed, "Simulation seed")->capture_default_str();
  run->add_option("--cycles", nominal_cycles, "Nominal training cycles")->capture_default_str();
  run->add_option("--out-dir", c.out_dir, "Artifact directory")->required();
  run->add_option("--orsd", orsd_file, "ORSD JSON (default: bundled)");
  run->add_option("--mappings", mappings_file, "Mapping rules JSON (default: bundled)");
  run->callback([&] {
    pipeline::PipelineOptions o;
    o.config_file = c.config_file;
    o.scenario = pipeline::scenario_from(c.scenario);
    o.out_dir = c.out_dir;
    o.seed = c.seed;
    o.nominal_cycles = nominal_cycles;
    o.settings = settings_of(c);
    o.orsd_file = orsd_file;
    o.mappings_file = mappings_file;
    const auto result = pipeline::run_pipeline(o);
    std::cout << pipeline::render_report_text(result.report);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return code;
}
