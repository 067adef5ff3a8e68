#include "mixdiag/events.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "json.hpp"
#include "mixdiag/text.hpp"

namespace mixdiag::events {

namespace {

constexpr std::string_view kUp = "\xE2\x86\x91";    // ↑
constexpr std::string_view kDown = "\xE2\x86\x93";  // ↓

}  // namespace

std::vector<std::string> ActuatorVector::ids() const {
  std::vector<std::string> out;
  out.reserve(signals.size());
  for (const auto& [id, on] : signals) out.push_back(id);
  return out;
}

std::vector<std::string> ActuatorVector::active() const {
  std::vector<std::string> out;
  for (const auto& [id, on] : signals) {
    if (on) out.push_back(id);
  }
  return out;
}

std::string ActuatorVector::describe() const {
  std::string out;
  for (const auto& id : active()) {
    if (!out.empty()) out += '+';
    out += id;
  }
  return out.empty() ? "idle" : out;
}

ActuatorVector all_off(const std::vector<std::string>& ids) {
  ActuatorVector v;
  for (const auto& id : ids) v.signals.emplace(id, false);
  return v;
}

std::string make_label(const ActuatorVector& from, const ActuatorVector& to) {
  if (from.ids() != to.ids()) throw PreconditionError("vectors have different actuator sets");
  std::string label;
  for (auto a = from.signals.begin(), b = to.signals.begin(); a != from.signals.end(); ++a, ++b) {
    if (a->second == b->second) continue;
    if (!label.empty()) label += ',';
    label += a->first;
    label += b->second ? kUp : kDown;
  }
  if (label.empty()) throw PreconditionError("vectors are identical; no event");
  return label;
}

ActuatorVector apply_label(const ActuatorVector& vector, std::string_view label) {
  if (label.empty()) throw PreconditionError("empty event label");
  ActuatorVector out = vector;
  std::set<std::string> seen;
  for (const auto& token : text::split(label, ',')) {
    std::string_view tok = token;
    bool rising = false;
    if (tok.size() > kUp.size() && tok.substr(tok.size() - kUp.size()) == kUp) {
      rising = true;
    } else if (tok.size() > kDown.size() && tok.substr(tok.size() - kDown.size()) == kDown) {
      rising = false;
    } else {
      throw PreconditionError("malformed event token '" + token + "'");
    }
    const std::string id(tok.substr(0, tok.size() - kUp.size()));
    if (!seen.insert(id).second) throw PreconditionError("actuator '" + id + "' repeated in label");
    auto it = out.signals.find(id);
    if (it == out.signals.end()) throw PreconditionError("label names unknown actuator '" + id + "'");
    if (it->second == rising) {
      throw PreconditionError("label edge " + token + " contradicts current signal");
    }
    it->second = rising;
  }
  return out;
}

plant::SimulationLog parse_log(std::string_view csv_text) {
  plant::SimulationLog log;
  std::size_t line_no = 0;
  bool header_seen = false;
  double last_t = -1.0;
  std::size_t pos = 0;
  while (pos <= csv_text.size()) {
    auto end = csv_text.find('\n', pos);
    if (end == std::string_view::npos) end = csv_text.size();
    std::string_view line = csv_text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) {
      if (end == csv_text.size()) break;
      continue;
    }
    if (!header_seen) {
      if (line != "t_s,kind,id,value") throw ParseError(line_no, "expected header 't_s,kind,id,value'");
      header_seen = true;
      continue;
    }
    const auto fields = text::split(line, ',');
    if (fields.size() != 4) throw ParseError(line_no, "expected 4 fields, got " + std::to_string(fields.size()));
    const double t = text::parse_double(fields[0], line_no);
    if (t < 0.0) throw ParseError(line_no, "negative timestamp");
    if (t < last_t) throw ParseError(line_no, "rows are not sorted by t_s");
    last_t = t;
    if (fields[2].empty()) throw ParseError(line_no, "empty id");
    if (fields[1] == "actuator") {
      if (fields[3] != "0" && fields[3] != "1") throw ParseError(line_no, "actuator value must be 0 or 1");
      log.actuator_records.push_back({t, fields[2], fields[3] == "1"});
    } else if (fields[1] == "sensor") {
      log.sensor_records.push_back({t, fields[2], text::parse_double(fields[3], line_no)});
    } else {
      throw ParseError(line_no, "unknown record kind '" + fields[1] + "'");
    }
    if (end == csv_text.size()) break;
  }
  if (!header_seen) throw ParseError(1, "missing header");
  return log;
}

EventTrace to_trace(const plant::SimulationLog& log, const plant::PlantConfig& config, double merge_window_s) {
  if (log.actuator_records.empty()) throw EmptyLog("log contains no actuator records");
  if (merge_window_s < 0.0) throw PreconditionError("merge window must be >= 0");
  const auto ids = config.actuator_ids();
  const std::set<std::string> known(ids.begin(), ids.end());
  for (const auto& r : log.actuator_records) {
    if (!known.count(r.actuator_id)) {
      throw PreconditionError("log references actuator '" + r.actuator_id + "' not in the plant config");
    }
  }

  EventTrace trace;
  ActuatorVector current = all_off(ids);
  double last_change_t = 0.0;
  bool first_group = true;
  const auto& recs = log.actuator_records;
  for (std::size_t i = 0; i < recs.size();) {
    const double group_t = recs[i].t_s;
    ActuatorVector next = current;
    std::size_t j = i;
    for (; j < recs.size() && recs[j].t_s - group_t <= merge_window_s; ++j) {
      next.signals[recs[j].actuator_id] = recs[j].value;
    }
    i = j;
    if (first_group) {
      trace.initial_vector = next;
      trace.start_t_s = group_t;
      last_change_t = group_t;
      current = std::move(next);
      first_group = false;
      continue;
    }
    if (next == current) continue;
    TraceStep step;
    step.event = {make_label(current, next), group_t};
    step.resulting_vector = next;
    step.dwell_s = std::round((group_t - last_change_t) * 1000.0) / 1000.0;  // log timestamps carry ms resolution
    trace.steps.push_back(std::move(step));
    last_change_t = group_t;
    current = std::move(next);
  }
  return trace;
}

std::vector<EventTrace> split_cycles(const EventTrace& trace, const ActuatorVector& idle) {
  std::vector<EventTrace> out;
  EventTrace segment;
  segment.initial_vector = trace.initial_vector;
  segment.start_t_s = trace.start_t_s;
  for (const auto& step : trace.steps) {
    segment.steps.push_back(step);
    if (step.resulting_vector == idle) {
      out.push_back(std::move(segment));
      segment = EventTrace{};
      segment.initial_vector = step.resulting_vector;
      segment.start_t_s = step.event.t_s;
    }
  }
  if (!segment.steps.empty() || out.empty()) out.push_back(std::move(segment));
  return out;
}

bool replays_consistently(const EventTrace& trace) {
  ActuatorVector current = trace.initial_vector;
  for (const auto& step : trace.steps) {
    try {
      current = apply_label(current, step.event.label);
    } catch (const PreconditionError&) {
      return false;
    }
    if (current != step.resulting_vector) return false;
  }
  return true;
}

namespace {

using nlohmann::json;

ActuatorVector vector_from(const json& j) {
  ActuatorVector v;
  v.signals = j.get<std::map<std::string, bool>>();
  return v;
}

}  // namespace

std::string trace_to_json_text(const EventTrace& trace) {
  json j;
  j["initial_vector"] = trace.initial_vector.signals;
  j["start_t_s"] = trace.start_t_s;
  j["steps"] = json::array();
  for (const auto& s : trace.steps) {
    j["steps"].push_back({{"label", s.event.label},
                          {"t_s", s.event.t_s},
                          {"dwell_s", s.dwell_s},
                          {"vector", s.resulting_vector.signals}});
  }
  return j.dump(2) + "\n";
}

EventTrace trace_from_json_text(const std::string& text) {
  EventTrace trace;
  try {
    const json j = json::parse(text);
    trace.initial_vector = vector_from(j.at("initial_vector"));
    trace.start_t_s = j.value("start_t_s", 0.0);
    for (const auto& s : j.at("steps")) {
      TraceStep step;
      step.event = {s.at("label").get<std::string>(), s.at("t_s").get<double>()};
      step.dwell_s = s.at("dwell_s").get<double>();
      step.resulting_vector = vector_from(s.at("vector"));
      trace.steps.push_back(std::move(step));
    }
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("trace: ") + e.what());
  }
  if (!replays_consistently(trace)) throw ParseError(0, "trace: labels do not reproduce the recorded vectors");
  return trace;
}

void SensorCsvSource::scan(const std::function<void(const plant::SensorRecord&)>& visit) const {
  ++scans_;
  std::string text;
  plant::SimulationLog log;
  try {
    text = text::read_file(path_);
    log = parse_log(text);
  } catch (const Error& e) {
    throw SourceUnavailable("sensor source '" + path_ + "': " + e.what());
  }
  for (const auto& r : log.sensor_records) visit(r);
}

}  // namespace mixdiag::events
