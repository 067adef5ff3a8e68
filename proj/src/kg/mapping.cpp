#include "mixdiag/kg/mapping.hpp"

#include <algorithm>
#include <functional>
#include <set>

#include "json.hpp"
#include "mixdiag/text.hpp"

namespace mixdiag::kg {

using nlohmann::json;

CsvTable parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::size_t> record_lines;
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false, any = false;
  std::size_t line = 1, record_line = 1;

  auto end_record = [&] {
    fields.push_back(std::move(field));
    field.clear();
    const bool blank = fields.size() == 1 && fields[0].empty() && !any;
    if (!blank) {
      records.push_back(std::move(fields));
      record_lines.push_back(record_line);
    }
    fields.clear();
    any = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        quoted = true;
        any = true;
        break;
      case ',':
        fields.push_back(std::move(field));
        field.clear();
        any = true;
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        ++line;
        record_line = line;
        break;
      default:
        field += c;
        any = true;
    }
  }
  if (quoted) throw ParseError(record_line, "unterminated quoted field");
  if (!field.empty() || !fields.empty() || any) end_record();

  CsvTable table;
  if (records.empty()) throw ParseError(1, "missing CSV header");
  table.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != table.header.size()) {
      throw ParseError(record_lines[r], "expected " + std::to_string(table.header.size()) + " fields, got " +
                                            std::to_string(records[r].size()));
    }
    table.rows.push_back(std::move(records[r]));
  }
  return table;
}

void SourceSet::add_csv(const std::string& path, std::string_view text) {
  try {
    csv_[path] = parse_csv(text);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path + ": " + e.what());
  }
}

void SourceSet::add_json(const std::string& path, std::string text) {
  if (!json::accept(text)) throw ParseError(0, path + ": invalid JSON");
  json_[path] = std::move(text);
}

SourceSet SourceSet::load(const std::vector<MappingRule>& rules, const std::string& base_dir) {
  SourceSet set;
  for (const auto& r : rules) {
    const std::string full = base_dir.empty() ? r.path : base_dir + "/" + r.path;
    if (r.format == SourceFormat::Csv) {
      if (!set.csv(r.path)) set.add_csv(r.path, text::read_file(full));
    } else if (!set.json(r.path)) {
      set.add_json(r.path, text::read_file(full));
    }
  }
  return set;
}

const CsvTable* SourceSet::csv(const std::string& path) const {
  auto it = csv_.find(path);
  return it == csv_.end() ? nullptr : &it->second;
}

const std::string* SourceSet::json(const std::string& path) const {
  auto it = json_.find(path);
  return it == json_.end() ? nullptr : &it->second;
}

namespace {

using Lookup = std::function<std::optional<std::string>(const std::string&)>;

std::string expand(const MappingRule& rule, std::size_t row, const std::string& tpl, const Lookup& lookup) {
  std::string out;
  for (std::size_t i = 0; i < tpl.size(); ++i) {
    if (tpl[i] == '}') throw MappingError(rule.id, row, "unbalanced '}' in template '" + tpl + "'");
    if (tpl[i] != '{') {
      out += tpl[i];
      continue;
    }
    const auto close = tpl.find('}', i);
    if (close == std::string::npos) throw MappingError(rule.id, row, "unterminated placeholder in '" + tpl + "'");
    const std::string key = tpl.substr(i + 1, close - i - 1);
    const auto value = lookup(key);
    if (!value) throw MappingError(rule.id, row, "no value for placeholder {" + key + "}");
    out += *value;
    i = close;
  }
  return out;
}

std::optional<std::string> json_scalar(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number()) return text::format_double(v.get<double>());
  return std::nullopt;
}

void emit(const MappingRule& rule, std::size_t row, const Lookup& lookup, std::vector<Triple>& out) {
  const std::string s = expand(rule, row, rule.subject_template, lookup);
  const std::string o = expand(rule, row, rule.object_template, lookup);
  try {
    Triple t;
    t.subject = Iri::parse(s);
    t.predicate = rule.predicate;
    if (rule.object_datatype) {
      t.object = Literal::make(o, *rule.object_datatype);
    } else {
      t.object = Iri::parse(o);
    }
    out.push_back(std::move(t));
  } catch (const KgError& e) {
    throw MappingError(rule.id, row, e.what());
  }
}

}  // namespace

std::vector<Triple> apply_mappings(const std::vector<MappingRule>& rules, const SourceSet& sources) {
  std::vector<Triple> out;
  for (const auto& rule : rules) {
    if (rule.format == SourceFormat::Csv) {
      const CsvTable* table = sources.csv(rule.path);
      if (!table) throw MappingError(rule.id, 0, "CSV source '" + rule.path + "' is not loaded");
      if (rule.iterator != "row") throw MappingError(rule.id, 0, "CSV rules iterate 'row'");
      for (std::size_t r = 0; r < table->rows.size(); ++r) {
        const auto& values = table->rows[r];
        Lookup lookup = [&](const std::string& key) -> std::optional<std::string> {
          auto it = std::find(table->header.begin(), table->header.end(), key);
          if (it == table->header.end()) return std::nullopt;
          return values[static_cast<std::size_t>(it - table->header.begin())];
        };
        emit(rule, r + 1, lookup, out);
      }
      continue;
    }
    const std::string* text = sources.json(rule.path);
    if (!text) throw MappingError(rule.id, 0, "JSON source '" + rule.path + "' is not loaded");
    const json doc = json::parse(*text);
    json::json_pointer ptr;
    try {
      ptr = json::json_pointer(rule.iterator == "row" ? "" : rule.iterator);
    } catch (const json::exception& e) {
      throw MappingError(rule.id, 0, std::string("bad iterator pointer: ") + e.what());
    }
    if (!doc.contains(ptr) || !doc.at(ptr).is_array()) {
      throw MappingError(rule.id, 0, "iterator '" + rule.iterator + "' does not address an array");
    }
    const json& items = doc.at(ptr);
    for (std::size_t r = 0; r < items.size(); ++r) {
      const json& element = items[r];
      Lookup lookup = [&](const std::string& key) -> std::optional<std::string> {
        try {
          if (!key.empty() && key.front() == '/') {
            const json::json_pointer p(key);
            if (!element.contains(p)) return std::nullopt;
            return json_scalar(element.at(p));
          }
          if (!element.is_object() || !element.contains(key)) return std::nullopt;
          return json_scalar(element.at(key));
        } catch (const json::exception&) {
          return std::nullopt;
        }
      };
      emit(rule, r + 1, lookup, out);
    }
  }
  return out;
}

std::vector<MappingRule> parse_mapping_rules(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(0, std::string("mapping rules: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("rules") || !doc["rules"].is_array()) {
    throw ParseError(0, "mapping rules: expected an object with a 'rules' array");
  }
  std::vector<MappingRule> rules;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < doc["rules"].size(); ++i) {
    const json& j = doc["rules"][i];
    const std::string where = "mapping rule #" + std::to_string(i);
    try {
      MappingRule r;
      r.id = j.at("id").get<std::string>();
      if (!ids.insert(r.id).second) throw ParseError(0, where + ": duplicate id '" + r.id + "'");
      const std::string format = j.at("source").at("format").get<std::string>();
      if (format == "csv") {
        r.format = SourceFormat::Csv;
      } else if (format == "json") {
        r.format = SourceFormat::Json;
      } else {
        throw ParseError(0, where + ": unknown source format '" + format + "'");
      }
      r.path = j.at("source").at("path").get<std::string>();
      r.iterator = j.value("iterator", std::string("row"));
      r.subject_template = j.at("subject").get<std::string>();
      r.predicate = Iri::parse(j.at("predicate").get<std::string>());
      r.object_template = j.at("object").get<std::string>();
      if (j.contains("datatype")) r.object_datatype = datatype_from_iri(Iri::parse(j.at("datatype").get<std::string>()));
      rules.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ParseError(0, where + ": " + e.what());
    } catch (const KgError& e) {
      throw ParseError(0, where + ": " + e.what());
    }
  }
  return rules;
}

}  // namespace mixdiag::kg
