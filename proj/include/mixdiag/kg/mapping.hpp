#pragma once

// Declarative CSV/JSON to triple mappings.
//
// A rule iterates the rows of a CSV file ("row") or the elements of a JSON
// array addressed by a JSON pointer, and emits one triple per row from three
// templates. `{name}` reads a CSV column or a member of the JSON element,
// `{/a/b}` a JSON pointer relative to the element. Subject and (datatype-less)
// object templates must expand to `prefix:local` or `<absolute>` IRIs.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mixdiag/kg/term.hpp"

namespace mixdiag::kg {

class MappingError : public KgError {
 public:
  MappingError(std::string rule_id, std::size_t row, const std::string& reason)
      : KgError("mapping rule '" + rule_id + "', row " + std::to_string(row) + ": " + reason),
        rule_id_(std::move(rule_id)),
        row_(row) {}

  const std::string& rule_id() const { return rule_id_; }
  /// 1-based data row (CSV row or array element); 0 when the whole rule failed.
  std::size_t row() const { return row_; }

 private:
  std::string rule_id_;
  std::size_t row_;
};

enum class SourceFormat { Csv, Json };

struct MappingRule {
  std::string id;
  SourceFormat format = SourceFormat::Csv;
  std::string path;
  std::string iterator = "row";
  std::string subject_template;
  Iri predicate;
  std::string object_template;
  std::optional<Datatype> object_datatype;  // absent: the object is an IRI
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// RFC 4180-style: comma separated, optional double quotes with "" escapes.
/// Throws ParseError on ragged rows or an unterminated quote.
CsvTable parse_csv(std::string_view text);

/// Source documents keyed by the path the rules use.
class SourceSet {
 public:
  void add_csv(const std::string& path, std::string_view text);
  void add_json(const std::string& path, std::string text);

  /// Reads every file the rules reference, relative to `base_dir`.
  static SourceSet load(const std::vector<MappingRule>& rules, const std::string& base_dir);

  const CsvTable* csv(const std::string& path) const;
  const std::string* json(const std::string& path) const;

 private:
  std::map<std::string, CsvTable> csv_;
  std::map<std::string, std::string> json_;
};

/// Rule order, then row order.
std::vector<Triple> apply_mappings(const std::vector<MappingRule>& rules, const SourceSet& sources);

/// `{"rules": [{"id", "source": {"format", "path"}, "iterator", "subject",
/// "predicate", "object", "datatype"?}]}`.
std::vector<MappingRule> parse_mapping_rules(const std::string& json_text);

}  // namespace mixdiag::kg
