#pragma once

// Screenplay structure parsing: line typing from layout cues, scene
// segmentation, long-scene splitting and the tabular (TSV) representation.

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace scriptenc::screenplay {

enum class StatementKind { SceneHeading, Action, Dialogue, Parenthetical, Transition, CharacterCue, Blank, Other };

std::string_view kind_name(StatementKind kind);

struct ParserConfig {
  std::vector<std::string> heading_prefixes{"INT.", "EXT.", "INT/EXT", "I/E"};
  std::size_t tab_width = 8;
  std::size_t character_indent = 10;  // minimum leading columns for a character cue
  std::size_t dialogue_indent = 4;    // minimum leading columns for a dialogue body line
  std::size_t max_cue_length = 40;
};

struct RawScript {
  std::string title;
  std::vector<std::string> lines;

  static RawScript from_text(std::string title, std::string_view text);
};

// State carried from one classified line to the next.
struct LineContext {
  StatementKind previous = StatementKind::Blank;
  std::optional<std::string> speaker;  // most recent character cue in the current block
  bool open_parenthetical = false;
};

struct LineClass {
  StatementKind kind = StatementKind::Other;
  std::optional<std::string> character;  // set iff kind == Dialogue
  std::string text;                      // normalized content
};

LineClass classify_line(std::string_view raw, const LineContext& context, const ParserConfig& config = {});
void advance(LineContext& context, const LineClass& line);

struct ScriptLine {
  std::size_t line_no = 0;   // 1-based raw line number
  std::size_t scene_no = 1;  // 1-based
  StatementKind kind = StatementKind::Blank;
  std::optional<std::string> character;
  std::string text;

  bool operator==(const ScriptLine&) const = default;
};

std::vector<ScriptLine> classify_script(const RawScript& raw, const ParserConfig& config = {});

struct Statement {
  StatementKind kind = StatementKind::Action;  // Action or Dialogue
  std::optional<std::string> character;
  std::string text;

  bool operator==(const Statement&) const = default;
};

struct Scene {
  std::size_t index = 1;
  std::string heading;            // slug line text; empty when the script has none
  std::vector<Statement> statements;  // action and dialogue in script order

  std::vector<std::string> action_statements() const;
  std::vector<std::pair<std::string, std::string>> dialogue_statements() const;
  std::set<std::string> characters() const;

  bool operator==(const Scene&) const = default;
};

struct Screenplay {
  std::string title;
  std::vector<Scene> scenes;

  std::size_t statement_count() const;
  bool operator==(const Screenplay&) const = default;
};

// Groups classified lines into scenes. Slug lines, parentheticals,
// transitions and cue lines are dropped; wrapped action/dialogue lines are
// joined into one statement. Throws EmptyScript if no line has content.
Screenplay segment_scenes(std::string title, const std::vector<ScriptLine>& lines);

// Splits scenes longer than cap statements greedily at statement boundaries
// and renumbers all scenes consecutively from 1.
Screenplay split_long_scenes(const Screenplay& sp, std::size_t cap = 60);

struct QualityReport {
  std::string title;
  std::size_t total_lines = 0;
  std::size_t heading_count = 0;
  std::size_t scene_count = 0;
  std::size_t action_statements = 0;
  std::size_t dialogue_statements = 0;
  std::size_t preamble_lines = 0;  // content lines before the first slug line, not part of any scene
  std::vector<std::pair<StatementKind, std::size_t>> kind_counts;
  double score = 0.0;  // fraction of non-blank lines that are not Other
  bool usable = false; // at least one scene and at least one statement

  nlohmann::json to_json() const;
};

struct ParseResult {
  std::vector<ScriptLine> lines;
  Screenplay screenplay;
  QualityReport report;
};

// classify -> segment; the report summarizes both. Scene splitting is a
// separate preprocessing step.
ParseResult parse_script(const RawScript& raw, const ParserConfig& config = {});

// ---- tabular form ----------------------------------------------------------

struct TableRow {
  std::string title;
  std::size_t line = 0;  // running row number within the script
  std::size_t scene = 0;
  std::string type;      // "Scene", "Action" or "Dial."
  std::string character;
  std::string text;

  bool operator==(const TableRow&) const = default;
};

std::vector<TableRow> to_table(const Screenplay& sp);
Screenplay from_table(const std::vector<TableRow>& rows);

// Header Title/Line/Scene/Type/Character/Text, tab separated, '\n' after every row.
std::string write_tsv(const std::vector<TableRow>& rows);
std::vector<TableRow> read_tsv(std::string_view tsv);

}  // namespace scriptenc::screenplay
