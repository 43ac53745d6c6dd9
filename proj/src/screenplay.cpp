#include "scriptenc/screenplay.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "scriptenc/error.hpp"
#include "scriptenc/io.hpp"

namespace scriptenc::screenplay {

std::string_view kind_name(StatementKind kind) {
  switch (kind) {
    case StatementKind::SceneHeading: return "SceneHeading";
    case StatementKind::Action: return "Action";
    case StatementKind::Dialogue: return "Dialogue";
    case StatementKind::Parenthetical: return "Parenthetical";
    case StatementKind::Transition: return "Transition";
    case StatementKind::CharacterCue: return "CharacterCue";
    case StatementKind::Blank: return "Blank";
    case StatementKind::Other: return "Other";
  }
  return "Other";
}

RawScript RawScript::from_text(std::string title, std::string_view text) {
  RawScript raw;
  raw.title = std::move(title);
  std::size_t start = 0;
  while (start <= text.size()) {
    auto pos = text.find('\n', start);
    std::string_view line = text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (pos == std::string_view::npos) {
      if (!line.empty()) raw.lines.emplace_back(line);
      break;
    }
    raw.lines.emplace_back(line);
    start = pos + 1;
  }
  return raw;
}

namespace {

bool is_blank_char(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v'; }

std::size_t leading_columns(std::string_view line, std::size_t tab_width) {
  std::size_t col = 0;
  for (char c : line) {
    if (c == ' ') {
      ++col;
    } else if (c == '\t') {
      col += tab_width - col % tab_width;
    } else if (is_blank_char(c)) {
      ++col;
    } else {
      break;
    }
  }
  return col;
}

// Trims and collapses every whitespace run to a single space.
std::string normalize(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char c : text) {
    if (is_blank_char(c) || c == '\n') {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

bool has_lower(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](unsigned char c) { return std::islower(c); });
}

bool has_alpha(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](unsigned char c) { return std::isalpha(c); });
}

bool all_caps(std::string_view s) { return has_alpha(s) && !has_lower(s); }

bool starts_with(std::string_view s, std::string_view p) { return s.substr(0, p.size()) == p; }
bool ends_with(std::string_view s, std::string_view p) {
  return s.size() >= p.size() && s.substr(s.size() - p.size()) == p;
}

bool is_heading(std::string_view text, const ParserConfig& config) {
  if (!all_caps(text)) return false;
  return std::any_of(config.heading_prefixes.begin(), config.heading_prefixes.end(),
                     [&](const std::string& p) { return starts_with(text, p); });
}

bool is_transition(std::string_view text) {
  return all_caps(text) && (ends_with(text, "TO:") || starts_with(text, "FADE"));
}

// Drops trailing voice markers such as "(V.O.)", "(O.S.)" or "(CONT'D)".
std::string cue_name(std::string_view text) {
  std::string name(text);
  while (!name.empty() && name.back() == ')') {
    auto open = name.rfind('(');
    if (open == std::string::npos) break;
    name = normalize(std::string_view(name).substr(0, open));
  }
  return name;
}

bool in_dialogue_block(StatementKind k) {
  return k == StatementKind::CharacterCue || k == StatementKind::Dialogue || k == StatementKind::Parenthetical;
}

}  // namespace

LineClass classify_line(std::string_view raw, const LineContext& context, const ParserConfig& config) {
  LineClass out;
  const std::string text = normalize(raw);
  out.text = text;
  if (text.empty()) {
    out.kind = StatementKind::Blank;
    return out;
  }
  const std::size_t indent = leading_columns(raw, config.tab_width);
  const bool block = in_dialogue_block(context.previous) && context.speaker.has_value();

  if (is_heading(text, config)) {
    out.kind = StatementKind::SceneHeading;
  } else if (is_transition(text)) {
    out.kind = StatementKind::Transition;
  } else if (block && (text.front() == '(' || (context.previous == StatementKind::Parenthetical &&
                                                context.open_parenthetical))) {
    out.kind = StatementKind::Parenthetical;
  } else if (block && indent >= config.dialogue_indent) {
    out.kind = StatementKind::Dialogue;
    out.character = context.speaker;
  } else if (context.previous == StatementKind::Blank && indent >= config.character_indent && all_caps(text) &&
             text.size() <= config.max_cue_length && !cue_name(text).empty()) {
    out.kind = StatementKind::CharacterCue;
    out.text = cue_name(text);
  } else if (!has_alpha(text)) {
    out.kind = StatementKind::Other;
  } else {
    out.kind = StatementKind::Action;
  }
  return out;
}

void advance(LineContext& context, const LineClass& line) {
  switch (line.kind) {
    case StatementKind::CharacterCue:
      context.speaker = line.text;
      context.open_parenthetical = false;
      break;
    case StatementKind::Parenthetical:
      if (line.text.find('(') != std::string::npos) context.open_parenthetical = true;
      if (line.text.find(')') != std::string::npos) context.open_parenthetical = false;
      break;
    case StatementKind::Dialogue:
      context.open_parenthetical = false;
      break;
    default:
      context.speaker.reset();
      context.open_parenthetical = false;
      break;
  }
  context.previous = line.kind;
}

std::vector<ScriptLine> classify_script(const RawScript& raw, const ParserConfig& config) {
  std::vector<ScriptLine> out;
  out.reserve(raw.lines.size());
  LineContext ctx;
  std::size_t headings = 0;
  for (std::size_t i = 0; i < raw.lines.size(); ++i) {
    auto cls = classify_line(raw.lines[i], ctx, config);
    if (cls.kind == StatementKind::SceneHeading) ++headings;
    ScriptLine line;
    line.line_no = i + 1;
    line.scene_no = std::max<std::size_t>(headings, 1);
    line.kind = cls.kind;
    line.character = cls.character;
    line.text = cls.text;
    advance(ctx, cls);
    out.push_back(std::move(line));
  }
  return out;
}

// ---- scenes -------------------------------------------------------------------

std::vector<std::string> Scene::action_statements() const {
  std::vector<std::string> out;
  for (const auto& s : statements)
    if (s.kind == StatementKind::Action) out.push_back(s.text);
  return out;
}

std::vector<std::pair<std::string, std::string>> Scene::dialogue_statements() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& s : statements)
    if (s.kind == StatementKind::Dialogue) out.emplace_back(*s.character, s.text);
  return out;
}

std::set<std::string> Scene::characters() const {
  std::set<std::string> out;
  for (const auto& s : statements)
    if (s.kind == StatementKind::Dialogue) out.insert(*s.character);
  return out;
}

std::size_t Screenplay::statement_count() const {
  std::size_t n = 0;
  for (const auto& s : scenes) n += s.statements.size();
  return n;
}

Screenplay segment_scenes(std::string title, const std::vector<ScriptLine>& lines) {
  const bool any_content = std::any_of(lines.begin(), lines.end(), [](const ScriptLine& l) {
    return l.kind != StatementKind::Blank;
  });
  if (!any_content) throw Error("EmptyScript", "script '" + title + "' has no non-blank line");
  const bool has_headings = std::any_of(lines.begin(), lines.end(), [](const ScriptLine& l) {
    return l.kind == StatementKind::SceneHeading;
  });

  Screenplay sp;
  sp.title = normalize(title);
  if (!has_headings) sp.scenes.push_back(Scene{1, "", {}});

  const ScriptLine* prev = nullptr;
  for (const auto& line : lines) {
    if (line.kind == StatementKind::SceneHeading) {
      sp.scenes.push_back(Scene{sp.scenes.size() + 1, line.text, {}});
    } else if ((line.kind == StatementKind::Action || line.kind == StatementKind::Dialogue) && !sp.scenes.empty()) {
      auto& stmts = sp.scenes.back().statements;
      const bool continues = prev != nullptr && prev->kind == line.kind && prev->line_no + 1 == line.line_no &&
                             prev->character == line.character && !stmts.empty();
      if (continues) {
        stmts.back().text += ' ';
        stmts.back().text += line.text;
      } else {
        stmts.push_back(Statement{line.kind, line.character, line.text});
      }
    }
    prev = &line;
  }
  return sp;
}

Screenplay split_long_scenes(const Screenplay& sp, std::size_t cap) {
  if (cap == 0) throw Error("InvalidArgument", "split_long_scenes: cap must be >= 1");
  Screenplay out;
  out.title = sp.title;
  for (const auto& scene : sp.scenes) {
    if (scene.statements.size() <= cap) {
      out.scenes.push_back(scene);
      out.scenes.back().index = out.scenes.size();
      continue;
    }
    for (std::size_t start = 0; start < scene.statements.size(); start += cap) {
      const auto end = std::min(scene.statements.size(), start + cap);
      Scene piece;
      piece.index = out.scenes.size() + 1;
      piece.heading = scene.heading;
      piece.statements.assign(scene.statements.begin() + static_cast<std::ptrdiff_t>(start),
                              scene.statements.begin() + static_cast<std::ptrdiff_t>(end));
      out.scenes.push_back(std::move(piece));
    }
  }
  return out;
}

// ---- quality ------------------------------------------------------------------

nlohmann::json QualityReport::to_json() const {
  nlohmann::json kinds = nlohmann::json::object();
  for (const auto& [k, n] : kind_counts) kinds[std::string(kind_name(k))] = n;
  return {{"title", title},
          {"total_lines", total_lines},
          {"heading_count", heading_count},
          {"scene_count", scene_count},
          {"action_statements", action_statements},
          {"dialogue_statements", dialogue_statements},
          {"preamble_lines", preamble_lines},
          {"kind_counts", kinds},
          {"score", score},
          {"usable", usable}};
}

ParseResult parse_script(const RawScript& raw, const ParserConfig& config) {
  ParseResult r;
  r.lines = classify_script(raw, config);
  r.screenplay = segment_scenes(raw.title, r.lines);

  auto& q = r.report;
  q.title = r.screenplay.title;
  q.total_lines = r.lines.size();
  constexpr StatementKind all[] = {StatementKind::SceneHeading, StatementKind::Action,     StatementKind::Dialogue,
                                   StatementKind::Parenthetical, StatementKind::Transition, StatementKind::CharacterCue,
                                   StatementKind::Blank,         StatementKind::Other};
  std::size_t non_blank = 0, other = 0;
  for (auto k : all) q.kind_counts.emplace_back(k, 0);
  for (const auto& l : r.lines) {
    for (auto& [k, n] : q.kind_counts)
      if (k == l.kind) ++n;
    if (l.kind != StatementKind::Blank) {
      ++non_blank;
      if (l.kind == StatementKind::Other) ++other;
    }
  }
  q.heading_count = q.kind_counts[0].second;
  if (q.heading_count > 0) {
    for (const auto& l : r.lines) {
      if (l.kind == StatementKind::SceneHeading) break;
      if (l.kind != StatementKind::Blank) ++q.preamble_lines;
    }
  }
  q.scene_count = r.screenplay.scenes.size();
  for (const auto& s : r.screenplay.scenes) {
    for (const auto& st : s.statements) {
      if (st.kind == StatementKind::Action) ++q.action_statements;
      else ++q.dialogue_statements;
    }
  }
  q.score = non_blank == 0 ? 0.0 : 1.0 - static_cast<double>(other) / static_cast<double>(non_blank);
  q.usable = q.scene_count > 0 && (q.action_statements + q.dialogue_statements) > 0;
  return r;
}

// ---- table --------------------------------------------------------------------

std::vector<TableRow> to_table(const Screenplay& sp) {
  std::vector<TableRow> rows;
  std::size_t line = 0;
  for (const auto& scene : sp.scenes) {
    rows.push_back({sp.title, ++line, scene.index, "Scene", "", scene.heading});
    for (const auto& st : scene.statements) {
      if (st.kind == StatementKind::Dialogue) {
        rows.push_back({sp.title, ++line, scene.index, "Dial.", *st.character, st.text});
      } else {
        rows.push_back({sp.title, ++line, scene.index, "Action", "", st.text});
      }
    }
  }
  return rows;
}

Screenplay from_table(const std::vector<TableRow>& rows) {
  Screenplay sp;
  if (rows.empty()) throw Error("MalformedTable", "table has no rows");
  sp.title = rows.front().title;
  for (const auto& r : rows) {
    if (r.type == "Scene") {
      sp.scenes.push_back(Scene{r.scene, r.text, {}});
      continue;
    }
    if (sp.scenes.empty()) throw Error("MalformedTable", "statement row " + std::to_string(r.line) + " precedes any Scene row");
    if (r.type == "Dial.") {
      sp.scenes.back().statements.push_back(Statement{StatementKind::Dialogue, r.character, r.text});
    } else if (r.type == "Action") {
      sp.scenes.back().statements.push_back(Statement{StatementKind::Action, std::nullopt, r.text});
    } else {
      throw Error("MalformedTable", "unknown row type '" + r.type + "'");
    }
  }
  return sp;
}

namespace {

std::string clean_field(std::string_view s) {
  std::string out(s);
  for (auto& c : out)
    if (c == '\t' || c == '\n' || c == '\r') c = ' ';
  return out;
}

}  // namespace

std::string write_tsv(const std::vector<TableRow>& rows) {
  std::string out = "Title\tLine\tScene\tType\tCharacter\tText\n";
  for (const auto& r : rows) {
    out += clean_field(r.title);
    out += '\t';
    out += std::to_string(r.line);
    out += '\t';
    out += std::to_string(r.scene);
    out += '\t';
    out += r.type;
    out += '\t';
    out += clean_field(r.character);
    out += '\t';
    out += clean_field(r.text);
    out += '\n';
  }
  return out;
}

std::vector<TableRow> read_tsv(std::string_view tsv) {
  auto lines = io::split(tsv, '\n');
  if (lines.empty() || lines.front() != "Title\tLine\tScene\tType\tCharacter\tText") {
    throw Error("MalformedTable", "missing or unexpected TSV header");
  }
  if (!lines.back().empty()) throw Error("MalformedTable", "last TSV row is not newline-terminated");
  std::vector<TableRow> rows;
  for (std::size_t i = 1; i + 1 < lines.size(); ++i) {
    auto f = io::split(lines[i], '\t');
    if (f.size() != 6) throw Error("MalformedTable", "row " + std::to_string(i) + " has " + std::to_string(f.size()) + " fields");
    TableRow r;
    r.title = f[0];
    try {
      r.line = static_cast<std::size_t>(std::stoull(f[1]));
      r.scene = static_cast<std::size_t>(std::stoull(f[2]));
    } catch (const std::exception&) {
      throw Error("MalformedTable", "row " + std::to_string(i) + " has a non-numeric Line/Scene");
    }
    r.type = f[3];
    r.character = f[4];
    r.text = f[5];
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace scriptenc::screenplay
