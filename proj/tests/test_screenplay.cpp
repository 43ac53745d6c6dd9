#include <fstream>
#include <sstream>

#include "doctest.h"
#include "scriptenc/error.hpp"
#include "scriptenc/io.hpp"
#include "scriptenc/screenplay.hpp"
#include "scriptenc/synth.hpp"

using namespace scriptenc;
using namespace scriptenc::screenplay;

namespace {

std::string fixture(const std::string& name) { return io::read_file(std::string(SCRIPTENC_FIXTURES) + "/" + name); }

Scene scene_with(std::size_t statements) {
  Scene s;
  s.heading = "INT. ROOM - DAY";
  for (std::size_t i = 0; i < statements; ++i) s.statements.push_back({StatementKind::Action, {}, "line " + std::to_string(i)});
  return s;
}

}  // namespace

TEST_CASE("line classification from layout") {
  LineContext ctx;
  CHECK(classify_line("EXT. APARTMENT COURTYARD - MORNING", ctx).kind == StatementKind::SceneHeading);
  CHECK(classify_line("Vincent and Jules.", ctx).kind == StatementKind::Action);

  auto cue = classify_line("                    VINCENT", ctx);
  CHECK(cue.kind == StatementKind::CharacterCue);
  advance(ctx, cue);
  auto line = classify_line("          What's her name?", ctx);
  CHECK(line.kind == StatementKind::Dialogue);
  REQUIRE(line.character);
  CHECK(*line.character == "VINCENT");
  CHECK(line.text == "What's her name?");
}

TEST_CASE("parentheticals and transitions are typed and then dropped") {
  const std::string text =
      "INT. ROOM - DAY\n\n"
      "                    ANNA\n"
      "               (quietly)\n"
      "          Hello.\n\n"
      "                                             CUT TO:\n";
  auto lines = classify_script(RawScript::from_text("t", text));
  std::size_t paren = 0, transition = 0;
  for (const auto& l : lines) {
    paren += l.kind == StatementKind::Parenthetical;
    transition += l.kind == StatementKind::Transition;
  }
  CHECK(paren == 1);
  CHECK(transition == 1);
  auto sp = segment_scenes("t", lines);
  REQUIRE(sp.scenes.size() == 1);
  REQUIRE(sp.scenes[0].statements.size() == 1);
  CHECK(sp.scenes[0].statements[0].text == "Hello.");
}

TEST_CASE("the fixture fragment segments into the expected scene") {
  auto result = parse_script(RawScript::from_text("Pulp Fiction", fixture("pulp_fiction.txt")));
  REQUIRE(result.screenplay.scenes.size() == 4);
  const auto& s = result.screenplay.scenes[3];
  CHECK(s.action_statements().size() == 2);
  CHECK(s.dialogue_statements().size() == 3);
  CHECK(s.characters() == std::set<std::string>{"VINCENT", "JULES"});
  CHECK(result.report.usable);
  CHECK(result.report.score == 1.0);
}

TEST_CASE("a script without headings becomes one scene") {
  std::string text;
  for (int i = 0; i < 5; ++i) text += "Something happens number " + std::to_string(i) + ".\n\n";
  auto sp = parse_script(RawScript::from_text("t", text)).screenplay;
  REQUIRE(sp.scenes.size() == 1);
  CHECK(sp.scenes[0].action_statements().size() == 5);
}

TEST_CASE("adjacent headings keep an empty scene") {
  auto sp = parse_script(RawScript::from_text("t", "INT. A - DAY\n\nEXT. B - NIGHT\n\nRain falls.\n")).screenplay;
  REQUIRE(sp.scenes.size() == 2);
  CHECK(sp.scenes[0].statements.empty());
  CHECK(sp.scenes[1].statements.size() == 1);
}

TEST_CASE("empty input raises EmptyScript") {
  try {
    parse_script(RawScript::from_text("t", "\n\n   \n"));
    FAIL("expected EmptyScript");
  } catch (const Error& e) {
    CHECK(e.code() == "EmptyScript");
  }
}

TEST_CASE("long scenes split at the cap") {
  Screenplay sp;
  sp.title = "t";
  sp.scenes = {scene_with(130)};
  auto out = split_long_scenes(sp, 60);
  REQUIRE(out.scenes.size() == 3);
  CHECK(out.scenes[0].statements.size() == 60);
  CHECK(out.scenes[1].statements.size() == 60);
  CHECK(out.scenes[2].statements.size() == 10);
  CHECK(out.scenes[2].index == 3);

  sp.scenes = {scene_with(60)};
  CHECK(split_long_scenes(sp, 60).scenes.size() == 1);
  sp.scenes = {scene_with(61)};
  auto two = split_long_scenes(sp, 60);
  REQUIRE(two.scenes.size() == 2);
  CHECK(two.scenes[1].statements.size() == 1);
}

TEST_CASE("an empty scene is a single Scene row") {
  Screenplay sp;
  sp.title = "t";
  Scene s;
  s.heading = "INT. VOID - NIGHT";
  sp.scenes = {s};
  auto rows = to_table(sp);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].type == "Scene");
}

TEST_CASE("table rows match the golden TSV and round trip byte for byte") {
  auto sp = parse_script(RawScript::from_text("Pulp Fiction", fixture("pulp_fiction.txt"))).screenplay;
  const std::string golden = fixture("pulp_fiction.tsv");
  const std::string tsv = write_tsv(to_table(sp));
  CHECK(tsv == golden);
  CHECK(write_tsv(read_tsv(golden)) == golden);
  CHECK(from_table(read_tsv(golden)) == sp);
}

TEST_CASE("TSV round trip on generated screenplays") {
  synth::SynthConfig cfg;
  cfg.scripts = 6;
  cfg.seed = 21;
  for (const auto& [title, text] : synth::generate(cfg).scripts) {
    auto sp = parse_script(RawScript::from_text(title, text)).screenplay;
    auto rows = read_tsv(write_tsv(to_table(sp)));
    CHECK(rows == to_table(sp));
    CHECK(from_table(rows) == sp);
  }
}

TEST_CASE("single-row TSV round trips and a truncated header is rejected") {
  std::vector<TableRow> rows{{"t", 1, 1, "Scene", "", "INT. X"}};
  auto back = read_tsv(write_tsv(rows));
  CHECK(back == rows);
  CHECK_THROWS_AS(read_tsv("Title\tLine\n"), Error);
}
