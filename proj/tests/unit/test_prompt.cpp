#include <doctest.h>

#include <variant>

#include "forge/error.hpp"
#include "forge/prompt.hpp"

using namespace forge;

TEST_SUITE("prompt") {
  TEST_CASE("rendered prompt carries the instruction, demonstration and question") {
    const std::string p = render_generation_prompt("And what happens if I miss a dose of Saxenda?");
    CHECK(p.find("If you miss your dose of Saxenda for 3 days or more") != std::string::npos);
    CHECK(p.find("Answer the question in a 'Long Form Answer'") != std::string::npos);
    CHECK(p.find("### Question: And what happens if I miss a dose of Saxenda?") != std::string::npos);

    const std::string q = render_generation_prompt("q");
    CHECK(q.find("Answer the question in a 'Long Form Answer'") != std::string::npos);
    // The target question comes after the demonstration and the prompt ends
    // on an open answer header.
    CHECK(q.rfind("### Question: q") > q.find("Saxenda"));
    CHECK(q.substr(q.size() - 18) == "Long Form Answer:\n");
  }

  TEST_CASE("pre-filled answers are placed after the final header") {
    const std::string p = render_generation_prompt("q", "An answer.");
    CHECK(p.substr(p.size() - 29) == "Long Form Answer: An answer.\n");
  }

  TEST_CASE("empty question is rejected") {
    try {
      render_generation_prompt("");
      FAIL("expected EmptyQuestion");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kEmptyQuestion);
    }
    CHECK_THROWS_AS(render_generation_prompt("   "), Error);
  }

  TEST_CASE("demonstration parses to one answer, five must-have and one nice-to-have") {
    const auto out = parse_generation_output(one_shot_demonstration());
    REQUIRE(std::holds_alternative<GeneratedAnswer>(out));
    const auto& g = std::get<GeneratedAnswer>(out);
    CHECK(g.answer.rfind("Liraglutide (Saxenda)", 0) == 0);
    CHECK(g.must_have.size() == 5);
    CHECK(g.nice_to_have.size() == 1);
    for (const auto& s : g.must_have) CHECK(s.kind == StatementKind::kMustHave);
    CHECK(g.nice_to_have[0].kind == StatementKind::kNiceToHave);
  }

  TEST_CASE("sentinel yields AmbiguousMarker") {
    CHECK(std::holds_alternative<AmbiguousMarker>(parse_generation_output("Vague Question to answer")));
    CHECK(std::holds_alternative<AmbiguousMarker>(
        parse_generation_output("Long Form Answer: Vague Question to answer")));
  }

  TEST_CASE("missing statement headers is a parse error") {
    try {
      parse_generation_output("Long Form Answer: x");
      FAIL("expected ParseError");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kParse);
    }
    CHECK_THROWS_AS(parse_generation_output("Must Have Statements: x."), Error);
  }

  TEST_CASE("headers are case-insensitive and may be bolded") {
    const auto out = parse_generation_output(
        "**long form answer**: Take it daily. Never double up.\n"
        "## MUST HAVE STATEMENTS: Take it daily. Do not double the dose!\n"
        "**Nice to have statements:** Store it cold.");
    REQUIRE(std::holds_alternative<GeneratedAnswer>(out));
    const auto& g = std::get<GeneratedAnswer>(out);
    CHECK(g.answer == "Take it daily. Never double up.");
    REQUIRE(g.must_have.size() == 2);
    CHECK(g.must_have[1].text == "Do not double the dose!");
    REQUIRE(g.nice_to_have.size() == 1);
    CHECK(g.nice_to_have[0].text == "Store it cold.");
  }

  TEST_CASE("a reply echoing the demonstration keeps only the last answer") {
    const std::string reply = std::string(one_shot_demonstration()) +
                              "\n### Question: q\n\nLong Form Answer: A.\n"
                              "Must Have Statements: B.\nNice to Have Statements: C. D.";
    const auto out = parse_generation_output(reply);
    const auto& g = std::get<GeneratedAnswer>(out);
    CHECK(g.answer == "A.");
    CHECK(g.must_have.size() == 1);
    CHECK(g.nice_to_have.size() == 2);
  }
}
