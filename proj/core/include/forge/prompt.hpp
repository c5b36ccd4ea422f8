#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "forge/dataset.hpp"

namespace forge {

// Sentinel a generator emits when it declines a vague question.
inline constexpr std::string_view kVagueSentinel = "Vague Question to answer";

// The answer-and-statement generation prompt with its one-shot Saxenda
// demonstration, ending in the target question. When answer is non-empty it
// is pre-filled after the final "Long Form Answer:" header so the model only
// decomposes it; otherwise the header is left open.
std::string render_generation_prompt(std::string_view question,
                                     std::string_view answer = {});

// The demonstration block alone (question, answer and both statement lists).
std::string_view one_shot_demonstration();

struct GeneratedAnswer {
  std::string answer;
  std::vector<Statement> must_have;
  std::vector<Statement> nice_to_have;
};

struct AmbiguousMarker {};

using GenerationOutput = std::variant<GeneratedAnswer, AmbiguousMarker>;

// Splits a generator reply on its "Long Form Answer" / "Must Have Statements"
// / "Nice to Have Statements" headers (case-insensitive, optional markdown
// bold or heading marks). Throws Error(kParse) when the sentinel is absent and
// either of the first two headers is missing.
GenerationOutput parse_generation_output(std::string_view text);

}  // namespace forge
