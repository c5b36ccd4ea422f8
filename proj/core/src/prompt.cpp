#include "forge/prompt.hpp"

#include <array>
#include <optional>
#include <regex>

#include "forge/error.hpp"
#include "forge/text.hpp"

namespace forge {
namespace {

constexpr std::string_view kInstruction =
    "Instruction: Answer the question in a 'Long Form Answer'.\n"
    "If you could not answer the question or question is vague, then response "
    "with 'Vague Question to answer'.\n"
    "In the process, generate 'Must Have Statements' and 'Nice to Have "
    "Statements' according to the conditions below.\n"
    "\n"
    "Must Have Statements: it indicates that a model must include this "
    "statement in order to be medically accurate (e.g., providing all "
    "contrindications for a drug).\n"
    "Nice to Have Statements: it indicates the statement is supplemental in "
    "nature (e.g., providing additional conditions where this drug may be "
    "helpful).\n"
    "\n";

constexpr std::string_view kDemonstration =
    "### Question: And what happens if I miss a dose of Saxenda?\n"
    "\n"
    "Long Form Answer: Liraglutide (Saxenda) is a prescription drug that is "
    "used for weight loss and to help keep weight off once weight has been "
    "lost. It is used for obese adults or overweight adults who have "
    "weight-related medical problems. If you miss your dose of Saxenda, take a "
    "dose as soon as you remember on the same day. Then take your next daily "
    "dose as usual on the following day. Do not take an extra dose of Saxenda "
    "or increase your dose to make up for a missed dose. If you miss your dose "
    "of Saxenda for 3 days or more, contact your healthcare provider to "
    "consult about how to restart your treatment.\n"
    "\n"
    "Must Have Statements: If a dose of Saxenda is missed for 3 days or more, "
    "a healthcare provider should be contacted to consult about restarting the "
    "treatment. The dose of Saxenda should not be increased to make up for a "
    "missed dose. An extra dose of Saxenda should not be taken to make up for "
    "a missed dose. The next daily dose of Saxenda should be taken as usual on "
    "the following day after a missed dose. If a dose of Saxenda is missed, "
    "take a dose as soon as remembered on the same day.\n"
    "\n"
    "Nice to Have Statements: Liraglutide (Saxenda) is a prescription drug "
    "used for weight loss and to maintain weight loss in obese or overweight "
    "adults with weight-related medical problems.\n";

enum class Section { kAnswer, kMustHave, kNiceToHave };

struct HeaderHit {
  Section section;
  std::size_t begin;  // start of header
  std::size_t end;    // first byte of section body
};

const std::regex& header_regex() {
  // Optional heading marks / bold around the label, optional colon.
  static const std::regex re(
      R"((#+[ \t]*)?(\*\*|__)?[ \t]*(long[ \t]+form[ \t]+answer|must[ \t]+have[ \t]+statements|nice[ \t]+to[ \t]+have[ \t]+statements)[ \t]*(\*\*|__)?[ \t]*:?[ \t]*(\*\*|__)?)",
      std::regex::icase | std::regex::ECMAScript);
  return re;
}

Section section_of(const std::string& label) {
  const std::string lower = to_lower(label);
  if (lower.rfind("long", 0) == 0) return Section::kAnswer;
  if (lower.rfind("must", 0) == 0) return Section::kMustHave;
  return Section::kNiceToHave;
}

std::vector<Statement> to_statements(const std::string& body, StatementKind kind) {
  std::vector<Statement> out;
  for (auto& sentence : split_sentences(body)) {
    // Strip list bullets a generator may add.
    std::string s = sentence;
    while (!s.empty() && (s.front() == '-' || s.front() == '*' || s.front() == ' ')) {
      s.erase(s.begin());
    }
    if (!tokenize(s).empty()) out.push_back({std::move(s), kind});
  }
  return out;
}

}  // namespace

std::string_view one_shot_demonstration() { return kDemonstration; }

std::string render_generation_prompt(std::string_view question,
                                     std::string_view answer) {
  if (trim(question).empty()) {
    throw Error(ErrorKind::kEmptyQuestion, "cannot render a prompt for an empty question");
  }
  std::string prompt;
  prompt.reserve(kInstruction.size() + kDemonstration.size() + question.size() + 64);
  prompt += kInstruction;
  prompt += kDemonstration;
  prompt += "\n### Question: ";
  prompt += question;
  prompt += "\n\nLong Form Answer:";
  if (!trim(answer).empty()) {
    prompt += ' ';
    prompt += answer;
  }
  prompt += '\n';
  return prompt;
}

GenerationOutput parse_generation_output(std::string_view text) {
  const std::string haystack(text);
  if (to_lower(haystack).find(to_lower(kVagueSentinel)) != std::string::npos) {
    return AmbiguousMarker{};
  }

  std::vector<HeaderHit> hits;
  for (auto it = std::sregex_iterator(haystack.begin(), haystack.end(), header_regex());
       it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    hits.push_back({section_of(m[3].str()), static_cast<std::size_t>(m.position(0)),
                    static_cast<std::size_t>(m.position(0) + m.length(0))});
  }

  std::array<std::optional<std::string>, 3> bodies;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    const std::size_t stop = i + 1 < hits.size() ? hits[i + 1].begin : haystack.size();
    auto& slot = bodies[static_cast<std::size_t>(hits[i].section)];
    // Last occurrence wins: echoed demonstrations precede the real reply.
    slot = trim(std::string_view(haystack).substr(hits[i].end, stop - hits[i].end));
  }

  const auto& answer = bodies[static_cast<std::size_t>(Section::kAnswer)];
  const auto& mh = bodies[static_cast<std::size_t>(Section::kMustHave)];
  const auto& nh = bodies[static_cast<std::size_t>(Section::kNiceToHave)];
  if (!answer) throw Error(ErrorKind::kParse, "no 'Long Form Answer' header in output");
  if (!mh) throw Error(ErrorKind::kParse, "no 'Must Have Statements' header in output");

  GeneratedAnswer out;
  out.answer = *answer;
  out.must_have = to_statements(*mh, StatementKind::kMustHave);
  if (nh) out.nice_to_have = to_statements(*nh, StatementKind::kNiceToHave);
  return out;
}

}  // namespace forge
