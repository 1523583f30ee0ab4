#include "glossdom/patterns.hpp"

#include <random>
#include <set>

#include <gtest/gtest.h>

#include "glossdom/error.hpp"

namespace glossdom {
namespace {

const std::string kHospital = "a health facility where patients receive treatment";

TEST(Render, NliHypothesisLowercasesLabel) {
  const PatternTemplate p{"domain-of-sentence", Formulation::kNli, "The domain of the sentence is about [label]"};
  const auto q = render(p, kHospital, "Medicine");
  EXPECT_EQ(q.first, kHospital);
  EXPECT_EQ(q.second, "The domain of the sentence is about medicine");
  EXPECT_EQ(q.label, "Medicine");
}

TEST(Render, LowercaseOptOut) {
  const PatternTemplate p{"keep", Formulation::kNsp, "About [label]", false};
  EXPECT_EQ(render(p, "g", "Boston").second, "About Boston");
}

TEST(Render, MlmKeepsMaskSymbolic) {
  const auto* p = find_pattern(builtin_registry(), kDefaultMlmPattern);
  ASSERT_NE(p, nullptr);
  const auto q = render(*p, "G");
  EXPECT_EQ(q.first, "Context: G Topic: [MASK]");
  EXPECT_FALSE(q.second);
  EXPECT_FALSE(q.label);
}

TEST(Render, BareLabelTemplate) {
  const PatternTemplate p{"bare", Formulation::kNli, "[label]", false};
  EXPECT_EQ(render(p, "gloss", "X").second, "X");
}

TEST(Render, ArgumentErrors) {
  const PatternTemplate nli{"n", Formulation::kNli, "Topic: [label]"};
  const auto& mlm = *find_pattern(builtin_registry(), kDefaultMlmPattern);
  EXPECT_THROW(render(nli, "gloss"), InputError);
  EXPECT_THROW(render(mlm, "gloss", "X"), InputError);
  EXPECT_THROW(render(nli, "   ", "X"), InputError);
  EXPECT_THROW(render(PatternTemplate{"m", Formulation::kNli, "no slot"}, "g", "X"), InputError);
  EXPECT_THROW(render(PatternTemplate{"m", Formulation::kMlm, "Context: [context]"}, "g"), InputError);
  EXPECT_THROW(render(PatternTemplate{"m", Formulation::kMlm, "[context] [MASK] [label]"}, "g"), InputError);
  EXPECT_THROW(render(PatternTemplate{"m", Formulation::kNli, "[label] [label]"}, "g", "X"), InputError);
}

TEST(Registry, HoldsExploredPatterns) {
  const auto& r = builtin_registry();
  EXPECT_GE(r.size(), 10u);
  const auto* best = find_pattern(r, "domain-of-sentence");
  ASSERT_NE(best, nullptr);
  EXPECT_EQ(best->text, "The domain of the sentence is about [label]");
  EXPECT_EQ(best->formulation, Formulation::kNli);
  const auto* tod = find_pattern(r, "topic-or-domain");
  ASSERT_NE(tod, nullptr);
  EXPECT_EQ(tod->text, "Topic or domain about [label]");

  std::size_t nli = 0;
  std::set<std::string> ids;
  for (const auto& p : r) {
    nli += p.formulation == Formulation::kNli ? 1 : 0;
    EXPECT_TRUE(ids.insert(p.id).second) << p.id;
  }
  EXPECT_EQ(nli, 9u);
}

TEST(Registry, RenderContainsGlossAndLabelAndIsInjective) {
  std::mt19937 rng(11);
  const std::vector<std::string> words = {"river", "bank", "money", "music", "cell", "law", "star"};
  for (const auto& p : builtin_registry()) {
    std::set<std::string> outputs;
    for (int i = 0; i < 30; ++i) {
      const auto gloss = words[rng() % words.size()] + " " + std::to_string(i) + " " + words[rng() % words.size()];
      if (p.formulation == Formulation::kMlm) {
        const auto q = render(p, gloss);
        EXPECT_NE(q.first.find(gloss), std::string::npos);
        outputs.insert(q.first);
      } else {
        const auto q = render(p, gloss, "Physics");
        EXPECT_NE((q.first + "\n" + *q.second).find(gloss), std::string::npos);
        EXPECT_NE(q.second->find("physics"), std::string::npos);
        outputs.insert(q.first + "\n" + *q.second);
      }
    }
    EXPECT_EQ(outputs.size(), 30u) << p.id;
  }
}

TEST(LoadPatterns, ParsesAndValidates) {
  const auto patterns = parse_patterns(R"([
    {"id": "mine", "formulation": "nli", "template": "This text is about [label]"},
    {"id": "raw", "formulation": "nsp", "template": "[label]", "lowercase_label": false}
  ])");
  ASSERT_EQ(patterns.size(), 2u);
  EXPECT_EQ(patterns[1].formulation, Formulation::kNsp);
  EXPECT_FALSE(patterns[1].lowercase_label);
  EXPECT_THROW(parse_patterns(R"([{"id": "x", "formulation": "nli", "template": "no slot"}])"), InputError);
  EXPECT_THROW(parse_patterns(R"([{"id": "x", "formulation": "gpt", "template": "[label]"}])"), ParseError);
  EXPECT_THROW(parse_patterns(R"([{"id": "x", "formulation": "nli", "template": "[label]"},
                                  {"id": "x", "formulation": "nli", "template": "[label]"}])"),
               InputError);
}

}  // namespace
}  // namespace glossdom
