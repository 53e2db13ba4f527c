#include <gtest/gtest.h>

#include "helpers.hpp"
#include "promptablate/error.hpp"
#include "promptablate/text.hpp"

using namespace promptablate;
using pa_test::toy_task;

namespace {

// Independent rendering of the layout by plain concatenation.
std::string oracle(const TaskSpec& t, const std::string& instance, bool task_instr, std::size_t shots,
                   std::size_t inline_demos, bool inputs, bool labels, bool test_inline) {
  std::string out;
  if (task_instr) out += t.task_instruction + "\n\n";
  for (std::size_t i = 0; i < shots; ++i) {
    std::vector<std::string> parts;
    if (inputs) parts.push_back(t.demonstrations[i].input);
    if (i < inline_demos) parts.push_back(t.inline_instruction);
    if (labels) parts.push_back(t.demonstrations[i].label);
    if (parts.empty()) continue;
    out += text::join(parts, " ");
    if (labels) out += ".";
    out += "\n\n";
  }
  out += instance;
  if (test_inline) out += " " + t.inline_instruction;
  return out;
}

void expect_partition(const AssembledPrompt& p) {
  std::size_t cursor = 0;
  std::string rebuilt;
  for (const auto& s : p.spans) {
    ASSERT_EQ(s.start, cursor);
    ASSERT_LT(s.start, s.end);
    rebuilt += p.span_text(s);
    cursor = s.end;
  }
  EXPECT_EQ(cursor, p.length());
  EXPECT_EQ(rebuilt, p.text);
}

}  // namespace

TEST(Prompt, EveryNamedConfigurationMatchesOracle) {
  auto t = toy_task("toy_sentiment");
  const TestInstance inst = t->instances[0];
  struct Expect {
    const char* name;
    bool task;
    std::size_t shots, inline_demos;
    bool inputs, labels, test_inline;
  };
  const Expect table[] = {
      {"test_instance", false, 0, 0, true, true, false},
      {"plus_task_instr", true, 0, 0, true, true, false},
      {"plus_inline_instr", false, 0, 0, true, true, true},
      {"plus_both_instr", true, 0, 0, true, true, true},
      {"plus_demos", false, 4, 0, true, true, false},
      {"plus_task_instr_demos", true, 4, 0, true, true, false},
      {"plus_inline_instr_demos", false, 4, 4, true, true, true},
      {"baseline", true, 4, 4, true, true, true},
      {"baseline_minus_inputs", true, 4, 4, false, true, true},
      {"baseline_minus_labels", true, 4, 4, true, false, true},
      {"inline_in_0_demos", true, 4, 0, true, true, true},
      {"inline_in_1_demos", true, 4, 1, true, true, true},
      {"inline_in_2_demos", true, 4, 2, true, true, true},
      {"inline_in_3_demos", true, 4, 3, true, true, true},
      {"inline_in_4_demos", true, 4, 4, true, true, true},
  };
  ASSERT_EQ(configuration_names().size(), std::size(table));
  for (const auto& e : table) {
    SCOPED_TRACE(e.name);
    const auto p = assemble(named_configuration(e.name, t, inst));
    EXPECT_EQ(p.text, oracle(*t, inst.input, e.task, e.shots, e.inline_demos, e.inputs, e.labels, e.test_inline));
    expect_partition(p);
  }
}

TEST(Prompt, SpansCarryKindsAndDemoIndices) {
  auto t = toy_task("toy_sentiment");
  const auto p = assemble(named_configuration("baseline", t, t->instances[1]));
  std::map<ComponentKind, int> count;
  for (const auto& s : p.spans) {
    ++count[s.kind];
    switch (s.kind) {
      case ComponentKind::TaskInstruction:
        EXPECT_EQ(p.span_text(s), t->task_instruction);
        EXPECT_FALSE(s.demo_index);
        break;
      case ComponentKind::DemonstrationInput:
        ASSERT_TRUE(s.demo_index);
        EXPECT_EQ(p.span_text(s), t->demonstrations[*s.demo_index].input);
        break;
      case ComponentKind::Label:
        ASSERT_TRUE(s.demo_index);
        EXPECT_EQ(p.span_text(s), t->demonstrations[*s.demo_index].label);
        break;
      case ComponentKind::InlineInstruction:
        EXPECT_EQ(p.span_text(s), t->inline_instruction);
        break;
      case ComponentKind::TestInstance:
        EXPECT_EQ(p.span_text(s), t->instances[1].input);
        break;
      case ComponentKind::Separator:
        EXPECT_FALSE(s.demo_index);
        break;
    }
  }
  EXPECT_EQ(count[ComponentKind::TaskInstruction], 1);
  EXPECT_EQ(count[ComponentKind::DemonstrationInput], 4);
  EXPECT_EQ(count[ComponentKind::Label], 4);
  EXPECT_EQ(count[ComponentKind::InlineInstruction], 5);
  EXPECT_EQ(count[ComponentKind::TestInstance], 1);
}

TEST(Prompt, SpansCountCodepointsNotBytes) {
  auto task = std::make_shared<TaskSpec>(*toy_task("toy_sentiment"));
  task->demonstrations[0].input = "Caf\xC3\xA9 cr\xC3\xA8me was great \xF0\x9F\x98\x80";
  const std::shared_ptr<const TaskSpec> t = task;
  const auto p = assemble(named_configuration("plus_demos", t, {"\xE2\x82\xAC" "5 well spent", {"Positive"}}));
  expect_partition(p);
  EXPECT_EQ(p.spans.front().end, text::codepoint_count(task->demonstrations[0].input));
  EXPECT_EQ(p.span_text(p.spans.back()), "\xE2\x82\xAC" "5 well spent");
  EXPECT_LT(p.length(), p.text.size());
}

TEST(Prompt, AllGoldenPromptsReproduced) {
  for (const char* id : {"agnews", "cola", "com2sense", "copa", "financial_phrasebank", "mathdataset",
                         "medical_question_pair", "rte", "triviaqa", "twitter_emotion"}) {
    SCOPED_TRACE(id);
    auto t = std::make_shared<const TaskSpec>(load_task(pa_test::source_path("data/tasks/") + id + ".json"));
    const auto p = assemble(named_configuration("baseline", t, {"[Test instance.]", {}}));
    EXPECT_EQ(p.text, text::read_file(pa_test::source_path("tests/golden/") + id + ".txt"));
    expect_partition(p);
  }
}

TEST(Prompt, OverridesReplaceTextOnly) {
  auto t = toy_task("toy_sentiment");
  PromptSpec spec = named_configuration("baseline", t, t->instances[0]);
  const auto before = assemble(spec);
  spec.demo_overrides.resize(4);
  spec.demo_overrides[2].label = "Negative";
  spec.instruction_overrides.inline_instruction = "zebra kettle";
  const auto after = assemble(spec);
  ASSERT_EQ(before.spans.size(), after.spans.size());
  for (std::size_t i = 0; i < before.spans.size(); ++i) {
    EXPECT_EQ(before.spans[i].kind, after.spans[i].kind);
    EXPECT_EQ(before.spans[i].demo_index, after.spans[i].demo_index);
  }
  EXPECT_NE(after.text.find("The hotel bed"), std::string::npos);
  EXPECT_NE(after.text.find("zebra kettle Negative."), std::string::npos);
}

TEST(Prompt, ShuffleSeedPermutesDemonstrationsDeterministically) {
  auto t = toy_task("toy_sentiment");
  PromptSpec spec = named_configuration("plus_demos", t, t->instances[0]);
  EXPECT_EQ(spec.selected_demo_indices(), (std::vector<std::size_t>{0, 1, 2, 3}));
  spec.demo_shuffle_seed = 11;
  const auto a = spec.selected_demo_indices();
  EXPECT_EQ(a, spec.selected_demo_indices());
  std::set<std::size_t> uniq(a.begin(), a.end());
  EXPECT_EQ(uniq.size(), 4u);
  for (auto i : a) EXPECT_LT(i, t->demonstrations.size());
}

TEST(Prompt, InvalidSpecsAreRejected) {
  auto t = toy_task("toy_sentiment");
  EXPECT_THROW(named_configuration("no_such", t, t->instances[0]), ConfigurationError);
  EXPECT_THROW(named_configuration("inline_in_3_demos", t, t->instances[0], 2), ConfigurationError);
  EXPECT_THROW(assemble(named_configuration("plus_demos", t, t->instances[0], 9)), Error);
  PromptSpec spec = named_configuration("baseline", t, t->instances[0]);
  spec.inline_mask.pop_back();
  EXPECT_THROW(assemble(spec), Error);
  spec = named_configuration("baseline", t, t->instances[0]);
  spec.task = nullptr;
  EXPECT_THROW(assemble(spec), Error);
}

TEST(TaskSpec, ValidationNamesTheField) {
  TaskSpec t = *toy_task("toy_sentiment");
  t.demonstrations[2].label = "Meh";
  try {
    t.validate();
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("demonstrations[2].label"), std::string::npos) << e.what();
  }
  t = *toy_task("toy_sentiment");
  t.label_space.push_back("Positive");
  EXPECT_THROW(t.validate(), ValidationError);
  t = *toy_task("toy_sentiment");
  t.task_instruction = "  ";
  EXPECT_THROW(t.validate(), ValidationError);
  EXPECT_NO_THROW(toy_task("toy_qa")->validate());
}

TEST(Prompt, ComponentKindNamesRoundTrip) {
  for (auto k : {ComponentKind::TaskInstruction, ComponentKind::DemonstrationInput, ComponentKind::InlineInstruction,
                 ComponentKind::Label, ComponentKind::Separator, ComponentKind::TestInstance}) {
    EXPECT_EQ(parse_component_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_component_kind("nope"), Error);
}
