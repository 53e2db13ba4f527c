#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace promptablate {

/// The kinds of text a prompt is made of. Every character of an assembled
/// prompt belongs to exactly one kind; joiners ("\n\n", " ", ".") are
/// Separator.
enum class ComponentKind {
  TaskInstruction,
  DemonstrationInput,
  InlineInstruction,
  Label,
  Separator,
  TestInstance,
};

/// Stable snake_case name, used in span sidecar files and reports.
std::string_view to_string(ComponentKind kind);
ComponentKind parse_component_kind(std::string_view name);

enum class TaskType { Classification, Generation };

std::string_view to_string(TaskType type);
TaskType parse_task_type(std::string_view name);

struct Demonstration {
  std::string input;
  std::string label;

  bool operator==(const Demonstration&) const = default;
};

struct TestInstance {
  std::string input;
  // Acceptable answers; a single label for classification.
  std::vector<std::string> references;

  bool operator==(const TestInstance&) const = default;
};

struct TaskSpec {
  std::string id;
  TaskType type = TaskType::Classification;
  std::string task_instruction;
  std::string inline_instruction;
  std::vector<std::string> label_space;
  std::vector<Demonstration> demonstrations;
  std::vector<TestInstance> instances;
  // Free-form provenance metadata carried through serialization.
  std::string source;
  std::string license;

  bool is_classification() const { return type == TaskType::Classification; }

  /// Throws ValidationError naming the offending field (e.g.
  /// "demonstrations[2].label") when an invariant does not hold.
  void validate() const;

  bool operator==(const TaskSpec&) const = default;
};

struct DemoOverride {
  std::optional<std::string> input;
  std::optional<std::string> label;

  bool operator==(const DemoOverride&) const = default;
};

struct InstructionOverrides {
  std::optional<std::string> task;
  std::optional<std::string> inline_instruction;

  bool operator==(const InstructionOverrides&) const = default;
};

/// Declarative description of one prompt. Overrides replace text only; the
/// component layout is decided by the flags alone.
struct PromptSpec {
  std::shared_ptr<const TaskSpec> task;
  std::size_t shots = 0;
  bool include_task_instruction = false;
  std::vector<bool> inline_mask;  // one flag per selected demonstration
  bool include_demo_inputs = true;
  bool include_demo_labels = true;
  bool include_test_inline = false;
  std::vector<DemoOverride> demo_overrides;  // empty, or one per selected demonstration
  InstructionOverrides instruction_overrides;
  // Off by default: demonstrations are taken in task-file order.
  std::optional<std::uint64_t> demo_shuffle_seed;
  TestInstance instance;

  /// Throws ConfigurationError / ValidationError.
  void validate() const;

  /// Indices into task->demonstrations, one per shot.
  std::vector<std::size_t> selected_demo_indices() const;

  /// Effective texts after overrides.
  std::string task_instruction_text() const;
  std::string inline_instruction_text() const;
  Demonstration demonstration(std::size_t shot) const;

  bool operator==(const PromptSpec& other) const;
};

struct Span {
  ComponentKind kind = ComponentKind::Separator;
  std::optional<std::size_t> demo_index;
  // Half-open range in Unicode scalar values.
  std::size_t start = 0;
  std::size_t end = 0;

  bool operator==(const Span&) const = default;
};

struct AssembledPrompt {
  std::string text;  // UTF-8
  std::vector<Span> spans;

  std::size_t length() const;  // in code points
  std::string_view span_text(const Span& span) const;
};

/// Renders a prompt. Layout:
///   [task instruction] "\n\n"
///   per demonstration: [input] " " [inline instruction] " " [label] "." "\n\n"
///   [test instance] " " [inline instruction]
/// where absent pieces drop out together with the joiner that would link
/// them. A demonstration with no pieces left is omitted entirely.
AssembledPrompt assemble(const PromptSpec& spec);

/// The closed set of prompt configurations, e.g. "baseline",
/// "plus_task_instr_demos", "inline_in_2_demos".
const std::vector<std::string>& configuration_names();

/// Builds the PromptSpec for a named configuration. Demonstration-bearing
/// configurations use `shots` demonstrations (4 in every reported setting).
PromptSpec named_configuration(std::string_view name,
                               std::shared_ptr<const TaskSpec> task,
                               TestInstance instance,
                               std::size_t shots = 4);

}  // namespace promptablate
