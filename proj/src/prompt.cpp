#include "promptablate/prompt.hpp"

#include <algorithm>
#include <array>

#include "promptablate/error.hpp"
#include "promptablate/rng.hpp"
#include "promptablate/text.hpp"

namespace promptablate {
namespace {

constexpr std::array<std::pair<ComponentKind, std::string_view>, 6> kKindNames{{
    {ComponentKind::TaskInstruction, "task_instruction"},
    {ComponentKind::DemonstrationInput, "demo_input"},
    {ComponentKind::InlineInstruction, "inline_instruction"},
    {ComponentKind::Label, "label"},
    {ComponentKind::Separator, "separator"},
    {ComponentKind::TestInstance, "test_instance"},
}};

constexpr std::string_view kSeparator = "\n\n";

}  // namespace

std::string_view to_string(ComponentKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

ComponentKind parse_component_kind(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  throw ValidationError("unknown component kind '" + std::string(name) + "'");
}

std::string_view to_string(TaskType type) {
  return type == TaskType::Classification ? "classification" : "generation";
}

TaskType parse_task_type(std::string_view name) {
  if (name == "classification") return TaskType::Classification;
  if (name == "generation") return TaskType::Generation;
  throw ValidationError("unknown task type '" + std::string(name) + "'");
}

void TaskSpec::validate() const {
  if (text::is_blank(id)) throw ValidationError("id: must be non-empty");
  if (text::is_blank(task_instruction)) throw ValidationError("task_instruction: must be non-empty");
  if (text::is_blank(inline_instruction)) throw ValidationError("inline_instruction: must be non-empty");
  if (is_classification()) {
    if (label_space.empty()) {
      throw ValidationError("label_space: required for classification tasks");
    }
    for (std::size_t i = 0; i < label_space.size(); ++i) {
      if (text::is_blank(label_space[i])) {
        throw ValidationError("label_space[" + std::to_string(i) + "]: must be non-empty");
      }
      for (std::size_t j = 0; j < i; ++j) {
        if (label_space[i] == label_space[j]) {
          throw ValidationError("label_space[" + std::to_string(i) + "]: duplicate label '" +
                                label_space[i] + "'");
        }
      }
    }
  }
  const auto in_space = [&](const std::string& l) {
    return std::find(label_space.begin(), label_space.end(), l) != label_space.end();
  };
  for (std::size_t i = 0; i < demonstrations.size(); ++i) {
    const auto& d = demonstrations[i];
    const std::string path = "demonstrations[" + std::to_string(i) + "]";
    if (text::is_blank(d.input)) throw ValidationError(path + ".input: must be non-empty");
    if (text::is_blank(d.label)) throw ValidationError(path + ".label: must be non-empty");
    if (is_classification() && !in_space(d.label)) {
      throw ValidationError(path + ".label: '" + d.label + "' is not in label_space");
    }
  }
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& inst = instances[i];
    const std::string path = "instances[" + std::to_string(i) + "]";
    if (text::is_blank(inst.input)) throw ValidationError(path + ".input: must be non-empty");
    if (inst.references.empty()) throw ValidationError(path + ".references: must be non-empty");
    if (is_classification()) {
      if (inst.references.size() != 1) {
        throw ValidationError(path + ".references: classification instances carry exactly one label");
      }
      if (!in_space(inst.references.front())) {
        throw ValidationError(path + ".references[0]: '" + inst.references.front() +
                              "' is not in label_space");
      }
    }
  }
}

void PromptSpec::validate() const {
  if (!task) throw ConfigurationError("prompt spec has no task");
  if (shots > task->demonstrations.size()) {
    throw ConfigurationError("requested " + std::to_string(shots) + " shots but task '" + task->id +
                             "' has only " + std::to_string(task->demonstrations.size()) +
                             " demonstrations");
  }
  if (inline_mask.size() != shots) {
    throw ConfigurationError("inline_mask has " + std::to_string(inline_mask.size()) +
                             " entries for " + std::to_string(shots) + " shots");
  }
  if (!demo_overrides.empty() && demo_overrides.size() != shots) {
    throw ConfigurationError("demo_overrides must be empty or have one entry per shot");
  }
  if (text::is_blank(instance.input)) throw ValidationError("test instance input is empty");
}

std::vector<std::size_t> PromptSpec::selected_demo_indices() const {
  std::vector<std::size_t> idx(task ? task->demonstrations.size() : 0);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  if (demo_shuffle_seed) {
    Rng rng(*demo_shuffle_seed);
    rng.shuffle(idx);
  }
  idx.resize(std::min(shots, idx.size()));
  return idx;
}

std::string PromptSpec::task_instruction_text() const {
  return instruction_overrides.task ? *instruction_overrides.task : task->task_instruction;
}

std::string PromptSpec::inline_instruction_text() const {
  return instruction_overrides.inline_instruction ? *instruction_overrides.inline_instruction
                                                  : task->inline_instruction;
}

Demonstration PromptSpec::demonstration(std::size_t shot) const {
  Demonstration d = task->demonstrations.at(selected_demo_indices().at(shot));
  if (!demo_overrides.empty()) {
    const auto& o = demo_overrides.at(shot);
    if (o.input) d.input = *o.input;
    if (o.label) d.label = *o.label;
  }
  return d;
}

bool PromptSpec::operator==(const PromptSpec& o) const {
  const bool same_task = task == o.task || (task && o.task && *task == *o.task);
  return same_task && shots == o.shots && include_task_instruction == o.include_task_instruction &&
         inline_mask == o.inline_mask && include_demo_inputs == o.include_demo_inputs &&
         include_demo_labels == o.include_demo_labels &&
         include_test_inline == o.include_test_inline && demo_overrides == o.demo_overrides &&
         instruction_overrides == o.instruction_overrides &&
         demo_shuffle_seed == o.demo_shuffle_seed && instance == o.instance;
}

std::size_t AssembledPrompt::length() const { return text::codepoint_count(text); }

std::string_view AssembledPrompt::span_text(const Span& span) const {
  return text::slice(text, span.start, span.end);
}

namespace {

class Builder {
 public:
  void emit(ComponentKind kind, std::optional<std::size_t> demo, std::string_view piece) {
    if (piece.empty()) return;
    const std::size_t n = text::codepoint_count(piece);
    out_.spans.push_back(Span{kind, demo, cursor_, cursor_ + n});
    out_.text.append(piece);
    cursor_ += n;
  }

  void separator(std::string_view piece) { emit(ComponentKind::Separator, std::nullopt, piece); }

  AssembledPrompt finish() && { return std::move(out_); }

 private:
  AssembledPrompt out_;
  std::size_t cursor_ = 0;
};

}  // namespace

AssembledPrompt assemble(const PromptSpec& spec) {
  spec.validate();
  Builder b;

  if (spec.include_task_instruction) {
    b.emit(ComponentKind::TaskInstruction, std::nullopt, spec.task_instruction_text());
    b.separator(kSeparator);
  }

  const std::string inline_text = spec.inline_instruction_text();
  const auto selected = spec.selected_demo_indices();
  for (std::size_t i = 0; i < spec.shots; ++i) {
    Demonstration demo = spec.task->demonstrations[selected[i]];
    if (!spec.demo_overrides.empty()) {
      const auto& o = spec.demo_overrides[i];
      if (o.input) demo.input = *o.input;
      if (o.label) demo.label = *o.label;
    }
    bool any = false;
    const auto piece = [&](ComponentKind kind, std::string_view t) {
      if (any) b.separator(" ");
      b.emit(kind, i, t);
      any = true;
    };
    if (spec.include_demo_inputs) piece(ComponentKind::DemonstrationInput, demo.input);
    if (spec.inline_mask[i]) piece(ComponentKind::InlineInstruction, inline_text);
    if (spec.include_demo_labels) {
      piece(ComponentKind::Label, demo.label);
      b.separator(".");
    }
    if (any) b.separator(kSeparator);
  }

  b.emit(ComponentKind::TestInstance, std::nullopt, spec.instance.input);
  if (spec.include_test_inline) {
    b.separator(" ");
    b.emit(ComponentKind::InlineInstruction, std::nullopt, inline_text);
  }
  return std::move(b).finish();
}

namespace {

std::vector<std::string> build_configuration_names() {
  std::vector<std::string> names = {
      "test_instance",          "plus_task_instr",       "plus_inline_instr",
      "plus_both_instr",        "plus_demos",            "plus_task_instr_demos",
      "plus_inline_instr_demos", "baseline",             "baseline_minus_inputs",
      "baseline_minus_labels",
  };
  for (int k = 0; k <= 4; ++k) names.push_back("inline_in_" + std::to_string(k) + "_demos");
  return names;
}

// Parses "inline_in_<k>_demos".
std::optional<std::size_t> inline_count(std::string_view name) {
  constexpr std::string_view prefix = "inline_in_";
  constexpr std::string_view suffix = "_demos";
  if (name.size() <= prefix.size() + suffix.size() || !name.starts_with(prefix) ||
      !name.ends_with(suffix)) {
    return std::nullopt;
  }
  const auto digits = name.substr(prefix.size(), name.size() - prefix.size() - suffix.size());
  if (digits.size() != 1 || digits[0] < '0' || digits[0] > '4') return std::nullopt;
  return static_cast<std::size_t>(digits[0] - '0');
}

}  // namespace

const std::vector<std::string>& configuration_names() {
  static const std::vector<std::string> names = build_configuration_names();
  return names;
}

PromptSpec named_configuration(std::string_view name, std::shared_ptr<const TaskSpec> task,
                               TestInstance instance, std::size_t shots) {
  PromptSpec spec;
  spec.task = std::move(task);
  spec.instance = std::move(instance);

  // Start from "test instance only" and switch components on.
  const auto with_demos = [&](bool inline_in_demos) {
    spec.shots = shots;
    spec.inline_mask.assign(shots, inline_in_demos);
    spec.include_demo_inputs = true;
    spec.include_demo_labels = true;
  };
  spec.shots = 0;
  spec.include_demo_inputs = true;
  spec.include_demo_labels = true;

  if (name == "test_instance") {
  } else if (name == "plus_task_instr") {
    spec.include_task_instruction = true;
  } else if (name == "plus_inline_instr") {
    spec.include_test_inline = true;
  } else if (name == "plus_both_instr") {
    spec.include_task_instruction = true;
    spec.include_test_inline = true;
  } else if (name == "plus_demos") {
    with_demos(false);
  } else if (name == "plus_task_instr_demos") {
    with_demos(false);
    spec.include_task_instruction = true;
  } else if (name == "plus_inline_instr_demos") {
    with_demos(true);
    spec.include_test_inline = true;
  } else if (name == "baseline" || name == "baseline_minus_inputs" ||
             name == "baseline_minus_labels") {
    with_demos(true);
    spec.include_task_instruction = true;
    spec.include_test_inline = true;
    if (name == "baseline_minus_inputs") spec.include_demo_inputs = false;
    if (name == "baseline_minus_labels") spec.include_demo_labels = false;
  } else if (auto k = inline_count(name)) {
    if (*k > shots) {
      throw ConfigurationError(std::string(name) + " needs at least " + std::to_string(*k) +
                               " shots, got " + std::to_string(shots));
    }
    with_demos(true);
    spec.include_task_instruction = true;
    spec.include_test_inline = true;
    // Inline instructions are dropped from the last demonstration backwards.
    for (std::size_t i = *k; i < shots; ++i) spec.inline_mask[i] = false;
  } else {
    throw ConfigurationError("unknown prompt configuration '" + std::string(name) + "'");
  }
  return spec;
}

}  // namespace promptablate
