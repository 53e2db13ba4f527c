#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "promptablate/prompt.hpp"
#include "promptablate/rng.hpp"
#include "promptablate/tokenizer.hpp"

namespace promptablate {

enum class InstructionTarget { Task, Inline, Both };

struct NoCorruption {
  bool operator==(const NoCorruption&) const = default;
};

/// Task and/or inline instruction replaced by random words.
struct RandomWordsInstructions {
  InstructionTarget targets = InstructionTarget::Both;
  double rate = 1.0;  // fraction of token positions replaced, in (0, 1]

  bool operator==(const RandomWordsInstructions&) const = default;
};

/// Every demonstration label swapped for a different label of the space.
struct WrongLabel {
  bool operator==(const WrongLabel&) const = default;
};

/// Every demonstration label replaced by random words of equal token count.
struct RandomWordsLabel {
  bool operator==(const RandomWordsLabel&) const = default;
};

/// Every demonstration input replaced by a sentence from an unrelated corpus.
struct OODInputs {
  bool operator==(const OODInputs&) const = default;
};

/// Keeps inline instructions in the first `inline_count` demonstrations only;
/// the one after the test instance always stays. With `random_words`, the
/// task and inline instructions are also replaced by random words.
struct RepeatedText {
  std::size_t inline_count = 4;
  bool random_words = false;

  bool operator==(const RepeatedText&) const = default;
};

using CorruptionKind = std::variant<NoCorruption, RandomWordsInstructions, WrongLabel,
                                    RandomWordsLabel, OODInputs, RepeatedText>;

struct CorruptionSpec {
  CorruptionKind kind = NoCorruption{};
  std::uint64_t seed = 0;

  // Short family name ("none", "rw_instr", "wrong_label", "rw_labels",
  // "ood_inputs", "repeated"); used for RNG substream derivation.
  std::string_view family() const;

  // Canonical text form, e.g. "rw_instr:both", "rw_instr:task@0.5",
  // "repeated:2:rw". parse(descriptor()) reproduces the kind.
  std::string descriptor() const;
  static CorruptionSpec parse(std::string_view descriptor, std::uint64_t seed = 0);

  bool operator==(const CorruptionSpec&) const = default;
};

/// Wordlist: one word per line; blank lines are skipped.
class WordSource {
 public:
  explicit WordSource(std::vector<std::string> words);
  static WordSource load(const std::string& path);

  const std::vector<std::string>& words() const { return words_; }
  const std::string& draw(Rng& rng) const { return words_[rng.uniform_index(words_.size())]; }

 private:
  std::vector<std::string> words_;
};

/// Sentence corpus: one sentence per line; blank lines are skipped.
class SentenceCorpus {
 public:
  explicit SentenceCorpus(std::vector<std::string> sentences);
  static SentenceCorpus load(const std::string& path);

  const std::vector<std::string>& sentences() const { return sentences_; }

 private:
  std::vector<std::string> sentences_;
};

/// Replaces ceil(rate * n) of the n tokens of `text` with random words while
/// keeping the token count under `tokenizer` unchanged.
std::string random_words_text(std::string_view text, const Tokenizer& tokenizer,
                              const WordSource& words, double rate, Rng& rng);

Demonstration wrong_label(const Demonstration& demo, const std::vector<std::string>& label_space,
                          Rng& rng);

PromptSpec random_words_labels(const PromptSpec& spec, const WordSource& words,
                               const Tokenizer& tokenizer, Rng& rng);

PromptSpec ood_inputs(const PromptSpec& spec, const SentenceCorpus& corpus, Rng& rng);

/// Applies one corruption. The input spec is never modified; the result is
/// a function of (spec, corruption) only.
PromptSpec apply(const PromptSpec& spec, const CorruptionSpec& corruption, const WordSource& words,
                 const SentenceCorpus* corpus, const Tokenizer& tokenizer);

/// Throws UnsupportedError / InfeasibleError when the corruption cannot be
/// applied to this task.
void check_applicable(const TaskSpec& task, const CorruptionSpec& corruption);

}  // namespace promptablate
