#include "promptablate/corruption.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "promptablate/error.hpp"
#include "promptablate/text.hpp"

namespace promptablate {

std::vector<std::string> WhitespaceTokenizer::tokenize(std::string_view text) const {
  return text::split_whitespace(text);
}

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string_view target_name(InstructionTarget t) {
  switch (t) {
    case InstructionTarget::Task: return "task";
    case InstructionTarget::Inline: return "inline";
    case InstructionTarget::Both: return "both";
  }
  return "both";
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

// Replacement budget for subword tokenizers before giving up.
constexpr int kMaxResamples = 10000;
constexpr int kMaxPasses = 100;
constexpr int kDrawsPerPosition = 200;

void ensure_overrides(PromptSpec& spec) {
  if (spec.demo_overrides.empty()) spec.demo_overrides.resize(spec.shots);
}

}  // namespace

std::string_view CorruptionSpec::family() const {
  return std::visit(overloaded{
                        [](const NoCorruption&) { return std::string_view("none"); },
                        [](const RandomWordsInstructions&) { return std::string_view("rw_instr"); },
                        [](const WrongLabel&) { return std::string_view("wrong_label"); },
                        [](const RandomWordsLabel&) { return std::string_view("rw_labels"); },
                        [](const OODInputs&) { return std::string_view("ood_inputs"); },
                        [](const RepeatedText&) { return std::string_view("repeated"); },
                    },
                    kind);
}

std::string CorruptionSpec::descriptor() const {
  std::string out(family());
  if (const auto* rw = std::get_if<RandomWordsInstructions>(&kind)) {
    out += ":";
    out += target_name(rw->targets);
    if (rw->rate != 1.0) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "@%.17g", rw->rate);
      out += buf;
    }
  } else if (const auto* rt = std::get_if<RepeatedText>(&kind)) {
    out += ":" + std::to_string(rt->inline_count);
    if (rt->random_words) out += ":rw";
  }
  return out;
}

CorruptionSpec CorruptionSpec::parse(std::string_view descriptor, std::uint64_t seed) {
  const auto bad = [&](const std::string& why) {
    return ConfigurationError("bad corruption '" + std::string(descriptor) + "': " + why);
  };
  const auto parts = split(text::trim(descriptor), ':');
  const std::string_view head = parts.front();
  CorruptionSpec c;
  c.seed = seed;
  if (head == "none" && parts.size() == 1) {
    c.kind = NoCorruption{};
  } else if (head == "wrong_label" && parts.size() == 1) {
    c.kind = WrongLabel{};
  } else if (head == "rw_labels" && parts.size() == 1) {
    c.kind = RandomWordsLabel{};
  } else if (head == "ood_inputs" && parts.size() == 1) {
    c.kind = OODInputs{};
  } else if (head == "rw_instr" && parts.size() == 2) {
    RandomWordsInstructions rw;
    std::string_view target = parts[1];
    if (auto at = target.find('@'); at != std::string_view::npos) {
      const std::string rate(target.substr(at + 1));
      char* end = nullptr;
      rw.rate = std::strtod(rate.c_str(), &end);
      if (rate.empty() || *end != '\0') throw bad("rate is not a number");
      target = target.substr(0, at);
    }
    if (!(rw.rate > 0.0 && rw.rate <= 1.0)) throw bad("rate must be in (0, 1]");
    if (target == "task") rw.targets = InstructionTarget::Task;
    else if (target == "inline") rw.targets = InstructionTarget::Inline;
    else if (target == "both") rw.targets = InstructionTarget::Both;
    else throw bad("target must be task, inline or both");
    c.kind = rw;
  } else if (head == "repeated" && (parts.size() == 2 || parts.size() == 3)) {
    RepeatedText rt;
    const auto digits = parts[1];
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), rt.inline_count);
    if (ec != std::errc() || ptr != digits.data() + digits.size() || digits.empty()) {
      throw bad("inline count is not an integer");
    }
    if (rt.inline_count > 4) throw bad("inline count must be in 0..4");
    if (parts.size() == 3) {
      if (parts[2] != "rw") throw bad("expected ':rw' suffix");
      rt.random_words = true;
    }
    c.kind = rt;
  } else {
    throw bad("unrecognized form");
  }
  return c;
}

WordSource::WordSource(std::vector<std::string> words) {
  for (auto& w : words) {
    const auto t = text::trim(w);
    if (t.empty()) continue;
    if (text::split_whitespace(t).size() != 1) {
      throw ValidationError("wordlist entry '" + std::string(t) + "' contains whitespace");
    }
    words_.emplace_back(t);
  }
  if (words_.empty()) throw ValidationError("wordlist is empty");
}

WordSource WordSource::load(const std::string& path) { return WordSource(text::read_lines(path)); }

SentenceCorpus::SentenceCorpus(std::vector<std::string> sentences) {
  for (auto& s : sentences) {
    const auto t = text::trim(s);
    if (!t.empty()) sentences_.emplace_back(t);
  }
  if (sentences_.empty()) throw ValidationError("sentence corpus is empty");
}

SentenceCorpus SentenceCorpus::load(const std::string& path) {
  return SentenceCorpus(text::read_lines(path));
}

std::string random_words_text(std::string_view input, const Tokenizer& tokenizer,
                              const WordSource& words, double rate, Rng& rng) {
  if (!(rate > 0.0 && rate <= 1.0)) {
    throw ValidationError("random-words rate must be in (0, 1]");
  }
  std::vector<std::string> pieces = tokenizer.tokenize(input);
  const std::size_t n = pieces.size();
  if (n == 0) throw ValidationError("cannot corrupt text with zero tokens");
  // The epsilon keeps e.g. 0.3 * 10 from rounding up to 4.
  const auto k = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(rate * static_cast<double>(n) - 1e-9)), 1, n);

  if (tokenizer.word_level()) {
    for (std::size_t p : rng.sample_without_replacement(n, k)) pieces[p] = words.draw(rng);
    return text::join(pieces, " ");
  }

  if (k == n) {
    // Grow a word sequence one word at a time, rejecting words that would
    // overshoot the target count.
    std::string out;
    std::size_t count = 0;
    int rejects = 0;
    while (count < n) {
      const std::string& w = words.draw(rng);
      std::string candidate = out.empty() ? w : out + " " + w;
      const std::size_t c = tokenizer.count(candidate);
      if (c <= n && c > count) {
        out = std::move(candidate);
        count = c;
      } else if (++rejects > kMaxResamples) {
        throw InfeasibleError("could not match " + std::to_string(n) +
                              " tokens with words from the wordlist");
      }
    }
    return out;
  }

  // Partial replacement: swap each chosen piece for a word (keeping a leading
  // space marker if the piece had one), redrawing that word until it comes
  // back as exactly one token with all other tokens unchanged. Merges across
  // boundaries can still strand a later position; the pass then starts over.
  if (text::join(pieces, "") != input) {
    throw UnsupportedError("partial random-word replacement needs tokens that concatenate to the text");
  }
  auto positions = rng.sample_without_replacement(n, k);
  std::sort(positions.begin(), positions.end());
  int budget = kMaxResamples;
  for (int pass = 0; pass < kMaxPasses && budget > 0; ++pass) {
    std::vector<std::string> trial = pieces;
    bool complete = true;
    for (std::size_t p : positions) {
      const bool lead = !trial[p].empty() && text::is_space(trial[p].front());
      bool fitted = false;
      for (int draws = 0; draws < kDrawsPerPosition && budget > 0 && !fitted; ++draws, --budget) {
        trial[p] = (lead ? " " : "") + words.draw(rng);
        fitted = tokenizer.tokenize(text::join(trial, "")) == trial;
      }
      if (!fitted) {
        complete = false;
        break;
      }
    }
    if (complete) return text::join(trial, "");
  }
  throw InfeasibleError("could not keep token count " + std::to_string(n) +
                        " under partial random-word replacement");
}

Demonstration wrong_label(const Demonstration& demo, const std::vector<std::string>& label_space,
                          Rng& rng) {
  if (label_space.size() < 2) {
    throw InfeasibleError("wrong-label corruption needs at least two labels");
  }
  std::vector<const std::string*> alternatives;
  bool found = false;
  for (const auto& l : label_space) {
    if (l == demo.label) found = true;
    else alternatives.push_back(&l);
  }
  if (!found) throw ValidationError("label '" + demo.label + "' is not in the label space");
  Demonstration out = demo;
  out.label = *alternatives[rng.uniform_index(alternatives.size())];
  return out;
}

PromptSpec random_words_labels(const PromptSpec& spec, const WordSource& words,
                               const Tokenizer& tokenizer, Rng& rng) {
  PromptSpec out = spec;
  ensure_overrides(out);
  for (std::size_t i = 0; i < out.shots; ++i) {
    out.demo_overrides[i].label = random_words_text(spec.demonstration(i).label, tokenizer, words, 1.0, rng);
  }
  return out;
}

PromptSpec ood_inputs(const PromptSpec& spec, const SentenceCorpus& corpus, Rng& rng) {
  PromptSpec out = spec;
  ensure_overrides(out);
  const auto& s = corpus.sentences();
  for (std::size_t i = 0; i < out.shots; ++i) {
    out.demo_overrides[i].input = s[rng.uniform_index(s.size())];
  }
  return out;
}

void check_applicable(const TaskSpec& task, const CorruptionSpec& corruption) {
  if (std::holds_alternative<WrongLabel>(corruption.kind)) {
    if (!task.is_classification()) {
      throw UnsupportedError("wrong-label corruption applies to classification tasks only (task '" +
                             task.id + "')");
    }
    if (task.label_space.size() < 2) {
      throw InfeasibleError("wrong-label corruption needs at least two labels (task '" + task.id + "')");
    }
  }
}

PromptSpec apply(const PromptSpec& spec, const CorruptionSpec& corruption, const WordSource& words,
                 const SentenceCorpus* corpus, const Tokenizer& tokenizer) {
  spec.validate();
  check_applicable(*spec.task, corruption);
  Rng rng(corruption.seed);

  const auto randomize_instructions = [&](PromptSpec& out, InstructionTarget targets, double rate) {
    if (targets != InstructionTarget::Inline) {
      out.instruction_overrides.task =
          random_words_text(spec.task_instruction_text(), tokenizer, words, rate, rng);
    }
    if (targets != InstructionTarget::Task) {
      out.instruction_overrides.inline_instruction =
          random_words_text(spec.inline_instruction_text(), tokenizer, words, rate, rng);
    }
  };

  return std::visit(
      overloaded{
          [&](const NoCorruption&) { return spec; },
          [&](const RandomWordsInstructions& rw) {
            PromptSpec out = spec;
            randomize_instructions(out, rw.targets, rw.rate);
            return out;
          },
          [&](const WrongLabel&) {
            PromptSpec out = spec;
            ensure_overrides(out);
            for (std::size_t i = 0; i < out.shots; ++i) {
              out.demo_overrides[i].label =
                  wrong_label(spec.demonstration(i), spec.task->label_space, rng).label;
            }
            return out;
          },
          [&](const RandomWordsLabel&) { return random_words_labels(spec, words, tokenizer, rng); },
          [&](const OODInputs&) {
            if (!corpus) throw ConfigurationError("OOD-inputs corruption needs a sentence corpus");
            return ood_inputs(spec, *corpus, rng);
          },
          [&](const RepeatedText& rt) {
            if (rt.inline_count > spec.shots) {
              throw ConfigurationError("repeated-text corruption keeps " +
                                       std::to_string(rt.inline_count) + " inline instructions but the prompt has " +
                                       std::to_string(spec.shots) + " demonstrations");
            }
            PromptSpec out = spec;
            for (std::size_t i = 0; i < out.shots; ++i) out.inline_mask[i] = i < rt.inline_count;
            out.include_test_inline = true;
            if (rt.random_words) randomize_instructions(out, InstructionTarget::Both, 1.0);
            return out;
          },
      },
      corruption.kind);
}

}  // namespace promptablate
