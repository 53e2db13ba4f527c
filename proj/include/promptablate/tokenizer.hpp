#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace promptablate {

/// Token segmentation used to keep corrupted text the same length as the
/// original. Pieces returned by a subword tokenizer are expected to
/// concatenate back to the input text.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;

  virtual std::vector<std::string> tokenize(std::string_view text) const = 0;

  // True when tokens are whitespace-delimited words, so joining n words with
  // single spaces always yields n tokens.
  virtual bool word_level() const { return false; }

  std::size_t count(std::string_view text) const { return tokenize(text).size(); }
};

class WhitespaceTokenizer final : public Tokenizer {
 public:
  std::vector<std::string> tokenize(std::string_view text) const override;
  bool word_level() const override { return true; }
};

}  // namespace promptablate
