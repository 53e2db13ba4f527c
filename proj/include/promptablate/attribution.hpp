#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "promptablate/prompt.hpp"

namespace promptablate {

/// Attention exported for one prompt, from the last-token query.
///
/// Full dumps hold, per layer, the attention row alpha [H][T] and the
/// value-output-transformed vectors f(x_j) = W_O(W_V x_j) per head [H][T][d].
/// Reduced dumps hold only the per-layer token norms [T], computed by the
/// exporter in the same order (sum over heads, then norm).
struct AttentionDump {
  enum class Variant { Full, Reduced };

  Variant variant = Variant::Full;
  std::size_t layers = 0;
  std::size_t heads = 0;
  std::size_t tokens = 0;
  std::size_t dim = 0;
  std::string prompt_id;

  std::vector<float> alpha;  // full: L*H*T
  std::vector<float> fvec;   // full: L*H*T*d
  std::vector<float> norms;  // reduced: L*T

  float attention(std::size_t layer, std::size_t head, std::size_t token) const {
    return alpha[(layer * heads + head) * tokens + token];
  }
  std::span<const float> value_vector(std::size_t layer, std::size_t head, std::size_t token) const {
    return {fvec.data() + ((layer * heads + head) * tokens + token) * dim, dim};
  }

  // Payload size in bytes implied by the header fields.
  std::size_t payload_bytes() const;

  /// Checks sizes against the header, alpha >= 0, and (full) that every
  /// attention row sums to 1 within 1e-3.
  void validate() const;
};

std::string_view to_string(AttentionDump::Variant v);

// Binary format: one JSON header line
//   {"magic":"ATTNDUMP","version":1,"variant":"full"|"reduced","L":..,"H":..,
//    "T":..,"d":..,"dtype":"f32le","prompt_id":..}\n
// followed by little-endian float32 payload; per layer, full dumps store alpha
// [H][T] then fvec [H][T][d], reduced dumps store [T] norms.
AttentionDump parse_dump(std::string_view bytes);
std::string serialize_dump(const AttentionDump& dump);
AttentionDump read_dump(const std::string& path);
void write_dump(const AttentionDump& dump, const std::string& path);

struct TokenSpan {
  ComponentKind kind = ComponentKind::Separator;
  std::optional<std::size_t> demo_index;
  std::size_t start = 0;  // token index, half-open
  std::size_t end = 0;

  bool operator==(const TokenSpan&) const = default;
};

struct TokenSpanMap {
  std::string prompt_id;
  std::vector<std::string> token_texts;
  std::vector<TokenSpan> spans;
  std::vector<std::string> hooked_blocks;  // exporter's note on which blocks were hooked

  /// Spans must be sorted, non-empty and cover [0, token_count) exactly.
  void validate(std::size_t token_count) const;
};

TokenSpanMap parse_span_file(std::string_view json_text);
std::string serialize_span_file(const TokenSpanMap& map);
TokenSpanMap read_span_file(const std::string& path);
void write_span_file(const TokenSpanMap& map, const std::string& path);

/// Projects character spans of an assembled prompt onto tokens given each
/// token's [start, end) code-point offsets. A token goes to the span it
/// overlaps most (ties to the later span); zero-width tokens go to the span
/// holding their start offset.
TokenSpanMap token_spans_from_offsets(const AssembledPrompt& prompt,
                                      const std::vector<std::pair<std::size_t, std::size_t>>& offsets);

/// || sum_h alpha[h][j] * f_h(x_j) ||_2 for one layer.
double token_contribution(const AttentionDump& dump, std::size_t layer, std::size_t token);

/// Per-token norm averaged over layers.
std::vector<double> per_token_norms(const AttentionDump& dump);

struct ComponentScore {
  double raw = 0.0;  // mean token norm
  double percent = 0.0;
  std::size_t tokens = 0;

  bool operator==(const ComponentScore&) const = default;
};

struct AttributionResult {
  // Pooled by kind ("task_instruction", "demo_input", ...).
  std::map<std::string, ComponentScore> components;
  // Per-demonstration breakdown ("demo_input#1", "label#3",
  // "inline_instruction#test", ...), with its own percentages.
  std::map<std::string, ComponentScore> detailed;
  std::size_t samples = 1;
  std::vector<std::string> warnings;
};

struct AttributionOptions {
  // The query token itself is not attributed unless asked for.
  bool include_query_token = false;
};

AttributionResult component_scores(const std::vector<double>& norms, const TokenSpanMap& span_map,
                                   const AttributionOptions& options = {});

AttributionResult average_over_samples(const std::vector<AttributionResult>& results);

struct AttributionSample {
  std::string prompt_id;
  AttributionResult result;
};

/// Keeps samples whose prompt id is in `correct_ids`.
std::vector<AttributionSample> filter_correct(const std::vector<AttributionSample>& samples,
                                              const std::set<std::string>& correct_ids);

}  // namespace promptablate
