#include "promptablate/attribution.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>

#include "json.hpp"
#include "promptablate/error.hpp"
#include "promptablate/text.hpp"

namespace promptablate {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr double kRowSumTolerance = 1e-3;

float load_f32le(const char* p) {
  std::uint32_t bits;
  std::memcpy(&bits, p, sizeof(bits));
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  float f;
  std::memcpy(&f, &bits, sizeof(f));
  return f;
}

void store_f32le(std::string& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, sizeof(bits));
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  char buf[4];
  std::memcpy(buf, &bits, sizeof(bits));
  out.append(buf, 4);
}

std::size_t dim_field(const json& h, const char* key) {
  auto it = h.find(key);
  if (it == h.end() || !it->is_number_integer() || it->get<long long>() < 0) {
    throw ValidationError(std::string("dump header: '") + key + "' must be a non-negative integer");
  }
  return it->get<std::size_t>();
}

}  // namespace

std::string_view to_string(AttentionDump::Variant v) {
  return v == AttentionDump::Variant::Full ? "full" : "reduced";
}

std::size_t AttentionDump::payload_bytes() const {
  const std::size_t per_layer =
      variant == Variant::Full ? heads * tokens + heads * tokens * dim : tokens;
  return layers * per_layer * sizeof(float);
}

void AttentionDump::validate() const {
  if (variant == Variant::Full) {
    if (alpha.size() != layers * heads * tokens) throw ValidationError("dump: alpha size mismatch");
    if (fvec.size() != layers * heads * tokens * dim) throw ValidationError("dump: fvec size mismatch");
    for (std::size_t l = 0; l < layers; ++l) {
      for (std::size_t h = 0; h < heads; ++h) {
        double sum = 0.0;
        for (std::size_t j = 0; j < tokens; ++j) {
          const float a = attention(l, h, j);
          if (!(a >= 0.0f)) {
            throw ValidationError("dump: negative or NaN attention at layer " + std::to_string(l) +
                                  " head " + std::to_string(h) + " token " + std::to_string(j));
          }
          sum += a;
        }
        if (tokens > 0 && std::abs(sum - 1.0) > kRowSumTolerance) {
          throw ValidationError("dump: attention row at layer " + std::to_string(l) + " head " +
                                std::to_string(h) + " sums to " + std::to_string(sum));
        }
      }
    }
  } else {
    if (norms.size() != layers * tokens) throw ValidationError("dump: norms size mismatch");
    for (float v : norms) {
      if (!(v >= 0.0f)) throw ValidationError("dump: negative or NaN stored norm");
    }
  }
}

AttentionDump parse_dump(std::string_view bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string_view::npos) throw ValidationError("dump: missing header line");
  json h;
  try {
    h = json::parse(bytes.substr(0, nl));
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("dump: malformed header: ") + e.what());
  }
  if (h.value("magic", std::string()) != "ATTNDUMP") throw ValidationError("dump: bad magic");
  if (h.value("version", 0) != 1) throw ValidationError("dump: unsupported version");
  if (h.value("dtype", std::string()) != "f32le") throw ValidationError("dump: dtype must be f32le");

  AttentionDump d;
  const std::string variant = h.value("variant", std::string());
  if (variant == "full") d.variant = AttentionDump::Variant::Full;
  else if (variant == "reduced") d.variant = AttentionDump::Variant::Reduced;
  else throw ValidationError("dump: variant must be 'full' or 'reduced'");
  d.layers = dim_field(h, "L");
  d.heads = dim_field(h, "H");
  d.tokens = dim_field(h, "T");
  d.dim = dim_field(h, "d");
  d.prompt_id = h.value("prompt_id", std::string());

  const std::string_view payload = bytes.substr(nl + 1);
  if (payload.size() != d.payload_bytes()) {
    throw ValidationError("dump: payload is " + std::to_string(payload.size()) +
                          " bytes, header implies " + std::to_string(d.payload_bytes()));
  }

  const char* p = payload.data();
  const auto take = [&](std::vector<float>& dst, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i, p += 4) dst.push_back(load_f32le(p));
  };
  if (d.variant == AttentionDump::Variant::Full) {
    const std::size_t a = d.heads * d.tokens;
    d.alpha.reserve(d.layers * a);
    d.fvec.reserve(d.layers * a * d.dim);
    for (std::size_t l = 0; l < d.layers; ++l) {
      take(d.alpha, a);
      take(d.fvec, a * d.dim);
    }
  } else {
    d.norms.reserve(d.layers * d.tokens);
    take(d.norms, d.layers * d.tokens);
  }
  d.validate();
  return d;
}

std::string serialize_dump(const AttentionDump& d) {
  d.validate();
  ordered_json h;
  h["magic"] = "ATTNDUMP";
  h["version"] = 1;
  h["variant"] = std::string(to_string(d.variant));
  h["L"] = d.layers;
  h["H"] = d.heads;
  h["T"] = d.tokens;
  h["d"] = d.dim;
  h["dtype"] = "f32le";
  h["prompt_id"] = d.prompt_id;
  std::string out = h.dump() + "\n";
  out.reserve(out.size() + d.payload_bytes());
  if (d.variant == AttentionDump::Variant::Full) {
    const std::size_t a = d.heads * d.tokens;
    for (std::size_t l = 0; l < d.layers; ++l) {
      for (std::size_t i = 0; i < a; ++i) store_f32le(out, d.alpha[l * a + i]);
      for (std::size_t i = 0; i < a * d.dim; ++i) store_f32le(out, d.fvec[l * a * d.dim + i]);
    }
  } else {
    for (float v : d.norms) store_f32le(out, v);
  }
  return out;
}

AttentionDump read_dump(const std::string& path) {
  try {
    return parse_dump(text::read_file(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

void write_dump(const AttentionDump& dump, const std::string& path) {
  text::write_file(path, serialize_dump(dump));
}

void TokenSpanMap::validate(std::size_t token_count) const {
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const auto& s = spans[i];
    if (s.start != cursor || s.end <= s.start) {
      throw ValidationError("span map: span " + std::to_string(i) + " [" + std::to_string(s.start) +
                            ", " + std::to_string(s.end) + ") breaks the partition at token " +
                            std::to_string(cursor));
    }
    cursor = s.end;
  }
  if (cursor != token_count) {
    throw ValidationError("span map covers " + std::to_string(cursor) + " tokens, dump has " +
                          std::to_string(token_count));
  }
  if (!token_texts.empty() && token_texts.size() != token_count) {
    throw ValidationError("span map: token_texts has " + std::to_string(token_texts.size()) +
                          " entries for " + std::to_string(token_count) + " tokens");
  }
}

TokenSpanMap parse_span_file(std::string_view json_text) {
  TokenSpanMap m;
  try {
    const json j = json::parse(json_text);
    m.prompt_id = j.at("prompt_id").get<std::string>();
    m.token_texts = j.value("token_texts", std::vector<std::string>{});
    m.hooked_blocks = j.value("hooked_blocks", std::vector<std::string>{});
    for (const auto& s : j.at("spans")) {
      TokenSpan t;
      t.kind = parse_component_kind(s.at("kind").get<std::string>());
      if (auto it = s.find("demo"); it != s.end() && !it->is_null()) t.demo_index = it->get<std::size_t>();
      t.start = s.at("start").get<std::size_t>();
      t.end = s.at("end").get<std::size_t>();
      m.spans.push_back(t);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("span file: ") + e.what());
  }
  return m;
}

std::string serialize_span_file(const TokenSpanMap& m) {
  ordered_json j;
  j["prompt_id"] = m.prompt_id;
  j["token_texts"] = m.token_texts;
  ordered_json spans = ordered_json::array();
  for (const auto& s : m.spans) {
    ordered_json e;
    e["kind"] = std::string(to_string(s.kind));
    e["demo"] = s.demo_index ? ordered_json(*s.demo_index) : ordered_json(nullptr);
    e["start"] = s.start;
    e["end"] = s.end;
    spans.push_back(std::move(e));
  }
  j["spans"] = std::move(spans);
  if (!m.hooked_blocks.empty()) j["hooked_blocks"] = m.hooked_blocks;
  return j.dump() + "\n";
}

TokenSpanMap read_span_file(const std::string& path) {
  try {
    return parse_span_file(text::read_file(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

void write_span_file(const TokenSpanMap& map, const std::string& path) {
  text::write_file(path, serialize_span_file(map));
}

TokenSpanMap token_spans_from_offsets(const AssembledPrompt& prompt,
                                      const std::vector<std::pair<std::size_t, std::size_t>>& offsets) {
  const auto& spans = prompt.spans;
  if (spans.empty()) throw ValidationError("assembled prompt has no spans");
  TokenSpanMap out;
  out.prompt_id = text::hex64(text::fnv1a64(prompt.text));

  std::vector<std::size_t> owner(offsets.size());
  for (std::size_t t = 0; t < offsets.size(); ++t) {
    const auto [b, e] = offsets[t];
    std::size_t best = spans.size();
    if (e > b) {
      std::size_t best_overlap = 0;
      for (std::size_t s = 0; s < spans.size(); ++s) {
        const std::size_t lo = std::max(b, spans[s].start), hi = std::min(e, spans[s].end);
        const std::size_t overlap = hi > lo ? hi - lo : 0;
        if (overlap > 0 && overlap >= best_overlap) {
          best_overlap = overlap;
          best = s;
        }
      }
    }
    if (best == spans.size()) {
      // Zero-width (or out-of-range) token: the span holding its start,
      // else whatever the previous token belonged to.
      for (std::size_t s = 0; s < spans.size(); ++s) {
        if (spans[s].start <= b && b < spans[s].end) best = s;
      }
      if (best == spans.size()) best = t > 0 ? owner[t - 1] : 0;
    }
    owner[t] = best;
  }

  for (std::size_t t = 0; t < owner.size(); ++t) {
    const Span& s = spans[owner[t]];
    if (!out.spans.empty() && out.spans.back().kind == s.kind &&
        out.spans.back().demo_index == s.demo_index) {
      out.spans.back().end = t + 1;
    } else {
      out.spans.push_back(TokenSpan{s.kind, s.demo_index, t, t + 1});
    }
  }
  return out;
}

double token_contribution(const AttentionDump& dump, std::size_t layer, std::size_t token) {
  if (dump.variant != AttentionDump::Variant::Full) {
    throw UnsupportedError("token_contribution needs a full dump; reduced dumps carry stored norms");
  }
  if (layer >= dump.layers || token >= dump.tokens) throw ValidationError("token or layer out of range");
  std::vector<double> acc(dump.dim, 0.0);
  for (std::size_t h = 0; h < dump.heads; ++h) {
    const double a = dump.attention(layer, h, token);
    const auto v = dump.value_vector(layer, h, token);
    for (std::size_t k = 0; k < dump.dim; ++k) acc[k] += a * v[k];
  }
  double sq = 0.0;
  for (double x : acc) sq += x * x;
  return std::sqrt(sq);
}

std::vector<double> per_token_norms(const AttentionDump& dump) {
  if (dump.layers == 0) throw ValidationError("dump has no layers");
  std::vector<double> out(dump.tokens, 0.0);
  for (std::size_t l = 0; l < dump.layers; ++l) {
    for (std::size_t j = 0; j < dump.tokens; ++j) {
      out[j] += dump.variant == AttentionDump::Variant::Full
                    ? token_contribution(dump, l, j)
                    : static_cast<double>(dump.norms[l * dump.tokens + j]);
    }
  }
  for (double& v : out) v /= static_cast<double>(dump.layers);
  return out;
}

namespace {

std::string detailed_key(const TokenSpan& s) {
  std::string key(to_string(s.kind));
  if (s.demo_index) key += "#" + std::to_string(*s.demo_index + 1);
  else if (s.kind == ComponentKind::InlineInstruction) key += "#test";
  return key;
}

void fill_percentages(std::map<std::string, ComponentScore>& m) {
  double total = 0.0;
  for (const auto& [k, v] : m) total += v.raw;
  for (auto& [k, v] : m) v.percent = total > 0.0 ? v.raw / total * 100.0 : 100.0 / static_cast<double>(m.size());
}

}  // namespace

AttributionResult component_scores(const std::vector<double>& norms, const TokenSpanMap& span_map,
                                   const AttributionOptions& options) {
  span_map.validate(norms.size());
  const std::size_t limit =
      options.include_query_token || norms.empty() ? norms.size() : norms.size() - 1;

  struct Acc {
    double sum = 0.0;
    std::size_t count = 0;
  };
  std::map<std::string, Acc> pooled, detailed;
  for (const auto& s : span_map.spans) {
    const std::string pk(to_string(s.kind)), dk = detailed_key(s);
    pooled.try_emplace(pk);
    detailed.try_emplace(dk);
    for (std::size_t j = s.start; j < s.end && j < limit; ++j) {
      pooled[pk].sum += norms[j];
      ++pooled[pk].count;
      detailed[dk].sum += norms[j];
      ++detailed[dk].count;
    }
  }

  AttributionResult r;
  const auto finish = [&](const std::map<std::string, Acc>& acc, std::map<std::string, ComponentScore>& out) {
    for (const auto& [k, a] : acc) {
      if (a.count == 0) {
        r.warnings.push_back("component '" + k + "' has no attributed tokens; excluded");
        continue;
      }
      out[k] = ComponentScore{a.sum / static_cast<double>(a.count), 0.0, a.count};
    }
    fill_percentages(out);
  };
  finish(pooled, r.components);
  finish(detailed, r.detailed);
  return r;
}

AttributionResult average_over_samples(const std::vector<AttributionResult>& results) {
  if (results.empty()) throw InsufficientDataError("no attribution samples to average");
  AttributionResult out;
  out.samples = 0;
  const auto same_keys = [](const std::map<std::string, ComponentScore>& a,
                            const std::map<std::string, ComponentScore>& b) {
    if (a.size() != b.size()) return false;
    for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
      if (ia->first != ib->first) return false;
    }
    return true;
  };
  for (const auto& r : results) {
    if (!same_keys(r.components, results.front().components) ||
        !same_keys(r.detailed, results.front().detailed)) {
      throw ValidationError("attribution samples have different component sets");
    }
  }
  const auto average = [&](auto member) {
    std::map<std::string, ComponentScore> m;
    for (const auto& [k, v] : results.front().*member) {
      double sum = 0.0;
      std::size_t tokens = 0;
      for (const auto& r : results) {
        sum += (r.*member).at(k).raw;
        tokens += (r.*member).at(k).tokens;
      }
      m[k] = ComponentScore{sum / static_cast<double>(results.size()), 0.0, tokens};
    }
    fill_percentages(m);
    return m;
  };
  out.components = average(&AttributionResult::components);
  out.detailed = average(&AttributionResult::detailed);
  for (const auto& r : results) {
    out.samples += r.samples;
    out.warnings.insert(out.warnings.end(), r.warnings.begin(), r.warnings.end());
  }
  return out;
}

std::vector<AttributionSample> filter_correct(const std::vector<AttributionSample>& samples,
                                              const std::set<std::string>& correct_ids) {
  std::vector<AttributionSample> out;
  for (const auto& s : samples) {
    if (correct_ids.count(s.prompt_id)) out.push_back(s);
  }
  return out;
}

}  // namespace promptablate
