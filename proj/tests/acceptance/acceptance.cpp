// Acceptance checks, one result line per criterion. Expected values come
// from independent oracles in this file, not from the library.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include "promptablate/attribution.hpp"
#include "promptablate/corruption.hpp"
#include "promptablate/datasets.hpp"
#include "promptablate/error.hpp"
#include "promptablate/experiment.hpp"
#include "promptablate/metrics.hpp"
#include "promptablate/prompt.hpp"
#include "promptablate/rng.hpp"
#include "promptablate/text.hpp"

using namespace promptablate;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

const std::string kData = PA_TEST_DATA;
const std::string kRoot = PA_SOURCE_ROOT;

struct Outcome {
  bool pass = true;
  std::string detail;
};

#define CHECK(cond, msg)          \
  do {                            \
    if (!(cond)) {                \
      o.pass = false;             \
      if (o.detail.empty()) {     \
        std::ostringstream ss_;   \
        ss_ << msg;               \
        o.detail = ss_.str();     \
      }                           \
    }                             \
  } while (0)

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---------------------------------------------------------------- 1
Outcome golden_prompts() {
  Outcome o;
  const auto t0 = Clock::now();
  int matched = 0;
  for (const char* id : {"agnews", "cola", "com2sense", "copa", "financial_phrasebank", "mathdataset",
                         "medical_question_pair", "rte", "triviaqa", "twitter_emotion"}) {
    auto task = std::make_shared<const TaskSpec>(load_task(kRoot + "/data/tasks/" + id + ".json"));
    const auto p = assemble(named_configuration("baseline", task, {"[Test instance.]", {}}));
    const std::string golden = text::read_file(kRoot + "/tests/golden/" + id + ".txt");
    CHECK(p.text == golden, id << ": prompt differs from golden");
    std::size_t cursor = 0;
    std::string rebuilt;
    for (const auto& s : p.spans) {
      CHECK(s.start == cursor && s.end > s.start, id << ": spans do not partition the prompt");
      rebuilt += p.span_text(s);
      cursor = s.end;
    }
    CHECK(cursor == text::codepoint_count(p.text) && rebuilt == p.text, id << ": spans do not cover the prompt");
    if (p.text == golden) ++matched;
  }
  const double secs = seconds_since(t0);
  CHECK(secs < 1.0, "took " << secs << " s");
  if (o.pass) o.detail = std::to_string(matched) + "/10 byte-identical, partition holds, " + std::to_string(secs) + " s";
  return o;
}

// ---------------------------------------------------------------- 2
Outcome baseline_macro() {
  Outcome o;
  // Per-dataset baseline scores of the smallest model, in percent.
  const std::vector<std::pair<std::string, double>> row = {
      {"rte", 53}, {"mqp", 60}, {"fph", 34}, {"te", 23}, {"cola", 51},
      {"agn", 58}, {"copa", 50}, {"c2s", 47}, {"tq", 17.0}, {"math", 14.0}};
  std::vector<ResultRecord> recs;
  for (const auto& [task, pct] : row) {
    const bool generation = task == "tq" || task == "math";
    for (std::size_t i = 0; i < 100; ++i) {
      ResultRecord r;
      r.backend = "gpt2-xl";
      r.task = task;
      r.configuration = "baseline";
      r.corruption = "none";
      r.instance = i;
      r.metric = generation ? Metric::RougeL : Metric::ExactMatch;
      // 100 instances: EM hits on the first pct instances; Rouge-L constant.
      r.score = generation ? pct / 100.0 : (static_cast<double>(i) < pct ? 1.0 : 0.0);
      recs.push_back(r);
    }
  }
  const Report rep = report(recs);
  const auto& base = rep.rows.front();
  CHECK(base.macro_mean.has_value(), "no macro mean");
  const std::string shown = base.macro_mean ? format_score(*base.macro_mean) : "";
  CHECK(shown == "40.7", "macro renders as " << shown);
  CHECK(rep.macro_table.find("| Baseline | 40.7 |") != std::string::npos, "macro table lacks '| Baseline | 40.7 |'");
  if (o.pass) o.detail = "macro " + shown;
  return o;
}

// ---------------------------------------------------------------- 3
std::size_t brute_lcs(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  // Every subsequence of a, tested for being a subsequence of b.
  std::size_t best = 0;
  const std::size_t n = a.size();
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    const auto len = static_cast<std::size_t>(std::popcount(mask));
    if (len <= best) continue;
    std::size_t j = 0;
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      if (!(mask >> i & 1u)) continue;
      while (j < b.size() && b[j] != a[i]) ++j;
      if (j == b.size()) ok = false;
      else ++j;
    }
    if (ok) best = len;
  }
  return best;
}

Outcome rouge_brute_force() {
  Outcome o;
  std::mt19937_64 gen(2024);
  const std::vector<std::string> vocab{"a", "b", "c", "d", "e"};
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::uniform_int_distribution<int> len(0, 12), pick(0, 4);
    std::vector<std::string> a(len(gen)), b(len(gen));
    for (auto& w : a) w = vocab[pick(gen)];
    for (auto& w : b) w = vocab[pick(gen)];
    const double l = static_cast<double>(brute_lcs(a, b));
    double f = 0.0;
    if (l > 0) {
      const double p = l / a.size(), r = l / b.size();
      f = 2 * p * r / (p + r);
    }
    const double got = rouge_l(text::join(a, " "), text::join(b, " ")).value;
    worst = std::max(worst, std::abs(got - f));
    CHECK(std::abs(got - f) <= 1e-9, "pair " << trial << ": " << got << " vs " << f);
  }
  if (o.pass) o.detail = "1000 pairs, max |diff| " + std::to_string(worst);
  return o;
}

// ---------------------------------------------------------------- 4
Outcome jackknife_identity() {
  Outcome o;
  std::mt19937_64 gen(99);
  std::uniform_int_distribution<int> size(2, 50);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_mean = 0, worst_var = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> x(size(gen));
    for (auto& v : x) v = trial % 3 == 0 ? std::round(u(gen)) : u(gen);
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double ss = 0;
    for (double v : x) ss += (v - mean) * (v - mean);
    const double var = ss / (n - 1) / n;
    const auto r = jackknife_mean(x);
    worst_mean = std::max(worst_mean, std::abs(r.mean - mean));
    worst_var = std::max(worst_var, std::abs(r.jackknife_stderr * r.jackknife_stderr - var));
  }
  CHECK(worst_mean <= 1e-12, "mean off by " << worst_mean);
  CHECK(worst_var <= 1e-12, "variance off by " << worst_var);
  if (o.pass) {
    std::ostringstream ss;
    ss << "1000 samples, max mean diff " << worst_mean << ", max variance diff " << worst_var;
    o.detail = ss.str();
  }
  return o;
}

// ---------------------------------------------------------------- 5
class ChunkTokenizer final : public Tokenizer {
 public:
  // Words keep their leading space and are cut into pieces of <= 3 bytes.
  std::vector<std::string> tokenize(std::string_view s) const override {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
      std::size_t j = i;
      while (j < s.size() && text::is_space(s[j])) ++j;
      std::size_t end = j;
      while (end < s.size() && !text::is_space(s[end])) ++end;
      if (end == j) {
        out.emplace_back(s.substr(i));
        break;
      }
      for (std::size_t p = j; p < end;) {
        const std::size_t q = std::min(end, p + 3);
        out.emplace_back(p == j ? s.substr(i, q - i) : s.substr(p, q - p));
        p = q;
      }
      i = end;
    }
    return out;
  }
};

Outcome corruption_properties() {
  Outcome o;
  const WordSource words = WordSource::load(kData + "/wordlist.txt");
  const SentenceCorpus corpus = SentenceCorpus::load(kData + "/corpus.txt");
  const WhitespaceTokenizer ws;
  const ChunkTokenizer chunks;
  std::mt19937_64 gen(7);
  std::size_t cases = 0;

  // Token counts survive random-word replacement.
  const double rates[] = {1.0, 0.75, 0.5, 0.3, 0.1};
  for (int i = 0; i < 3000; ++i) {
    std::vector<std::string> src(1 + gen() % 20);
    for (auto& w : src) w = words.words()[gen() % words.words().size()];
    const std::string text = text::join(src, " ");
    const Tokenizer& tok = i % 2 ? static_cast<const Tokenizer&>(chunks) : ws;
    Rng rng(gen());
    const double rate = rates[i % 5];
    const std::string out = random_words_text(text, tok, words, rate, rng);
    CHECK(tok.count(out) == tok.count(text), "token count changed: '" << text << "' -> '" << out << "'");
    ++cases;
  }

  // Wrong labels come from label_space minus the original.
  for (int i = 0; i < 3000; ++i) {
    std::vector<std::string> space(2 + gen() % 5);
    for (std::size_t k = 0; k < space.size(); ++k) space[k] = "L" + std::to_string(k);
    const std::string orig = space[gen() % space.size()];
    Rng rng(gen());
    const auto d = wrong_label({"x", orig}, space, rng);
    CHECK(d.label != orig && std::find(space.begin(), space.end(), d.label) != space.end(),
          "wrong label '" << d.label << "' for '" << orig << "'");
    ++cases;
  }

  auto task = std::make_shared<const TaskSpec>(load_task(kData + "/toy_sentiment.json"));
  // Repeated text keeps the inline instruction after the test instance.
  for (int i = 0; i < 2000; ++i) {
    const auto& inst = task->instances[gen() % task->instances.size()];
    const std::string base = i % 2 ? "baseline" : "inline_in_0_demos";
    const auto spec = named_configuration(base, task, inst);
    const auto c = CorruptionSpec::parse("repeated:" + std::to_string(gen() % 5) + (i % 3 ? ":rw" : ""), gen());
    const auto out = assemble(apply(spec, c, words, &corpus, ws));
    const Span& last = out.spans.back();
    const Span& before = out.spans[out.spans.size() - 3];
    CHECK(last.kind == ComponentKind::InlineInstruction && !last.demo_index &&
              before.kind == ComponentKind::TestInstance,
          c.descriptor() << ": test inline instruction missing");
    ++cases;
  }

  // apply is pure and depends only on (spec, corruption).
  const char* descriptors[] = {"rw_instr:task", "rw_instr:inline", "rw_instr:both", "rw_instr:both@0.5",
                               "wrong_label",   "rw_labels",       "ood_inputs",    "repeated:2",
                               "repeated:1:rw", "none"};
  for (int i = 0; i < 3000; ++i) {
    const auto& inst = task->instances[gen() % task->instances.size()];
    const PromptSpec spec = named_configuration("baseline", task, inst);
    const PromptSpec before = spec;
    const auto c = CorruptionSpec::parse(descriptors[i % 10], gen());
    const Tokenizer& tok = i % 2 ? static_cast<const Tokenizer&>(chunks) : ws;
    const auto a = apply(spec, c, words, &corpus, tok);
    const auto b = apply(spec, c, words, &corpus, tok);
    CHECK(spec == before, c.descriptor() << ": input spec modified");
    CHECK(a == b && assemble(a).text == assemble(b).text, c.descriptor() << ": not seed-deterministic");
    ++cases;
  }
  CHECK(cases >= 10000, "only " << cases << " cases");
  if (o.pass) o.detail = std::to_string(cases) + " cases, 0 failures";
  return o;
}

// ---------------------------------------------------------------- 6
AttentionDump random_dump(std::mt19937_64& gen) {
  AttentionDump d;
  d.layers = 3;
  d.heads = 2;
  d.tokens = 16;
  d.dim = 8;
  d.prompt_id = "rand";
  std::normal_distribution<float> normal(0.0f, 1.0f);
  for (std::size_t l = 0; l < d.layers; ++l) {
    std::vector<float> alpha, fvec;
    for (std::size_t h = 0; h < d.heads; ++h) {
      std::vector<double> e(d.tokens);
      double z = 0;
      for (auto& v : e) z += v = std::exp(2.0 * normal(gen));
      for (double v : e) alpha.push_back(static_cast<float>(v / z));
    }
    for (std::size_t i = 0; i < d.heads * d.tokens * d.dim; ++i) fvec.push_back(normal(gen));
    d.alpha.insert(d.alpha.end(), alpha.begin(), alpha.end());
    d.fvec.insert(d.fvec.end(), fvec.begin(), fvec.end());
  }
  return d;
}

// Direct transcription over the flat buffers.
std::vector<double> naive_norms(const AttentionDump& d) {
  std::vector<double> out(d.tokens, 0.0);
  for (std::size_t j = 0; j < d.tokens; ++j) {
    for (std::size_t l = 0; l < d.layers; ++l) {
      double sq = 0;
      for (std::size_t k = 0; k < d.dim; ++k) {
        double s = 0;
        for (std::size_t h = 0; h < d.heads; ++h) {
          const double a = d.alpha[l * d.heads * d.tokens + h * d.tokens + j];
          const double f = d.fvec[((l * d.heads + h) * d.tokens + j) * d.dim + k];
          s += a * f;
        }
        sq += s * s;
      }
      out[j] += std::sqrt(sq) / static_cast<double>(d.layers);
    }
  }
  return out;
}

TokenSpanMap random_spans(std::mt19937_64& gen, std::size_t tokens) {
  const ComponentKind kinds[] = {ComponentKind::TaskInstruction, ComponentKind::DemonstrationInput,
                                 ComponentKind::InlineInstruction, ComponentKind::Label,
                                 ComponentKind::Separator, ComponentKind::TestInstance};
  TokenSpanMap m;
  m.prompt_id = "rand";
  std::size_t start = 0;
  while (start < tokens) {
    const std::size_t len = std::min<std::size_t>(tokens - start, 1 + gen() % 4);
    const ComponentKind k = kinds[gen() % 6];
    std::optional<std::size_t> demo;
    if (k == ComponentKind::DemonstrationInput || k == ComponentKind::Label) demo = gen() % 4;
    m.spans.push_back({k, demo, start, start + len});
    start += len;
  }
  return m;
}

Outcome attribution_oracle() {
  Outcome o;
  std::mt19937_64 gen(31);
  double worst = 0, worst_pct_sum = 0, worst_homog = 0;
  const float scales[] = {0.25f, 0.5f, 2.0f, 4.0f, 8.0f};
  for (int trial = 0; trial < 200; ++trial) {
    const AttentionDump d = parse_dump(serialize_dump(random_dump(gen)));
    const auto got = per_token_norms(d);
    const auto want = naive_norms(d);
    for (std::size_t j = 0; j < got.size(); ++j) worst = std::max(worst, std::abs(got[j] - want[j]));

    const TokenSpanMap spans = random_spans(gen, d.tokens);
    const auto r = component_scores(got, spans);
    for (const auto* m : {&r.components, &r.detailed}) {
      double sum = 0;
      for (const auto& [k, v] : *m) sum += v.percent;
      worst_pct_sum = std::max(worst_pct_sum, std::abs(sum - 100.0));
    }

    AttentionDump scaled = d;
    const float c = scales[trial % 5];
    for (auto& v : scaled.fvec) v *= c;
    const auto rs = component_scores(per_token_norms(scaled), spans);
    for (const auto& [k, v] : r.components) {
      const auto& w = rs.components.at(k);
      worst_homog = std::max(worst_homog, std::abs(w.raw - c * v.raw) / std::max(1.0, c * v.raw));
      worst_homog = std::max(worst_homog, std::abs(w.percent - v.percent));
    }
  }
  CHECK(worst <= 1e-6, "norms differ from naive recomputation by " << worst);
  CHECK(worst_pct_sum <= 1e-6, "percentages sum off by " << worst_pct_sum);
  CHECK(worst_homog <= 1e-9, "homogeneity off by " << worst_homog);

  AttentionDump two;
  two.layers = 1;
  two.heads = 2;
  two.tokens = 2;
  two.dim = 2;
  two.alpha = {0.5f, 0.5f, 0.5f, 0.5f};
  two.fvec = {1, 0, 0, 0, 0, 1, 0, 0};
  const double v = token_contribution(two, 0, 0);
  CHECK(std::abs(v - std::sqrt(0.5)) <= 1e-12, "two-head example gives " << v);
  if (o.pass) {
    std::ostringstream ss;
    ss << "200 dumps, max norm diff " << worst << ", max pct-sum diff " << worst_pct_sum
       << ", max homogeneity diff " << worst_homog << ", two-head " << v;
    o.detail = ss.str();
  }
  return o;
}

// ---------------------------------------------------------------- 7
Outcome stub_grid() {
  Outcome o;
  const auto t0 = Clock::now();
  const fs::path dir = fs::temp_directory_path() / ("pa_accept_" + std::to_string(std::random_device{}()));
  fs::create_directories(dir);
  nlohmann::json j = {
      {"backends",
       {{{"id", "stub-a"}, {"kind", "stub"}, {"max_in_flight", 8},
         {"stub", {{"mode", "hash"}, {"hint", "Positive\nNegative\nthe dog\nblue"}, {"delay_ms", 1}}}},
        {{"id", "stub-b"}, {"kind", "stub"}, {"max_in_flight", 8},
         {"stub", {{"mode", "hash"}, {"hint", "Negative. no\nPositive\nseven"}}}}}},
      {"tasks", {kData + "/toy_sentiment.json", kData + "/toy_qa.json"}},
      {"configurations",
       {"test_instance", "plus_demos", "plus_task_instr_demos", "plus_inline_instr_demos", "baseline",
        "rw_both_instr", "rw_labels", "ood_inputs", "inline_in_3_demos", "inline_in_2_demos",
        "inline_in_1_demos", "inline_in_0_demos", "rw_inline_in_3_demos", "rw_inline_in_2_demos",
        "rw_inline_in_1_demos", "rw_inline_in_0_demos"}},
      {"n_instances", 8},
      {"master_seed", 11},
      {"wordlist", kData + "/wordlist.txt"},
      {"corpus", kData + "/corpus.txt"},
      {"output_dir", dir.string()},
  };
  const auto cfg = ExperimentConfig::from_json(j);
  RunOptions one, eight;
  one.results_path = (dir / "w1.jsonl").string();
  eight.results_path = (dir / "w8.jsonl").string();
  eight.workers = 8;
  const auto s1 = run(cfg, one);
  const auto s8 = run(cfg, eight);
  const std::string a = text::read_file(*one.results_path), b = text::read_file(*eight.results_path);
  CHECK(a == b, "results differ between 1 and 8 workers");
  CHECK(s1.cells == 2 * 2 * 16 && s1.records == 2 * 2 * 16 * 8, "unexpected grid size " << s1.records);
  CHECK(s1.errored_records == 0 && s8.errored_records == 0, "errored records present");

  const Report rep = report(read_results(*one.results_path));
  const std::string& t = rep.macro_table;
  CHECK(t.rfind("| Configuration | stub-a | stub-a s.e. | stub-b | stub-b s.e. |", 0) == 0, "bad header");
  std::size_t pos = 0;
  for (const char* label : {"**Structural**", "| Test instance |", "| + demos. |", "| + task instr. + demos. |",
                            "| + inline instr. + demos. |", "| Baseline |", "**Semantic**", "| Rw both instr. |",
                            "| Rw labels |", "| OOD inputs |", "**Repeated text**", "| Inline instr. in 3 demos. |",
                            "| Inline instr. in 0 demos. |", "| Rw inline instr. in 3 demos. |",
                            "| Rw inline instr. in 0 demos. |"}) {
    const auto at = t.find(label, pos);
    CHECK(at != std::string::npos, "row '" << label << "' missing or out of order");
    if (at != std::string::npos) pos = at;
  }
  std::size_t rows = 0;
  for (const auto& r : rep.rows) rows += r.backend == "stub-a";
  CHECK(rows == 16, rows << " rows per backend");
  const double secs = seconds_since(t0);
  CHECK(secs < 30.0, "took " << secs << " s");
  fs::remove_all(dir);
  if (o.pass) {
    std::ostringstream ss;
    ss << s1.records << " records, 1 vs 8 workers identical, " << rows << " rows x 2 backends, " << secs << " s";
    o.detail = ss.str();
  }
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"1 golden prompts and span partition", golden_prompts},
      {"2 baseline macro-average renders 40.7", baseline_macro},
      {"3 Rouge-L equals brute-force LCS", rouge_brute_force},
      {"4 jackknife mean and variance identities", jackknife_identity},
      {"5 corruption property suite", corruption_properties},
      {"6 attribution oracle", attribution_oracle},
      {"7 stub grid determinism and report shape", stub_grid},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << name << "] " << o.detail << "\n";
  }
  return failed == 0 ? 0 : 1;
}
