#include "promptablate/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "promptablate/datasets.hpp"
#include "promptablate/error.hpp"
#include "promptablate/rng.hpp"
#include "promptablate/text.hpp"

namespace promptablate {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Configuration

void ExperimentConfig::validate() const {
  if (backends.empty()) throw ConfigurationError("experiment: no backends");
  if (tasks.empty()) throw ConfigurationError("experiment: no tasks");
  if (configurations.empty()) throw ConfigurationError("experiment: no configurations");
  std::set<std::string> ids;
  for (const auto& b : backends) {
    b.validate();
    if (!ids.insert(b.id).second) throw ConfigurationError("experiment: duplicate backend id '" + b.id + "'");
  }
  for (const auto& c : configurations) resolve_row(c);
  if (max_new_tokens < 1) throw ConfigurationError("experiment: max_new_tokens must be >= 1");
}

namespace {

std::string resolve_path(const std::string& p, const std::string& base) {
  if (p.empty() || base.empty() || fs::path(p).is_absolute()) return p;
  return (fs::path(base) / p).lexically_normal().string();
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j, const std::string& base_dir) {
  ExperimentConfig c;
  try {
    for (const auto& b : j.at("backends")) c.backends.push_back(descriptor_from_json(b));
    for (const auto& t : j.at("tasks")) c.tasks.push_back(resolve_path(t.get<std::string>(), base_dir));
    c.configurations = j.at("configurations").get<std::vector<std::string>>();
    c.master_seed = j.value("master_seed", std::uint64_t{0});
    if (auto it = j.find("corruptions"); it != j.end()) {
      for (const auto& d : *it) c.corruptions.push_back(CorruptionSpec::parse(d.get<std::string>()));
    }
    c.shots = j.value("shots", std::size_t{4});
    c.n_instances = j.value("n_instances", std::size_t{100});
    c.balanced = j.value("balanced", true);
    c.max_new_tokens = j.value("max_new_tokens", std::size_t{10});
    c.wordlist = resolve_path(j.value("wordlist", std::string()), base_dir);
    if (auto it = j.find("corpus"); it != j.end() && !it->is_null()) {
      c.corpus = resolve_path(it->get<std::string>(), base_dir);
    }
    c.output_dir = resolve_path(j.value("output_dir", std::string(".")), base_dir);
  } catch (const json::exception& e) {
    throw ConfigurationError(std::string("experiment config: ") + e.what());
  }
  if (c.corruptions.empty()) c.corruptions.push_back(CorruptionSpec{});
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  json j;
  try {
    j = json::parse(text::read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigurationError(path + ": malformed JSON: " + e.what());
  }
  return from_json(j, fs::path(path).parent_path().string());
}

// ---------------------------------------------------------------------------
// Row vocabulary

namespace {

struct RowInfo {
  std::string name;
  std::string display;
  int section;  // 0 structural, 1 semantic, 2 repeated text
};

std::vector<RowInfo> build_rows() {
  std::vector<RowInfo> rows = {
      {"test_instance", "Test instance", 0},
      {"plus_task_instr", "+ task instr.", 0},
      {"plus_inline_instr", "+ inline instr.", 0},
      {"plus_both_instr", "+ both instr.", 0},
      {"plus_demos", "+ demos.", 0},
      {"plus_task_instr_demos", "+ task instr. + demos.", 0},
      {"plus_inline_instr_demos", "+ inline instr. + demos.", 0},
      {"baseline", "Baseline", 0},
      {"baseline_minus_labels", "Baseline - labels", 0},
      {"baseline_minus_inputs", "Baseline - inputs", 0},
      {"rw_both_instr", "Rw both instr.", 1},
      {"rw_task_instr", "Rw task instr.", 1},
      {"rw_inline_instr", "Rw inline instr.", 1},
      {"rw_labels", "Rw labels", 1},
      {"wrong_labels", "Wrong labels", 1},
      {"ood_inputs", "OOD inputs", 1},
  };
  for (int k = 4; k >= 0; --k) {
    rows.push_back({"inline_in_" + std::to_string(k) + "_demos",
                    "Inline instr. in " + std::to_string(k) + " demos.", 2});
  }
  for (int k = 4; k >= 0; --k) {
    rows.push_back({"rw_inline_in_" + std::to_string(k) + "_demos",
                    "Rw inline instr. in " + std::to_string(k) + " demos.", 2});
  }
  return rows;
}

const std::vector<RowInfo>& row_table() {
  static const std::vector<RowInfo> rows = build_rows();
  return rows;
}

const RowInfo* find_row(std::string_view name) {
  for (const auto& r : row_table()) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

}  // namespace

const std::vector<std::string>& row_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& r : row_table()) v.push_back(r.name);
    return v;
  }();
  return names;
}

std::string row_display_name(std::string_view name) {
  if (const auto* r = find_row(name)) return r->display;
  return std::string(name);
}

RowPlan resolve_row(std::string_view name) {
  const auto& prompt_names = configuration_names();
  if (std::find(prompt_names.begin(), prompt_names.end(), name) != prompt_names.end()) {
    return {std::string(name), std::nullopt};
  }
  static const std::map<std::string, std::string, std::less<>> semantic = {
      {"rw_both_instr", "rw_instr:both"}, {"rw_task_instr", "rw_instr:task"},
      {"rw_inline_instr", "rw_instr:inline"}, {"rw_labels", "rw_labels"},
      {"wrong_labels", "wrong_label"},     {"ood_inputs", "ood_inputs"},
  };
  if (auto it = semantic.find(name); it != semantic.end()) {
    return {"baseline", CorruptionSpec::parse(it->second)};
  }
  constexpr std::string_view prefix = "rw_inline_in_";
  constexpr std::string_view suffix = "_demos";
  if (name.starts_with(prefix) && name.ends_with(suffix) &&
      name.size() == prefix.size() + 1 + suffix.size()) {
    const char k = name[prefix.size()];
    if (k >= '0' && k <= '4') {
      return {"baseline", CorruptionSpec::parse(std::string("repeated:") + k + ":rw")};
    }
  }
  throw ConfigurationError("unknown configuration '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Records

ordered_json ResultRecord::to_json() const {
  ordered_json j;
  j["backend"] = backend;
  j["task"] = task;
  j["configuration"] = configuration;
  j["corruption"] = corruption;
  j["instance"] = instance;
  j["prompt_hash"] = prompt_hash;
  j["raw_response"] = raw_response;
  j["processed_response"] = processed_response;
  j["metric"] = std::string(to_string(metric));
  j["score"] = score ? ordered_json(*score) : ordered_json(nullptr);
  j["error"] = error ? ordered_json(*error) : ordered_json(nullptr);
  return j;
}

ResultRecord ResultRecord::from_json(const json& j) {
  ResultRecord r;
  try {
    r.backend = j.at("backend").get<std::string>();
    r.task = j.at("task").get<std::string>();
    r.configuration = j.at("configuration").get<std::string>();
    r.corruption = j.at("corruption").get<std::string>();
    r.instance = j.at("instance").get<std::size_t>();
    r.prompt_hash = j.value("prompt_hash", std::string());
    r.raw_response = j.value("raw_response", std::string());
    r.processed_response = j.value("processed_response", std::string());
    r.metric = parse_metric(j.at("metric").get<std::string>());
    if (const auto& s = j.at("score"); !s.is_null()) r.score = s.get<double>();
    if (const auto& e = j.at("error"); !e.is_null()) r.error = e.get<std::string>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("result record: ") + e.what());
  }
  if (r.score.has_value() == r.error.has_value()) {
    throw ValidationError("result record: exactly one of score and error must be set");
  }
  return r;
}

std::vector<ResultRecord> read_results(const std::string& path) {
  std::vector<ResultRecord> out;
  std::size_t line_no = 0;
  for (const auto& line : text::read_lines(path)) {
    ++line_no;
    if (text::is_blank(line)) continue;
    try {
      out.push_back(ResultRecord::from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw ValidationError(path + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_results(const std::vector<ResultRecord>& records, const std::string& path) {
  std::string out;
  for (const auto& r : records) out += r.to_json().dump() + "\n";
  text::write_file(path, out);
}

Score score_response(const TaskSpec& task, const TestInstance& instance, std::string_view raw,
                     std::string* processed) {
  const std::string p = postprocess(raw);
  if (processed) *processed = p;
  return task.is_classification() ? exact_match(p, instance.references)
                                  : rouge_l(p, instance.references);
}

std::vector<ResultRecord> rescore(const std::vector<ResultRecord>& records,
                                  const std::map<std::string, TaskSpec>& tasks_by_id) {
  std::vector<ResultRecord> out = records;
  for (auto& r : out) {
    if (r.error) continue;
    auto it = tasks_by_id.find(r.task);
    if (it == tasks_by_id.end()) throw ValidationError("rescore: unknown task '" + r.task + "'");
    if (r.instance >= it->second.instances.size()) {
      throw ValidationError("rescore: task '" + r.task + "' has no instance " + std::to_string(r.instance));
    }
    const Score s = score_response(it->second, it->second.instances[r.instance], r.raw_response,
                                   &r.processed_response);
    r.metric = s.metric;
    r.score = s.value;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Running

namespace {

struct Cell {
  std::size_t backend = 0;
  std::size_t task = 0;
  std::string configuration;
  RowPlan plan;
  CorruptionSpec extra;
  std::string extra_descriptor;
  std::vector<std::size_t> instances;

  std::vector<std::optional<ResultRecord>> slots;
  std::size_t remaining = 0;
  bool resumed = false;

  auto key(const std::vector<std::unique_ptr<Backend>>& backends,
           const std::vector<std::shared_ptr<const TaskSpec>>& tasks) const {
    return std::make_tuple(backends[backend]->descriptor().id, tasks[task]->id, configuration,
                           extra_descriptor);
  }
};

bool needs_words(const CorruptionSpec& c) {
  if (std::holds_alternative<RandomWordsInstructions>(c.kind) ||
      std::holds_alternative<RandomWordsLabel>(c.kind)) {
    return true;
  }
  if (const auto* rt = std::get_if<RepeatedText>(&c.kind)) return rt->random_words;
  return false;
}

}  // namespace

RunSummary run(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  RunSummary summary;

  std::vector<std::shared_ptr<const TaskSpec>> tasks;
  std::set<std::string> task_ids;
  for (const auto& path : config.tasks) {
    auto t = std::make_shared<const TaskSpec>(load_task(path));
    if (!task_ids.insert(t->id).second) throw ConfigurationError("duplicate task id '" + t->id + "'");
    tasks.push_back(std::move(t));
  }
  std::vector<std::unique_ptr<Backend>> backends;
  for (const auto& d : config.backends) backends.push_back(make_backend(d));

  bool want_words = false, want_corpus = false;
  for (const auto& name : config.configurations) {
    const RowPlan plan = resolve_row(name);
    if (plan.corruption) {
      want_words |= needs_words(*plan.corruption);
      want_corpus |= std::holds_alternative<OODInputs>(plan.corruption->kind);
    }
  }
  for (const auto& c : config.corruptions) {
    want_words |= needs_words(c);
    want_corpus |= std::holds_alternative<OODInputs>(c.kind);
  }
  std::optional<WordSource> words;
  std::optional<SentenceCorpus> corpus;
  if (!config.wordlist.empty()) words = WordSource::load(config.wordlist);
  if (config.corpus) corpus = SentenceCorpus::load(*config.corpus);
  if (want_words && !words) throw ConfigurationError("random-word corruptions need a wordlist");
  if (want_corpus && !corpus) throw ConfigurationError("OOD-input corruptions need a corpus");
  const WordSource empty_words({"unused"});

  // Instance selection is per task and shared by every cell of that task.
  std::vector<std::vector<std::size_t>> instance_sets;
  for (const auto& t : tasks) {
    instance_sets.push_back(sample_instance_indices(
        *t, config.n_instances, derive_seed(config.master_seed, {t->id, "instances"}),
        config.balanced && t->is_classification()));
  }

  std::vector<Cell> cells;
  for (std::size_t b = 0; b < backends.size(); ++b) {
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      for (const auto& name : config.configurations) {
        for (const auto& extra : config.corruptions) {
          Cell cell;
          cell.backend = b;
          cell.task = t;
          cell.configuration = name;
          cell.plan = resolve_row(name);
          cell.extra = extra;
          cell.extra_descriptor = extra.descriptor();
          try {
            if (cell.plan.corruption) check_applicable(*tasks[t], *cell.plan.corruption);
            check_applicable(*tasks[t], extra);
          } catch (const Error& e) {
            if (b == 0) std::cerr << "[promptablate] skipping " << name << " / " << cell.extra_descriptor
                      << " on task '" << tasks[t]->id << "': " << e.what() << "\n";
            continue;
          }
          cell.instances = instance_sets[t];
          cell.slots.resize(cell.instances.size());
          cell.remaining = cell.instances.size();
          cells.push_back(std::move(cell));
        }
      }
    }
  }
  std::sort(cells.begin(), cells.end(), [&](const Cell& a, const Cell& b) {
    return a.key(backends, tasks) < b.key(backends, tasks);
  });
  summary.cells = cells.size();

  fs::create_directories(config.output_dir);
  summary.results_path =
      options.results_path ? *options.results_path : (fs::path(config.output_dir) / "results.jsonl").string();

  if (options.resume && fs::exists(summary.results_path)) {
    std::map<std::tuple<std::string, std::string, std::string, std::string>, std::vector<ResultRecord>> prior;
    for (auto& r : read_results(summary.results_path)) {
      prior[{r.backend, r.task, r.configuration, r.corruption}].push_back(std::move(r));
    }
    for (auto& cell : cells) {
      auto it = prior.find(cell.key(backends, tasks));
      if (it == prior.end() || it->second.size() != cell.instances.size()) continue;
      bool complete = true;
      for (std::size_t p = 0; p < cell.instances.size() && complete; ++p) {
        complete = it->second[p].instance == cell.instances[p] && !it->second[p].error;
      }
      if (!complete) continue;
      for (std::size_t p = 0; p < cell.instances.size(); ++p) cell.slots[p] = it->second[p];
      cell.remaining = 0;
      cell.resumed = true;
      ++summary.resumed_cells;
    }
  }

  std::ofstream out(summary.results_path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + summary.results_path);

  std::mutex writer_mu;
  std::size_t next_flush = 0;
  // Emits every finished cell at the head of the sorted order.
  const auto flush_ready = [&] {
    while (next_flush < cells.size() && cells[next_flush].remaining == 0) {
      for (const auto& rec : cells[next_flush].slots) out << rec->to_json().dump() << "\n";
      out.flush();
      ++next_flush;
    }
  };
  flush_ready();

  struct Item {
    std::size_t cell;
    std::size_t pos;
  };
  std::vector<Item> items;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    if (cells[c].resumed) continue;
    for (std::size_t p = 0; p < cells[c].instances.size(); ++p) items.push_back({c, p});
  }

  const WhitespaceTokenizer whitespace;
  const auto evaluate = [&](const Cell& cell, std::size_t pos) {
    const TaskSpec& task = *tasks[cell.task];
    Backend& backend = *backends[cell.backend];
    const std::size_t idx = cell.instances[pos];
    const TestInstance& inst = task.instances[idx];

    ResultRecord rec;
    rec.backend = backend.descriptor().id;
    rec.task = task.id;
    rec.configuration = cell.configuration;
    rec.corruption = cell.extra_descriptor;
    rec.instance = idx;
    rec.metric = task.is_classification() ? Metric::ExactMatch : Metric::RougeL;
    try {
      std::optional<BackendTokenizer> backend_tok;
      if (backend.descriptor().can_tokenize) backend_tok.emplace(backend);
      const Tokenizer& tok = backend_tok ? static_cast<const Tokenizer&>(*backend_tok) : whitespace;
      const WordSource& ws = words ? *words : empty_words;
      const SentenceCorpus* cp = corpus ? &*corpus : nullptr;

      PromptSpec spec = named_configuration(cell.plan.prompt_configuration, tasks[cell.task], inst, config.shots);
      const auto corrupt = [&](CorruptionSpec c) {
        if (std::holds_alternative<NoCorruption>(c.kind)) return;
        // Substream per (instance, corruption family): independent of
        // execution order and shared across rows of the same instance.
        c.seed = derive_seed(config.master_seed, {task.id, std::to_string(idx), c.family()});
        spec = apply(spec, c, ws, cp, tok);
      };
      if (cell.plan.corruption) corrupt(*cell.plan.corruption);
      corrupt(cell.extra);

      const AssembledPrompt prompt = assemble(spec);
      rec.prompt_hash = prompt_hash(prompt.text);
      CompletionRequest req;
      req.prompt = prompt.text;
      req.max_new_tokens = config.max_new_tokens;
      rec.raw_response = backend.complete(req).text;
      const Score s = score_response(task, inst, rec.raw_response, &rec.processed_response);
      rec.score = s.value;
    } catch (const Error& e) {
      rec.error = std::string(to_string(e.kind())) + ": " + e.what();
    } catch (const std::exception& e) {
      rec.error = std::string("internal: ") + e.what();
    }
    return rec;
  };

  std::atomic<std::size_t> next_item{0};
  const auto worker = [&] {
    for (std::size_t i = next_item++; i < items.size(); i = next_item++) {
      ResultRecord rec = evaluate(cells[items[i].cell], items[i].pos);
      std::lock_guard lock(writer_mu);
      Cell& cell = cells[items[i].cell];
      cell.slots[items[i].pos] = std::move(rec);
      --cell.remaining;
      flush_ready();
    }
  };
  {
    const std::size_t n = std::max<std::size_t>(1, std::min(options.workers, std::max<std::size_t>(1, items.size())));
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n; ++w) pool.emplace_back(worker);
  }
  flush_ready();

  for (const auto& cell : cells) {
    std::size_t errored = 0;
    for (const auto& rec : cell.slots) {
      ++summary.records;
      if (rec->error) ++errored;
    }
    summary.errored_records += errored;
    if (!cell.slots.empty() && errored == cell.slots.size()) ++summary.fully_errored_cells;
  }
  return summary;
}

// ---------------------------------------------------------------------------
// Reporting

std::string format_score(double value) {
  // Halves round away from zero (18.75 -> 18.8), unlike printf.
  const double tenths = std::round(value * 1000.0);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", tenths / 10.0 + 0.0);
  return buf;
}

namespace {

constexpr const char* kMissing = "n/a";

std::size_t row_rank(const std::string& name) {
  const auto& rows = row_table();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].name == name) return i;
  }
  return rows.size();
}

int row_section(const std::string& name) {
  const auto* r = find_row(name);
  return r ? r->section : 3;
}

std::string row_label(const ReportRow& row) {
  std::string label = row_display_name(row.configuration);
  if (row.corruption != "none") label += " [" + row.corruption + "]";
  return label;
}

std::string cell_text(const CellStat& c, bool with_error, bool& footnote_missing, bool& footnote_partial) {
  if (!c.mean) {
    footnote_missing = true;
    return kMissing;
  }
  std::string s = format_score(*c.mean);
  if (with_error && c.std_error) s += " ±" + format_score(*c.std_error);
  if (c.errored > 0) {
    s += "*";
    footnote_partial = true;
  }
  return s;
}

void footnotes(std::ostringstream& os, bool missing, bool partial) {
  if (missing) os << "\n" << kMissing << ": no successful records for this cell (all errored or absent).\n";
  if (partial) os << (missing ? "" : "\n") << "*: some records of this cell errored; mean over the rest.\n";
}

}  // namespace

Report report(const std::vector<ResultRecord>& records) {
  if (records.empty()) throw InsufficientDataError("report: no result records");
  Report rep;

  std::set<std::string> task_set;
  using RowKey = std::tuple<std::string, std::string, std::string>;
  std::map<RowKey, std::map<std::string, std::vector<const ResultRecord*>>> grouped;
  for (const auto& r : records) {
    if (std::find(rep.backends.begin(), rep.backends.end(), r.backend) == rep.backends.end()) {
      rep.backends.push_back(r.backend);
    }
    task_set.insert(r.task);
    grouped[{r.backend, r.configuration, r.corruption}][r.task].push_back(&r);
  }
  rep.tasks.assign(task_set.begin(), task_set.end());

  for (const auto& [key, by_task] : grouped) {
    ReportRow row;
    std::tie(row.backend, row.configuration, row.corruption) = key;
    for (const auto& [task, recs] : by_task) {
      CellStat c;
      std::vector<double> scores;
      for (const auto* r : recs) {
        if (r->score) scores.push_back(*r->score);
        else ++c.errored;
      }
      c.scored = scores.size();
      if (scores.size() >= 2) {
        const auto agg = jackknife_mean(scores);
        c.mean = agg.mean;
        c.std_error = agg.jackknife_stderr;
      } else if (scores.size() == 1) {
        c.mean = scores.front();
      }
      row.per_task[task] = c;
    }
    std::vector<double> means;
    double se_sq = 0.0;
    bool all_se = true;
    for (const auto& t : rep.tasks) {
      auto it = row.per_task.find(t);
      if (it == row.per_task.end() || !it->second.mean) {
        means.clear();
        break;
      }
      means.push_back(*it->second.mean);
      if (it->second.std_error) se_sq += *it->second.std_error * *it->second.std_error;
      else all_se = false;
    }
    if (!means.empty()) {
      row.macro_mean = macro_average(means);
      // Datasets are independent samples, so the errors add in quadrature.
      if (all_se) row.macro_stderr = std::sqrt(se_sq) / static_cast<double>(means.size());
    }
    rep.rows.push_back(std::move(row));
  }

  const auto backend_rank = [&](const std::string& b) {
    return std::find(rep.backends.begin(), rep.backends.end(), b) - rep.backends.begin();
  };
  std::stable_sort(rep.rows.begin(), rep.rows.end(), [&](const ReportRow& a, const ReportRow& b) {
    const auto ka = std::make_tuple(row_rank(a.configuration), a.configuration, a.corruption != "none",
                                    a.corruption, backend_rank(a.backend));
    const auto kb = std::make_tuple(row_rank(b.configuration), b.configuration, b.corruption != "none",
                                    b.corruption, backend_rank(b.backend));
    return ka < kb;
  });

  // Distinct (configuration, corruption) in row order.
  std::vector<std::pair<std::string, std::string>> row_keys;
  for (const auto& r : rep.rows) {
    std::pair<std::string, std::string> k{r.configuration, r.corruption};
    if (std::find(row_keys.begin(), row_keys.end(), k) == row_keys.end()) row_keys.push_back(k);
  }
  const auto find_row_of = [&](const std::string& backend, const std::pair<std::string, std::string>& k)
      -> const ReportRow* {
    for (const auto& r : rep.rows) {
      if (r.backend == backend && r.configuration == k.first && r.corruption == k.second) return &r;
    }
    return nullptr;
  };
  static const char* kSections[] = {"Structural", "Semantic", "Repeated text", "Other"};

  {
    std::ostringstream os;
    bool missing = false, partial = false;
    for (const auto& b : rep.backends) {
      os << "### " << b << "\n\n| Configuration |";
      for (const auto& t : rep.tasks) os << " " << t << " |";
      os << "\n|---|";
      for (std::size_t i = 0; i < rep.tasks.size(); ++i) os << "---:|";
      os << "\n";
      for (const auto& k : row_keys) {
        const ReportRow* r = find_row_of(b, k);
        if (!r) continue;
        os << "| " << row_label(*r) << " |";
        for (const auto& t : rep.tasks) {
          auto it = r->per_task.find(t);
          os << " " << (it == r->per_task.end() ? (missing = true, std::string(kMissing))
                                                  : cell_text(it->second, true, missing, partial))
             << " |";
        }
        os << "\n";
      }
      os << "\n";
    }
    footnotes(os, missing, partial);
    rep.per_dataset_table = os.str();
  }

  {
    std::ostringstream os;
    bool missing = false, partial = false;
    os << "| Configuration |";
    for (const auto& b : rep.backends) os << " " << b << " | " << b << " s.e. |";
    os << "\n|---|";
    for (std::size_t i = 0; i < rep.backends.size(); ++i) os << "---:|---:|";
    os << "\n";
    int section = -1;
    for (const auto& k : row_keys) {
      const int s = row_section(k.first);
      if (s != section) {
        section = s;
        os << "| **" << kSections[s] << "** |";
        for (std::size_t i = 0; i < rep.backends.size(); ++i) os << " | |";
        os << "\n";
      }
      ReportRow label_row;
      label_row.configuration = k.first;
      label_row.corruption = k.second;
      os << "| " << row_label(label_row) << " |";
      for (const auto& b : rep.backends) {
        const ReportRow* r = find_row_of(b, k);
        if (!r || !r->macro_mean) {
          missing = true;
          os << " " << kMissing << " | |";
          continue;
        }
        bool row_partial = false;
        for (const auto& [t, c] : r->per_task) row_partial |= c.errored > 0;
        partial |= row_partial;
        os << " " << format_score(*r->macro_mean) << (row_partial ? "*" : "") << " | "
           << (r->macro_stderr ? format_score(*r->macro_stderr) : "") << " |";
      }
      os << "\n";
    }
    footnotes(os, missing, partial);
    rep.macro_table = os.str();
  }

  {
    std::ostringstream os;
    os << "backend,configuration,corruption,label,task,mean,stderr,n\n";
    const auto num = [](const std::optional<double>& v) {
      if (!v) return std::string();
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.6f", *v * 100.0);
      return std::string(buf);
    };
    const auto quote = [](const std::string& s) {
      std::string q = "\"";
      for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
      return q + "\"";
    };
    for (const auto& r : rep.rows) {
      const std::string prefix = r.backend + "," + r.configuration + "," + quote(r.corruption) + "," +
                                 quote(row_label(r)) + ",";
      std::size_t n = 0;
      for (const auto& [t, c] : r.per_task) {
        os << prefix << t << "," << num(c.mean) << "," << num(c.std_error) << "," << c.scored << "\n";
        n += c.scored;
      }
      os << prefix << "macro," << num(r.macro_mean) << "," << num(r.macro_stderr) << "," << n << "\n";
    }
    rep.plot_data = os.str();
  }
  return rep;
}

}  // namespace promptablate
