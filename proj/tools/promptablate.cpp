// Command-line front end: assemble, corrupt, run, score, attribute, report.

#include <filesystem>
#include <iostream>
#include <map>
#include <set>

#include "CLI11.hpp"
#include "json.hpp"
#include "promptablate/attribution.hpp"
#include "promptablate/corruption.hpp"
#include "promptablate/datasets.hpp"
#include "promptablate/error.hpp"
#include "promptablate/experiment.hpp"
#include "promptablate/rng.hpp"
#include "promptablate/text.hpp"

namespace fs = std::filesystem;
using namespace promptablate;
using nlohmann::ordered_json;

namespace {

struct PromptArgs {
  std::string task;
  std::string configuration = "baseline";
  std::size_t shots = 4;
  std::optional<std::size_t> instance;
  std::optional<std::string> input;
  std::string corruption = "none";
  std::uint64_t seed = 0;
  std::string words;
  std::string corpus;
  bool json = false;
};

void add_prompt_options(CLI::App* cmd, PromptArgs& a, bool corruption_required) {
  cmd->add_option("--task", a.task, "Task JSON file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--configuration", a.configuration, "Prompt configuration name");
  cmd->add_option("--shots", a.shots, "Number of demonstrations");
  auto* inst = cmd->add_option("--instance", a.instance, "Index of a test instance in the task file");
  cmd->add_option("--input", a.input, "Literal test instance text")->excludes(inst);
  auto* c = cmd->add_option("--corruption", a.corruption, "Corruption descriptor, e.g. rw_instr:both");
  if (corruption_required) c->required();
  cmd->add_option("--seed", a.seed, "Corruption seed");
  cmd->add_option("--words", a.words, "Wordlist for random-word corruptions");
  cmd->add_option("--corpus", a.corpus, "Sentence corpus for OOD inputs");
  cmd->add_flag("--json", a.json, "Print text and character spans as JSON");
}

int do_prompt(const PromptArgs& a) {
  auto task = std::make_shared<const TaskSpec>(load_task(a.task));
  TestInstance inst;
  if (a.instance) {
    if (*a.instance >= task->instances.size()) {
      throw ConfigurationError("task '" + task->id + "' has " + std::to_string(task->instances.size()) +
                               " instances; --instance " + std::to_string(*a.instance) + " is out of range");
    }
    inst = task->instances[*a.instance];
  } else if (a.input) {
    inst.input = *a.input;
  } else {
    throw ConfigurationError("one of --instance or --input is required");
  }

  const RowPlan plan = resolve_row(a.configuration);
  PromptSpec spec = named_configuration(plan.prompt_configuration, task, inst, a.shots);
  std::vector<CorruptionSpec> chain;
  if (plan.corruption) chain.push_back(*plan.corruption);
  chain.push_back(CorruptionSpec::parse(a.corruption, a.seed));
  std::optional<WordSource> words;
  std::optional<SentenceCorpus> corpus;
  if (!a.words.empty()) words = WordSource::load(a.words);
  if (!a.corpus.empty()) corpus = SentenceCorpus::load(a.corpus);
  const WordSource fallback({"unused"});
  const WhitespaceTokenizer tok;
  for (auto c : chain) {
    if (std::holds_alternative<NoCorruption>(c.kind)) continue;
    c.seed = a.seed;
    check_applicable(*task, c);
    const bool wants_words = std::holds_alternative<RandomWordsInstructions>(c.kind) ||
                             std::holds_alternative<RandomWordsLabel>(c.kind) ||
                             (std::holds_alternative<RepeatedText>(c.kind) &&
                              std::get<RepeatedText>(c.kind).random_words);
    if (wants_words && !words) throw ConfigurationError("--words is required for " + c.descriptor());
    if (std::holds_alternative<OODInputs>(c.kind) && !corpus) {
      throw ConfigurationError("--corpus is required for ood_inputs");
    }
    spec = apply(spec, c, words ? *words : fallback, corpus ? &*corpus : nullptr, tok);
  }

  const AssembledPrompt prompt = assemble(spec);
  if (!a.json) {
    std::cout << prompt.text << "\n";
    return 0;
  }
  ordered_json j;
  j["prompt_id"] = prompt_hash(prompt.text);
  j["text"] = prompt.text;
  j["spans"] = ordered_json::array();
  for (const auto& s : prompt.spans) {
    ordered_json e;
    e["kind"] = std::string(to_string(s.kind));
    e["demo"] = s.demo_index ? ordered_json(*s.demo_index) : ordered_json(nullptr);
    e["start"] = s.start;
    e["end"] = s.end;
    j["spans"].push_back(e);
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

ordered_json scores_json(const std::map<std::string, ComponentScore>& m) {
  ordered_json j = ordered_json::object();
  for (const auto& [k, s] : m) j[k] = {{"raw", s.raw}, {"percent", s.percent}, {"tokens", s.tokens}};
  return j;
}

struct AttributeArgs {
  std::vector<std::string> dumps;
  std::vector<std::string> spans;
  std::string dir;
  std::string results;
  bool correct_only = false;
  bool include_query = false;
};

int do_attribute(const AttributeArgs& a) {
  std::vector<std::pair<std::string, std::string>> pairs;
  if (!a.dir.empty()) {
    std::vector<fs::path> found;
    for (const auto& e : fs::directory_iterator(a.dir)) {
      if (e.path().extension() == ".attn") found.push_back(e.path());
    }
    std::sort(found.begin(), found.end());
    for (const auto& p : found) {
      fs::path side = p;
      side.replace_extension(".spans.json");
      pairs.emplace_back(p.string(), side.string());
    }
  }
  if (a.dumps.size() != a.spans.size()) throw ConfigurationError("--dump and --spans must be given in pairs");
  for (std::size_t i = 0; i < a.dumps.size(); ++i) pairs.emplace_back(a.dumps[i], a.spans[i]);
  if (pairs.empty()) throw ConfigurationError("no attention dumps given");

  AttributionOptions opts;
  opts.include_query_token = a.include_query;
  std::vector<AttributionSample> samples;
  for (const auto& [dump_path, span_path] : pairs) {
    const AttentionDump dump = read_dump(dump_path);
    const TokenSpanMap map = read_span_file(span_path);
    if (map.prompt_id != dump.prompt_id) {
      throw ValidationError(span_path + ": prompt_id '" + map.prompt_id + "' does not match dump '" +
                            dump.prompt_id + "'");
    }
    samples.push_back({dump.prompt_id, component_scores(per_token_norms(dump), map, opts)});
  }
  if (a.correct_only) {
    if (a.results.empty()) throw ConfigurationError("--correct-only needs --results");
    std::set<std::string> correct;
    for (const auto& r : read_results(a.results)) {
      if (r.score && *r.score == 1.0) correct.insert(r.prompt_hash);
    }
    samples = filter_correct(samples, correct);
    if (samples.empty()) throw InsufficientDataError("no correctly answered prompts among the dumps");
  }
  std::vector<AttributionResult> results;
  for (const auto& s : samples) results.push_back(s.result);
  const AttributionResult avg = average_over_samples(results);

  ordered_json j;
  j["samples"] = avg.samples;
  j["components"] = scores_json(avg.components);
  j["detailed"] = scores_json(avg.detailed);
  j["warnings"] = avg.warnings;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Prompt component ablation and attribution harness"};
  app.require_subcommand(1);

  PromptArgs assemble_args;
  auto* assemble_cmd = app.add_subcommand("assemble", "Render one prompt");
  add_prompt_options(assemble_cmd, assemble_args, false);

  PromptArgs corrupt_args;
  auto* corrupt_cmd = app.add_subcommand("corrupt", "Render one corrupted prompt");
  add_prompt_options(corrupt_cmd, corrupt_args, true);

  std::string config_path, out_path;
  std::optional<std::uint64_t> seed;
  RunOptions run_opts;
  auto* run_cmd = app.add_subcommand("run", "Run an experiment grid");
  run_cmd->add_option("--config", config_path, "Experiment config JSON")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--seed", seed, "Override the master seed");
  run_cmd->add_option("--workers", run_opts.workers, "Concurrent requests")->check(CLI::PositiveNumber);
  run_cmd->add_flag("--resume", run_opts.resume, "Keep complete cells of an existing results file");
  run_cmd->add_option("--out", out_path, "Results file (default <output_dir>/results.jsonl)");

  std::string results_path;
  std::vector<std::string> score_tasks;
  auto* score_cmd = app.add_subcommand("score", "Re-score a results file from raw responses");
  score_cmd->add_option("--results", results_path, "Results JSONL")->required()->check(CLI::ExistingFile);
  score_cmd->add_option("--task", score_tasks, "Task JSON file(s)")->required()->check(CLI::ExistingFile);
  score_cmd->add_option("--out", out_path, "Output file (default: overwrite --results)");

  AttributeArgs attr;
  auto* attr_cmd = app.add_subcommand("attribute", "Component attribution from attention dumps");
  attr_cmd->add_option("--dump", attr.dumps, "Attention dump (repeatable)")->check(CLI::ExistingFile);
  attr_cmd->add_option("--spans", attr.spans, "Span sidecar for each --dump")->check(CLI::ExistingFile);
  attr_cmd->add_option("--dir", attr.dir, "Directory of *.attn files with *.spans.json sidecars")
      ->check(CLI::ExistingDirectory);
  attr_cmd->add_option("--results", attr.results, "Results JSONL used by --correct-only");
  attr_cmd->add_flag("--correct-only", attr.correct_only, "Average only correctly answered prompts");
  attr_cmd->add_flag("--include-query", attr.include_query, "Attribute the query token too");

  std::string report_results, report_out;
  auto* report_cmd = app.add_subcommand("report", "Tables and plot data from results");
  report_cmd->add_option("--results", report_results, "Results JSONL")->required()->check(CLI::ExistingFile);
  report_cmd->add_option("--out", report_out, "Directory for per_dataset.md, macro.md, plot.csv");

  CLI11_PARSE(app, argc, argv);

  if (*assemble_cmd) return do_prompt(assemble_args);
  if (*corrupt_cmd) return do_prompt(corrupt_args);
  if (*run_cmd) {
    ExperimentConfig cfg = ExperimentConfig::load(config_path);
    if (seed) cfg.master_seed = *seed;
    if (!out_path.empty()) run_opts.results_path = out_path;
    const RunSummary s = run(cfg, run_opts);
    std::cerr << "cells " << s.cells << " (resumed " << s.resumed_cells << "), records " << s.records
              << ", errored " << s.errored_records << ", fully errored cells " << s.fully_errored_cells
              << "\nresults: " << s.results_path << "\n";
    return s.exit_code();
  }
  if (*score_cmd) {
    std::map<std::string, TaskSpec> by_id;
    for (const auto& p : score_tasks) {
      TaskSpec t = load_task(p);
      by_id.emplace(t.id, std::move(t));
    }
    write_results(rescore(read_results(results_path), by_id), out_path.empty() ? results_path : out_path);
    return 0;
  }
  if (*attr_cmd) return do_attribute(attr);
  if (*report_cmd) {
    const Report rep = report(read_results(report_results));
    if (!report_out.empty()) {
      fs::create_directories(report_out);
      text::write_file((fs::path(report_out) / "per_dataset.md").string(), rep.per_dataset_table);
      text::write_file((fs::path(report_out) / "macro.md").string(), rep.macro_table);
      text::write_file((fs::path(report_out) / "plot.csv").string(), rep.plot_data);
    }
    std::cout << rep.per_dataset_table << "\n" << rep.macro_table;
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return e.kind() == ErrorKind::Configuration || e.kind() == ErrorKind::Validation ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
