// Python extension: thin wrappers that exchange JSON text with the package
// layer in promptablate/__init__.py.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "json.hpp"
#include "promptablate/attribution.hpp"
#include "promptablate/corruption.hpp"
#include "promptablate/datasets.hpp"
#include "promptablate/error.hpp"
#include "promptablate/experiment.hpp"
#include "promptablate/metrics.hpp"
#include "promptablate/text.hpp"

namespace py = pybind11;
using namespace promptablate;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string spans_json(const AssembledPrompt& p) {
  ordered_json j;
  j["prompt_id"] = prompt_hash(p.text);
  j["text"] = p.text;
  j["spans"] = ordered_json::array();
  for (const auto& s : p.spans) {
    j["spans"].push_back({{"kind", std::string(to_string(s.kind))},
                          {"demo", s.demo_index ? ordered_json(*s.demo_index) : ordered_json(nullptr)},
                          {"start", s.start},
                          {"end", s.end}});
  }
  return j.dump();
}

std::string assemble_prompt(const std::string& task_json, const std::string& configuration, const std::string& input,
                            std::size_t shots, const std::string& corruption, std::uint64_t seed,
                            const std::string& words_path, const std::string& corpus_path) {
  auto task = std::make_shared<const TaskSpec>(task_from_json(json::parse(task_json)));
  const RowPlan plan = resolve_row(configuration);
  PromptSpec spec = named_configuration(plan.prompt_configuration, task, {input, {}}, shots);
  std::optional<WordSource> words;
  std::optional<SentenceCorpus> corpus;
  if (!words_path.empty()) words = WordSource::load(words_path);
  if (!corpus_path.empty()) corpus = SentenceCorpus::load(corpus_path);
  const WordSource fallback({"unused"});
  std::vector<CorruptionSpec> chain;
  if (plan.corruption) chain.push_back(*plan.corruption);
  chain.push_back(CorruptionSpec::parse(corruption));
  for (auto c : chain) {
    if (std::holds_alternative<NoCorruption>(c.kind)) continue;
    c.seed = seed;
    spec = apply(spec, c, words ? *words : fallback, corpus ? &*corpus : nullptr, WhitespaceTokenizer{});
  }
  return spans_json(assemble(spec));
}

std::string scores_json(const AttributionResult& r) {
  const auto m = [](const std::map<std::string, ComponentScore>& s) {
    ordered_json j = ordered_json::object();
    for (const auto& [k, v] : s) j[k] = {{"raw", v.raw}, {"percent", v.percent}, {"tokens", v.tokens}};
    return j;
  };
  ordered_json j;
  j["samples"] = r.samples;
  j["components"] = m(r.components);
  j["detailed"] = m(r.detailed);
  j["warnings"] = r.warnings;
  return j.dump();
}

std::string attribute(const std::vector<std::string>& dumps, const std::vector<std::string>& spans,
                      bool include_query) {
  if (dumps.size() != spans.size()) throw ConfigurationError("dumps and span files must pair up");
  AttributionOptions opts;
  opts.include_query_token = include_query;
  std::vector<AttributionResult> results;
  for (std::size_t i = 0; i < dumps.size(); ++i) {
    results.push_back(component_scores(per_token_norms(read_dump(dumps[i])), read_span_file(spans[i]), opts));
  }
  return scores_json(average_over_samples(results));
}

void write_full_dump(const std::string& path, std::size_t L, std::size_t H, std::size_t T, std::size_t d,
                     const std::string& prompt_id, std::vector<float> alpha, std::vector<float> fvec) {
  AttentionDump dump;
  dump.layers = L;
  dump.heads = H;
  dump.tokens = T;
  dump.dim = d;
  dump.prompt_id = prompt_id;
  dump.alpha = std::move(alpha);
  dump.fvec = std::move(fvec);
  write_dump(dump, path);
}

void write_reduced_dump(const std::string& path, std::size_t L, std::size_t T, const std::string& prompt_id,
                        std::vector<float> norms) {
  AttentionDump dump;
  dump.variant = AttentionDump::Variant::Reduced;
  dump.layers = L;
  dump.tokens = T;
  dump.prompt_id = prompt_id;
  dump.norms = std::move(norms);
  write_dump(dump, path);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Prompt component ablation and attribution core";

  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
  error_type.call_once_and_store_result([&] { return py::exception<Error>(m, "PromptablateError"); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error_type.get_stored(), (std::string(to_string(e.kind())) + ": " + e.what()).c_str());
    }
  });

  m.def("load_task", [](const std::string& path) { return task_to_json(load_task(path)).dump(); });
  m.def("validate_task", [](const std::string& task_json) { task_from_json(json::parse(task_json)); });
  m.def("configuration_names", &configuration_names);
  m.def("row_names", &row_names);
  m.def("assemble", &assemble_prompt, py::arg("task_json"), py::arg("configuration"), py::arg("input"),
        py::arg("shots") = 4, py::arg("corruption") = "none", py::arg("seed") = 0, py::arg("words") = "",
        py::arg("corpus") = "");
  m.def("canonical_corruption", [](const std::string& d) { return CorruptionSpec::parse(d).descriptor(); });
  m.def("sample_instance_indices", [](const std::string& task_json, std::size_t n, std::uint64_t seed, bool balanced) {
    return sample_instance_indices(task_from_json(json::parse(task_json)), n, seed, balanced);
  });
  m.def("prompt_hash", [](const std::string& text) { return prompt_hash(text); });

  m.def("postprocess", [](const std::string& s) { return postprocess(s); });
  m.def("normalize_answer", [](const std::string& s) { return normalize_answer(s); });
  m.def("exact_match", [](const std::string& p, const std::vector<std::string>& refs) { return exact_match(p, refs).value; });
  m.def("rouge_l", [](const std::string& p, const std::vector<std::string>& refs) { return rouge_l(p, refs).value; });
  m.def("jackknife_mean", [](const std::vector<double>& v) {
    const auto r = jackknife_mean(v);
    return std::make_pair(r.mean, r.jackknife_stderr);
  });
  m.def("macro_average", &macro_average);
  m.def("format_score", &format_score);

  m.def("write_full_dump", &write_full_dump, py::arg("path"), py::arg("L"), py::arg("H"), py::arg("T"), py::arg("d"),
        py::arg("prompt_id"), py::arg("alpha"), py::arg("fvec"));
  m.def("write_reduced_dump", &write_reduced_dump, py::arg("path"), py::arg("L"), py::arg("T"),
        py::arg("prompt_id"), py::arg("norms"));
  m.def("per_token_norms", [](const std::string& path) { return per_token_norms(read_dump(path)); });
  m.def("validate_span_file", [](const std::string& path, std::size_t tokens) { read_span_file(path).validate(tokens); });
  m.def("attribute", &attribute, py::arg("dumps"), py::arg("spans"), py::arg("include_query") = false);

  m.def("run", [](const std::string& config_path, std::size_t workers, bool resume, const std::string& out) {
    RunOptions opts;
    opts.workers = workers;
    opts.resume = resume;
    if (!out.empty()) opts.results_path = out;
    RunSummary s;
    {
      py::gil_scoped_release release;
      s = run(ExperimentConfig::load(config_path), opts);
    }
    return json{{"results_path", s.results_path}, {"cells", s.cells}, {"records", s.records},
                {"errored_records", s.errored_records}, {"fully_errored_cells", s.fully_errored_cells},
                {"resumed_cells", s.resumed_cells}, {"exit_code", s.exit_code()}}.dump();
  }, py::arg("config_path"), py::arg("workers") = 1, py::arg("resume") = false, py::arg("out") = "");
  m.def("report", [](const std::string& results_path) {
    const Report r = report(read_results(results_path));
    return json{{"backends", r.backends}, {"tasks", r.tasks}, {"per_dataset_table", r.per_dataset_table},
                {"macro_table", r.macro_table}, {"plot_data", r.plot_data}}.dump();
  });
}
