#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "promptablate/backend.hpp"
#include "promptablate/corruption.hpp"
#include "promptablate/metrics.hpp"
#include "promptablate/prompt.hpp"

namespace promptablate {

struct ExperimentConfig {
  std::vector<BackendDescriptor> backends;
  std::vector<std::string> tasks;           // task file paths
  std::vector<std::string> configurations;  // row names, see resolve_row()
  std::vector<CorruptionSpec> corruptions;  // applied on top of every row; default {none}
  std::size_t shots = 4;
  std::size_t n_instances = 100;
  std::uint64_t master_seed = 0;
  bool balanced = true;  // classification tasks only
  std::size_t max_new_tokens = 10;
  std::string wordlist;
  std::optional<std::string> corpus;
  std::string output_dir = ".";

  void validate() const;

  /// Relative paths in the document are resolved against `base_dir`.
  static ExperimentConfig from_json(const nlohmann::json& j, const std::string& base_dir = "");
  static ExperimentConfig load(const std::string& path);
};

/// A report row name resolved to a prompt configuration plus an optional
/// corruption. Besides the prompt configurations, rows may name semantic
/// corruptions of the baseline: rw_both_instr, rw_task_instr,
/// rw_inline_instr, rw_labels, wrong_labels, ood_inputs and
/// rw_inline_in_<k>_demos.
struct RowPlan {
  std::string prompt_configuration;
  std::optional<CorruptionSpec> corruption;
};

RowPlan resolve_row(std::string_view name);
const std::vector<std::string>& row_names();
std::string row_display_name(std::string_view name);

struct ResultRecord {
  std::string backend;
  std::string task;
  std::string configuration;
  std::string corruption;  // descriptor
  std::size_t instance = 0;  // index into the task file's instances
  std::string prompt_hash;
  std::string raw_response;
  std::string processed_response;
  Metric metric = Metric::ExactMatch;
  std::optional<double> score;
  std::optional<std::string> error;

  nlohmann::ordered_json to_json() const;
  static ResultRecord from_json(const nlohmann::json& j);
  bool operator==(const ResultRecord&) const = default;
};

std::vector<ResultRecord> read_results(const std::string& path);
void write_results(const std::vector<ResultRecord>& records, const std::string& path);

struct RunOptions {
  std::size_t workers = 1;
  bool resume = false;
  std::optional<std::string> results_path;  // default <output_dir>/results.jsonl
};

struct RunSummary {
  std::string results_path;
  std::size_t cells = 0;
  std::size_t records = 0;
  std::size_t errored_records = 0;
  std::size_t fully_errored_cells = 0;
  std::size_t resumed_cells = 0;

  int exit_code() const { return fully_errored_cells > 0 ? 1 : 0; }
};

/// Runs the backend x task x row x corruption grid and writes one record per
/// cell and instance, in sorted cell order, independent of worker count.
RunSummary run(const ExperimentConfig& config, const RunOptions& options = {});

/// Recomputes processed responses and scores from raw responses.
std::vector<ResultRecord> rescore(const std::vector<ResultRecord>& records,
                                  const std::map<std::string, TaskSpec>& tasks_by_id);

// Scores one raw response for an instance of `task`.
Score score_response(const TaskSpec& task, const TestInstance& instance, std::string_view raw,
                     std::string* processed = nullptr);

struct CellStat {
  std::optional<double> mean;    // in [0, 1]
  std::optional<double> std_error;  // jackknife, needs >= 2 scored records
  std::size_t scored = 0;
  std::size_t errored = 0;
};

struct ReportRow {
  std::string backend;
  std::string configuration;
  std::string corruption;
  std::map<std::string, CellStat> per_task;
  std::optional<double> macro_mean;
  std::optional<double> macro_stderr;
};

struct Report {
  std::vector<std::string> backends;
  std::vector<std::string> tasks;
  std::vector<ReportRow> rows;
  std::string per_dataset_table;  // markdown, one table per backend
  std::string macro_table;        // markdown, rows x backends
  std::string plot_data;          // CSV
};

Report report(const std::vector<ResultRecord>& records);

// Scores rendered the way the tables print them: x100, one decimal.
std::string format_score(double value);

}  // namespace promptablate
