#include "promptablate/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "promptablate/error.hpp"
#include "promptablate/text.hpp"

namespace promptablate {

std::string_view to_string(Metric m) { return m == Metric::ExactMatch ? "exact_match" : "rouge_l"; }

Metric parse_metric(std::string_view name) {
  if (name == "exact_match") return Metric::ExactMatch;
  if (name == "rouge_l") return Metric::RougeL;
  throw ValidationError("unknown metric '" + std::string(name) + "'");
}

std::string postprocess(std::string_view response) {
  const auto stop = response.find('.');
  return std::string(text::trim(response.substr(0, stop)));
}

std::string normalize_answer(std::string_view s) {
  return text::join(text::split_whitespace(text::casefold(postprocess(s))), " ");
}

Score exact_match(std::string_view prediction, const std::vector<std::string>& references) {
  if (references.empty()) throw ValidationError("exact_match needs at least one reference");
  const std::string pred = normalize_answer(prediction);
  const bool hit = std::any_of(references.begin(), references.end(),
                               [&](const std::string& r) { return normalize_answer(r) == pred; });
  return {hit ? 1.0 : 0.0, Metric::ExactMatch};
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() || b.empty()) return 0;
  // Two rolling rows over b.
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

Score rouge_l(std::string_view prediction, std::string_view reference) {
  const auto p = text::split_whitespace(text::casefold(prediction));
  const auto r = text::split_whitespace(text::casefold(reference));
  const double l = static_cast<double>(lcs_length(p, r));
  const double precision = p.empty() ? 0.0 : l / static_cast<double>(p.size());
  const double recall = r.empty() ? 0.0 : l / static_cast<double>(r.size());
  const double f = precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
  return {f, Metric::RougeL};
}

Score rouge_l(std::string_view prediction, const std::vector<std::string>& references) {
  if (references.empty()) throw ValidationError("rouge_l needs at least one reference");
  double best = 0.0;
  for (const auto& r : references) best = std::max(best, rouge_l(prediction, r).value);
  return {best, Metric::RougeL};
}

AggregateResult jackknife_mean(const std::vector<double>& values) {
  const std::size_t n = values.size();
  if (n < 2) throw InsufficientDataError("jackknife needs at least two values, got " + std::to_string(n));
  const double total = std::accumulate(values.begin(), values.end(), 0.0);
  const double nd = static_cast<double>(n);

  std::vector<double> loo(n);
  for (std::size_t i = 0; i < n; ++i) loo[i] = (total - values[i]) / (nd - 1.0);
  const double mean = std::accumulate(loo.begin(), loo.end(), 0.0) / nd;

  double ss = 0.0;
  for (double t : loo) ss += (t - mean) * (t - mean);
  const double variance = (nd - 1.0) / nd * ss;
  return {mean, std::sqrt(variance), n};
}

double macro_average(const std::vector<double>& per_dataset_means) {
  if (per_dataset_means.empty()) throw InsufficientDataError("macro average of no datasets");
  return std::accumulate(per_dataset_means.begin(), per_dataset_means.end(), 0.0) /
         static_cast<double>(per_dataset_means.size());
}

}  // namespace promptablate
