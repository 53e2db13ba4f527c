#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace promptablate {

enum class Metric { ExactMatch, RougeL };

std::string_view to_string(Metric m);
Metric parse_metric(std::string_view name);

struct Score {
  double value = 0.0;  // in [0, 1]
  Metric metric = Metric::ExactMatch;
};

struct AggregateResult {
  double mean = 0.0;
  double jackknife_stderr = 0.0;
  std::size_t n = 0;
};

// Cuts the response at the first ASCII '.' and trims surrounding whitespace.
std::string postprocess(std::string_view response);

// postprocess + ASCII casefold + internal whitespace collapsed to one space.
std::string normalize_answer(std::string_view s);

Score exact_match(std::string_view prediction, const std::vector<std::string>& references);

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);

// Rouge-L F1 over casefolded whitespace tokens. Callers postprocess the
// prediction first.
Score rouge_l(std::string_view prediction, std::string_view reference);
Score rouge_l(std::string_view prediction, const std::vector<std::string>& references);

// Leave-one-out estimate of the mean and its standard error. n >= 2.
AggregateResult jackknife_mean(const std::vector<double>& values);

double macro_average(const std::vector<double>& per_dataset_means);

}  // namespace promptablate
