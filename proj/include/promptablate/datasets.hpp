#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "promptablate/prompt.hpp"

namespace promptablate {

// Task file: a single UTF-8 JSON document
//   {"id", "type": "classification"|"generation", "task_instruction",
//    "inline_instruction", "label_space"?, "demonstrations": [{"input","label"}],
//    "instances": [{"input","references"}], "source"?, "license"?}
TaskSpec task_from_json(const nlohmann::json& doc);
nlohmann::json task_to_json(const TaskSpec& task);

TaskSpec load_task(const std::string& path);
void save_task(const TaskSpec& task, const std::string& path);

// Deterministic selection of n test instances, returned as indices into
// task.instances in ascending order. Balanced mode gives every label
// floor(n/k) instances and hands the remainder to the first labels of
// label_space.
std::vector<std::size_t> sample_instance_indices(const TaskSpec& task, std::size_t n,
                                                 std::uint64_t seed, bool balanced);

std::vector<TestInstance> sample_instances(const TaskSpec& task, std::size_t n, std::uint64_t seed,
                                           bool balanced);

}  // namespace promptablate
