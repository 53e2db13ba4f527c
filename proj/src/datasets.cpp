#include "promptablate/datasets.hpp"

#include <algorithm>
#include <map>

#include "promptablate/error.hpp"
#include "promptablate/rng.hpp"
#include "promptablate/text.hpp"

namespace promptablate {
namespace {

using nlohmann::json;

const json& require(const json& obj, const std::string& key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError(path + key + ": missing");
  return *it;
}

std::string require_string(const json& obj, const std::string& key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_string()) throw ValidationError(path + key + ": expected string");
  return v.get<std::string>();
}

std::vector<std::string> string_list(const json& v, const std::string& path) {
  if (!v.is_array()) throw ValidationError(path + ": expected array of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_string()) {
      throw ValidationError(path + "[" + std::to_string(i) + "]: expected string");
    }
    out.push_back(v[i].get<std::string>());
  }
  return out;
}

}  // namespace

TaskSpec task_from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("task: expected a JSON object");
  TaskSpec t;
  t.id = require_string(doc, "id", "");
  t.type = parse_task_type(require_string(doc, "type", ""));
  t.task_instruction = require_string(doc, "task_instruction", "");
  t.inline_instruction = require_string(doc, "inline_instruction", "");
  if (auto it = doc.find("label_space"); it != doc.end() && !it->is_null()) {
    t.label_space = string_list(*it, "label_space");
  }

  const json& demos = require(doc, "demonstrations", "");
  if (!demos.is_array()) throw ValidationError("demonstrations: expected array");
  for (std::size_t i = 0; i < demos.size(); ++i) {
    const std::string path = "demonstrations[" + std::to_string(i) + "].";
    t.demonstrations.push_back(
        {require_string(demos[i], "input", path), require_string(demos[i], "label", path)});
  }

  const json& insts = require(doc, "instances", "");
  if (!insts.is_array()) throw ValidationError("instances: expected array");
  for (std::size_t i = 0; i < insts.size(); ++i) {
    const std::string path = "instances[" + std::to_string(i) + "].";
    TestInstance inst;
    inst.input = require_string(insts[i], "input", path);
    inst.references = string_list(require(insts[i], "references", path), path + "references");
    t.instances.push_back(std::move(inst));
  }

  if (auto it = doc.find("source"); it != doc.end() && it->is_string()) t.source = *it;
  if (auto it = doc.find("license"); it != doc.end() && it->is_string()) t.license = *it;

  t.validate();
  return t;
}

json task_to_json(const TaskSpec& t) {
  json doc = json::object();
  doc["id"] = t.id;
  doc["type"] = std::string(to_string(t.type));
  doc["task_instruction"] = t.task_instruction;
  doc["inline_instruction"] = t.inline_instruction;
  if (t.is_classification() || !t.label_space.empty()) doc["label_space"] = t.label_space;
  doc["demonstrations"] = json::array();
  for (const auto& d : t.demonstrations) {
    doc["demonstrations"].push_back({{"input", d.input}, {"label", d.label}});
  }
  doc["instances"] = json::array();
  for (const auto& inst : t.instances) {
    doc["instances"].push_back({{"input", inst.input}, {"references", inst.references}});
  }
  if (!t.source.empty()) doc["source"] = t.source;
  if (!t.license.empty()) doc["license"] = t.license;
  return doc;
}

TaskSpec load_task(const std::string& path) {
  json doc;
  try {
    doc = json::parse(text::read_file(path));
  } catch (const json::parse_error& e) {
    throw ValidationError(path + ": malformed JSON: " + e.what());
  }
  try {
    return task_from_json(doc);
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

void save_task(const TaskSpec& task, const std::string& path) {
  text::write_file(path, task_to_json(task).dump(2) + "\n");
}

std::vector<std::size_t> sample_instance_indices(const TaskSpec& task, std::size_t n,
                                                 std::uint64_t seed, bool balanced) {
  if (n == 0) return {};
  Rng rng(seed);
  std::vector<std::size_t> picked;

  if (!balanced) {
    if (n > task.instances.size()) {
      throw InfeasibleError("task '" + task.id + "': requested " + std::to_string(n) +
                            " instances, only " + std::to_string(task.instances.size()) +
                            " available");
    }
    picked = rng.sample_without_replacement(task.instances.size(), n);
  } else {
    if (!task.is_classification()) {
      throw ConfigurationError("task '" + task.id + "': balanced sampling needs a classification task");
    }
    const std::size_t k = task.label_space.size();
    std::map<std::string, std::vector<std::size_t>> by_label;
    for (std::size_t i = 0; i < task.instances.size(); ++i) {
      by_label[task.instances[i].references.front()].push_back(i);
    }
    std::string shortfalls;
    std::vector<std::size_t> quota(k);
    for (std::size_t l = 0; l < k; ++l) {
      quota[l] = n / k + (l < n % k ? 1 : 0);
      const std::size_t have = by_label[task.label_space[l]].size();
      if (have < quota[l]) {
        if (!shortfalls.empty()) shortfalls += ", ";
        shortfalls += task.label_space[l] + " needs " + std::to_string(quota[l]) + " has " +
                      std::to_string(have);
      }
    }
    if (!shortfalls.empty()) {
      throw InfeasibleError("task '" + task.id + "': balanced sample of " + std::to_string(n) +
                            " infeasible (" + shortfalls + ")");
    }
    for (std::size_t l = 0; l < k; ++l) {
      const auto& pool = by_label[task.label_space[l]];
      for (std::size_t j : rng.sample_without_replacement(pool.size(), quota[l])) {
        picked.push_back(pool[j]);
      }
    }
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

std::vector<TestInstance> sample_instances(const TaskSpec& task, std::size_t n, std::uint64_t seed,
                                           bool balanced) {
  std::vector<TestInstance> out;
  for (std::size_t i : sample_instance_indices(task, n, seed, balanced)) {
    out.push_back(task.instances[i]);
  }
  return out;
}

}  // namespace promptablate
