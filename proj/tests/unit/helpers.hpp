#pragma once

#include <filesystem>
#include <memory>
#include <random>
#include <string>

#include "promptablate/datasets.hpp"
#include "promptablate/prompt.hpp"

namespace pa_test {

inline std::string data_path(const std::string& name) { return std::string(PA_TEST_DATA) + "/" + name; }
inline std::string source_path(const std::string& rel) { return std::string(PA_SOURCE_ROOT) + "/" + rel; }

inline std::shared_ptr<const promptablate::TaskSpec> toy_task(const std::string& id) {
  return std::make_shared<const promptablate::TaskSpec>(promptablate::load_task(data_path(id + ".json")));
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("pa_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace pa_test
