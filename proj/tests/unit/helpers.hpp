#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "debtlens/corpus.hpp"

namespace testing {

inline std::filesystem::path fixture(const std::string& rel) {
  return std::filesystem::path(DEBTLENS_FIXTURE_DIR) / rel;
}

inline nlohmann::json read_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("debtlens-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline debtlens::LabeledExample example(std::string id, std::string text, debtlens::ExampleLabel label,
                                        std::string repo = "o/r",
                                        std::string created = "2020-01-01T00:00:00Z") {
  debtlens::LabeledExample e;
  e.id = std::move(id);
  e.text = std::move(text);
  e.label = label;
  e.repo_name = std::move(repo);
  e.created_at = debtlens::parse_utc_or_throw(created);
  return e;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace testing
