#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "vchatter/error.hpp"

namespace vtest {

namespace fs = std::filesystem;

inline fs::path fixture_dir() { return VCHATTER_FIXTURE_DIR; }
inline fs::path asset_dir() { return VCHATTER_DEFAULT_ASSET_DIR; }

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline nlohmann::json load_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

/// Fresh directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("vchatter-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

/// Runs `fn` and returns the code of the vchatter::Error it throws.
template <typename Fn>
std::optional<vchatter::ErrorCode> error_of(Fn&& fn) {
  try {
    fn();
  } catch (const vchatter::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace vtest
