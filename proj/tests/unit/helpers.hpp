#pragma once

#include <unistd.h>

#include <atomic>
#include <string>

#include "psv/common.hpp"

namespace testing {

namespace fs = std::filesystem;

// Fresh directory removed when the object goes out of scope.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("psv_unit_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

inline fs::path data(const std::string& name) { return fs::path(PSV_TEST_DATA) / name; }

}  // namespace testing
