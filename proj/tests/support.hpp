// Shared fixtures for the unit tests.
#pragma once
#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

namespace irembed::testing {

inline std::filesystem::path data_dir() { return IREMBED_DATA_DIR; }

// Fresh scratch directory, removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("irembed_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
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
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline constexpr const char* kAddFunction =
    "define i32 @add(i32 %a, i32 %b) {\n"
    "entry:\n"
    "  %c = add i32 %a, %b\n"
    "  ret i32 %c\n"
    "}\n";

}  // namespace irembed::testing
