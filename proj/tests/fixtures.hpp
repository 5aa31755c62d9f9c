#pragma once

#include "supercut/types.hpp"

#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace supercut::test {

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("supercut_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
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

/// Three GT instances (10, 10 and 30 points, ids 0..2) and three predictions:
/// an exact copy of GT 0 (confidence 0.9), 3 points of GT 1 (IoU 0.3,
/// confidence 0.8) and 23 points of GT 2 (IoU 23/30, confidence 0.7).
/// By hand: AP is 1 at IoU 0.25, 5/9 from 0.50 to 0.75 and 1/3 from 0.80 up,
/// so mAP = (6 * 5/9 + 4 * 1/3) / 10 = 7/15.
struct PrFixture {
  std::vector<std::int32_t> gt;
  InstanceSegmentation pred;

  PrFixture() {
    for (int p = 0; p < 50; ++p) gt.push_back(p < 10 ? 0 : p < 20 ? 1 : 2);
    pred.assignment.assign(50, kInstanceNone);
    for (int p = 0; p < 10; ++p) pred.assignment[p] = 5;
    for (int p = 10; p < 13; ++p) pred.assignment[p] = 6;
    for (int p = 20; p < 43; ++p) pred.assignment[p] = 7;
    pred.instances = {{5, 0.9}, {6, 0.8}, {7, 0.7}};
  }

  static constexpr double kAp25 = 1.0;
  static constexpr double kAp50 = 5.0 / 9.0;
  static constexpr double kMap = 7.0 / 15.0;
};

}  // namespace supercut::test
