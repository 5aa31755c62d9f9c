#include "supercut/parallel.hpp"

namespace supercut {

namespace {

std::atomic<std::size_t>& thread_setting() {
  static std::atomic<std::size_t> value{0};
  return value;
}

}  // namespace

std::size_t default_thread_count() {
  const auto v = thread_setting().load();
  if (v > 0) return v;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

void set_default_thread_count(std::size_t threads) { thread_setting().store(threads); }

}  // namespace supercut
