// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <doctest.h>

#include <filesystem>
#include <string>

#include "cascade/error.hpp"

namespace testutil {

template <typename F>
void expect_code(cascade::ErrorCode code, F&& fn) {
  try {
    fn();
    FAIL("expected " << std::string(cascade::error_code_name(code)));
  } catch (const cascade::Error& e) {
    CHECK_MESSAGE(e.code() == code, "got " << std::string(cascade::error_code_name(e.code())) << ": " << e.what());
  }
}

inline std::filesystem::path source_path(const std::string& rel) {
  return std::filesystem::path(CASCADE_SOURCE_DIR) / rel;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("cascade_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testutil
