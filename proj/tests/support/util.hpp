#pragma once

#include <gtest/gtest.h>

#include <filesystem>
#include <functional>
#include <string>

#include "unitygraph/error.hpp"

namespace testutil {

/// Kind of the unitygraph::Error thrown by fn; records a failure if none is.
inline unitygraph::ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const unitygraph::Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return unitygraph::ErrorKind::io_failure;
}

/// Fresh, empty directory under the system temp path.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("unitygraph_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testutil
