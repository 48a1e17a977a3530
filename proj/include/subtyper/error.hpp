#pragma once

#include <stdexcept>
#include <string>

namespace subtyper {

// Root of all library errors. Subclasses carry the offending context
// (line number, visit id, ...) both as fields and in what().
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised for unreadable/missing input files.
struct FileError : Error {
  std::string path;
  FileError(std::string p, const std::string& reason)
      : Error("cannot open '" + p + "': " + reason), path(std::move(p)) {}
};

}  // namespace subtyper
