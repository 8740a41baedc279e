// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ced {

/// Base class for every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numeric or structural argument is out of its documented range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Two distributions cannot be contrasted (disjoint supports).
class AlignmentError : public Error {
 public:
  using Error::Error;
};

/// Descriptive features cannot be rendered.
class FeatureError : public Error {
 public:
  using Error::Error;
};

/// In-context example selection cannot be satisfied.
class SelectionError : public Error {
 public:
  using Error::Error;
};

/// Backend rule tables, templates or run configuration are invalid.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A backend failed to produce a distribution. Carries the context hash so the
/// failing request can be replayed.
class BackendError : public Error {
 public:
  BackendError(const std::string& what, std::uint64_t context_hash);

  std::uint64_t context_hash() const noexcept { return context_hash_; }

 private:
  std::uint64_t context_hash_;
};

/// Dataset ingestion failure. line() is 1-based, 0 when not tied to a line.
class DatasetError : public Error {
 public:
  DatasetError(const std::string& what, std::size_t line);

  std::size_t line() const noexcept { return line_; }
  /// The message without the line prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::size_t line_;
  std::string detail_;
};

/// FNV-1a over the context bytes; stable across platforms and runs.
std::uint64_t context_hash(std::string_view text) noexcept;

/// 16-digit lowercase hex rendering of a hash.
std::string hash_hex(std::uint64_t h);

}  // namespace ced
