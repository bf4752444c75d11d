// SPDX-License-Identifier: Apache-2.0
//
// Immutable blob store on a local directory. Keys are relative paths under
// the root; a put lands in a temporary file and is renamed into place, so a
// reader sees either nothing or the whole blob.
#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "gridedge/grid.hpp"

namespace gridedge {

enum class Artifact { PartialY, Scenarios, Result };
std::string_view to_string(Artifact artifact);

/// runs/<run_id>/regions/<region>/<artifact>
std::string store_key(std::string_view run_id, RegionId region, Artifact artifact);

/// Non-empty components, no `.` or `..`, no backslashes, at most 512 bytes.
void validate_key(std::string_view key);

struct PutReceipt {
  std::string key;
  std::size_t length = 0;
  std::string sha256;  // hex digest of the blob
};

struct WaitResult {
  bool complete = false;
  std::vector<std::string> missing;  // sorted
};

class ObjectStore {
 public:
  explicit ObjectStore(std::filesystem::path root);

  /// Throws AlreadyExists if the key was ever written, InvalidKey on a bad key.
  PutReceipt put(std::string_view key, std::string_view blob);
  /// Throws NotFound.
  std::string get(std::string_view key) const;
  bool exists(std::string_view key) const;
  /// Keys starting with `prefix`, in byte order.
  std::vector<std::string> list(std::string_view prefix) const;
  /// Polls every 20 ms until every key exists or the deadline passes.
  WaitResult wait_for(const std::vector<std::string>& keys, std::chrono::steady_clock::time_point deadline) const;

  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
};

std::string sha256_hex(std::string_view bytes);

}  // namespace gridedge
