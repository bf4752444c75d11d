// SPDX-License-Identifier: Apache-2.0
#include "gridedge/store.hpp"

#include <fcntl.h>
#include <openssl/evp.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include "gridedge/error.hpp"
#include "gridedge/text.hpp"

namespace gridedge {

namespace fs = std::filesystem;

namespace {

void write_all(int fd, std::string_view blob, const std::string& path) {
  std::size_t done = 0;
  while (done < blob.size()) {
    const auto n = ::write(fd, blob.data() + done, blob.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(Errc::Io, "write " + path + ": " + std::strerror(errno));
    }
    done += static_cast<std::size_t>(n);
  }
}

std::string temp_name() {
  static std::atomic<std::uint64_t> counter{0};
  std::ostringstream s;
  s << ".tmp-" << ::getpid() << "-" << std::hash<std::thread::id>{}(std::this_thread::get_id()) << "-" << counter++;
  return s.str();
}

}  // namespace

std::string_view to_string(Artifact artifact) {
  switch (artifact) {
    case Artifact::PartialY: return "partial_y";
    case Artifact::Scenarios: return "scenarios";
    case Artifact::Result: return "result";
  }
  return "?";
}

std::string store_key(std::string_view run_id, RegionId region, Artifact artifact) {
  auto key = "runs/" + std::string(run_id) + "/regions/" + std::to_string(region) + "/" + std::string(to_string(artifact));
  validate_key(key);
  return key;
}

void validate_key(std::string_view key) {
  if (key.empty() || key.size() > 512) throw Error(Errc::InvalidKey, "key length must be 1..512");
  if (key.find('\\') != std::string_view::npos || key.find('\0') != std::string_view::npos) {
    throw Error(Errc::InvalidKey, "key contains a forbidden character: " + std::string(key));
  }
  for (const auto& part : text::split(key, '/')) {
    if (part.empty() || part == "." || part == "..") {
      throw Error(Errc::InvalidKey, "bad key component in " + std::string(key));
    }
    if (part.rfind(".tmp-", 0) == 0) throw Error(Errc::InvalidKey, "reserved component in " + std::string(key));
  }
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(Errc::Io, "sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

ObjectStore::ObjectStore(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec) throw Error(Errc::Io, "cannot create store root " + root_.string() + ": " + ec.message());
}

PutReceipt ObjectStore::put(std::string_view key, std::string_view blob) {
  validate_key(key);
  const fs::path target = root_ / fs::path(std::string(key));
  std::error_code ec;
  fs::create_directories(target.parent_path(), ec);
  if (ec) throw Error(Errc::Io, "cannot create " + target.parent_path().string() + ": " + ec.message());

  const fs::path tmp = target.parent_path() / temp_name();
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_CLOEXEC, 0644);
  if (fd < 0) throw Error(Errc::Io, "open " + tmp.string() + ": " + std::strerror(errno));
  try {
    write_all(fd, blob, tmp.string());
    if (::fsync(fd) != 0) throw Error(Errc::Io, "fsync " + tmp.string() + ": " + std::strerror(errno));
  } catch (...) {
    ::close(fd);
    ::unlink(tmp.c_str());
    throw;
  }
  ::close(fd);
  // link(2) refuses to replace an existing name, which makes the
  // first-writer-wins check atomic across processes.
  if (::link(tmp.c_str(), target.c_str()) != 0) {
    const int err = errno;
    ::unlink(tmp.c_str());
    if (err == EEXIST) throw Error(Errc::AlreadyExists, std::string(key));
    throw Error(Errc::Io, "link " + target.string() + ": " + std::strerror(err));
  }
  ::unlink(tmp.c_str());
  return {std::string(key), blob.size(), sha256_hex(blob)};
}

std::string ObjectStore::get(std::string_view key) const {
  validate_key(key);
  const fs::path target = root_ / fs::path(std::string(key));
  std::ifstream in(target, std::ios::binary);
  if (!in || fs::is_directory(target)) throw Error(Errc::NotFound, std::string(key));
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

bool ObjectStore::exists(std::string_view key) const {
  validate_key(key);
  std::error_code ec;
  return fs::is_regular_file(root_ / fs::path(std::string(key)), ec);
}

std::vector<std::string> ObjectStore::list(std::string_view prefix) const {
  std::vector<std::string> out;
  std::error_code ec;
  for (auto it = fs::recursive_directory_iterator(root_, ec); !ec && it != fs::recursive_directory_iterator();
       it.increment(ec)) {
    if (!it->is_regular_file()) continue;
    const auto name = it->path().filename().string();
    if (name.rfind(".tmp-", 0) == 0) continue;
    auto key = fs::relative(it->path(), root_).generic_string();
    if (key.compare(0, prefix.size(), prefix) == 0) out.push_back(std::move(key));
  }
  std::sort(out.begin(), out.end());
  return out;
}

WaitResult ObjectStore::wait_for(const std::vector<std::string>& keys,
                                 std::chrono::steady_clock::time_point deadline) const {
  for (;;) {
    WaitResult r;
    for (const auto& k : keys) {
      if (!exists(k)) r.missing.push_back(k);
    }
    std::sort(r.missing.begin(), r.missing.end());
    r.complete = r.missing.empty();
    if (r.complete || std::chrono::steady_clock::now() >= deadline) return r;
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

}  // namespace gridedge
