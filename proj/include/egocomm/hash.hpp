#pragma once

// SHA-256 digests of bytes, files and directory trees (requires OpenSSL's
// libcrypto at link time).

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "egocomm/error.hpp"
#include "egocomm/text.hpp"

namespace egocomm {

inline std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), md.data(), &len) != 1)
    fail(ErrorCode::IoError, "sha256 failed");
  std::string hex;
  hex.reserve(2 * len);
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

inline std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(text::read_file(path)); }

/// Regular files under `dir`, as sorted generic relative paths.
inline std::vector<std::string> list_files(const std::filesystem::path& dir) {
  std::vector<std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out.push_back(std::filesystem::relative(e.path(), dir).generic_string());
  std::sort(out.begin(), out.end());
  return out;
}

/// Digest of a directory tree: SHA-256 over "relpath\tsha256(file)\n" lines
/// in sorted path order. A plain file hashes as sha256_file.
inline std::string sha256_tree(const std::filesystem::path& path) {
  if (std::filesystem::is_regular_file(path)) return sha256_file(path);
  if (!std::filesystem::is_directory(path)) fail(ErrorCode::IoError, "cannot hash " + path.string());
  std::string listing;
  for (const auto& rel : list_files(path)) listing += rel + '\t' + sha256_file(path / rel) + '\n';
  return sha256_hex(listing);
}

}  // namespace egocomm
