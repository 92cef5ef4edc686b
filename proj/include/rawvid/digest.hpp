#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>

namespace rawvid {

/// Lower-case hex SHA-256.
std::string sha256_hex(std::span<const unsigned char> bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Digest of every regular file below `root`, keyed by generic relative path.
/// Files named manifest.json are skipped so a run manifest does not digest itself.
std::map<std::string, std::string> digest_directory(const std::filesystem::path& root);

/// File: its SHA-256. Directory: SHA-256 over the sorted "path digest" listing.
std::string digest_path(const std::filesystem::path& path);

}  // namespace rawvid
