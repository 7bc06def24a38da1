#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace fpk {
namespace io {

/// Shortest decimal representation that round-trips an 8-byte float; keeps
/// CSV and JSON artifacts byte-deterministic across runs.
std::string formatDouble(double v);

/// FNV-1a 64-bit content digest, hex-encoded.
std::string contentDigest(std::string_view data);

void writeFile(const std::string& path, std::string_view content);
std::string readFile(const std::string& path);

} // namespace io
} // namespace fpk
