#pragma once

#include <string>

namespace fewt::io {

std::string read_file(const std::string& path);

// Write-temp-then-rename so readers never observe partial files.
void atomic_write(const std::string& path, const std::string& contents);

// FNV-1a over the bytes, hex-encoded; used as the config fingerprint.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace fewt::io
