#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace slowres {

/// Shortest-stable text form used by every CSV artifact: 17 significant digits.
std::string fmt17(double v);

/// Lower-case hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

/// SHA-256 of a file's contents; throws Io when unreadable.
std::string sha256_file(const std::filesystem::path& path);

} // namespace slowres
