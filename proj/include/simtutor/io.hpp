#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

namespace simtutor {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

/// Writes via a sibling temporary file and a rename, so readers never see
/// a partially written file. Throws Error(Io) on failure and removes the
/// temporary.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json_atomic(const std::filesystem::path& path, const nlohmann::json& doc);

std::string sha256_hex(const std::string& data);

}  // namespace simtutor
