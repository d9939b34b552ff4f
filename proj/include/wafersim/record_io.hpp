#pragma once

#include <filesystem>
#include <string>

#include "wafersim/simulator.hpp"

namespace wafersim {

/// Columns t, r, p, e, v, u, s, h1, h2, V, phase. Absent V is an empty field.
std::string record_csv(const RunRecord& record);

/// Writes to a sibling temp file then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

// Compact binary cache: arrays stored as raw host-order doubles.
std::string encode_record(const RunRecord& record);
RunRecord decode_record(const std::string& bytes);
void save_record(const RunRecord& record, const std::filesystem::path& path);
RunRecord load_record(const std::filesystem::path& path);

}  // namespace wafersim
