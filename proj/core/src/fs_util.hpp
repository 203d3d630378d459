#pragma once

#include <filesystem>
#include <string_view>

namespace flowsynth::detail {

/// Writes `bytes` to a uniquely named sibling temp file and renames it over
/// `path`, so readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace flowsynth::detail
