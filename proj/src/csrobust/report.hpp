#pragma once

#include <filesystem>
#include <string>

namespace csr {

// Shortest round-trip decimal form; "inf", "-inf" and "nan" for non-finite values.
std::string format_number(double v);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace csr
