#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "plab/mat.hpp"

namespace plab {

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

std::vector<std::string> read_lines(const std::filesystem::path& path);

// Split on any run of whitespace; never produces empty fields.
std::vector<std::string> split_ws(const std::string& line);
std::vector<std::string> split_char(const std::string& line, char sep);

std::string lowercase(std::string s);
std::string strip_leading_space(std::string s);

// Continuous-payload file: one ASCII header line "N d\n" followed by
// N*d little-endian 32-bit floats, row-major.
void write_vector_file(const std::filesystem::path& path, const Mat<float>& vectors);
Mat<float> read_vector_file(const std::filesystem::path& path);

void append_f32_le(std::string& out, const float* values, size_t count);
void read_f32_le(const std::string& bytes, size_t offset, float* values, size_t count);

// Fixed decimal formatting used by every report writer so that reruns are
// byte-identical. %.6g keeps short decimals short (29.5 prints as "29.5").
std::string fmt_g6(double v);
std::string fmt_g17(double v);

} // namespace plab
