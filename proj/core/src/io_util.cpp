#include "plab/io_util.hpp"

#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "plab/errors.hpp"

namespace plab {

static_assert(sizeof(float) == 4, "requires 32-bit IEEE float");

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.is_open(), ErrorKind::io, "cannot open " + path.string());
    std::string out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    require(!in.bad(), ErrorKind::io, "read failed for " + path.string());
    return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.is_open(), ErrorKind::io, "cannot create " + path.string());
    out.write(content.data(), std::streamsize(content.size()));
    require(out.good(), ErrorKind::io, "write failed for " + path.string());
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::string text = read_text_file(path);
    std::vector<std::string> lines;
    size_t start = 0;
    while (start <= text.size()) {
        size_t end = text.find('\n', start);
        if (end == std::string::npos) {
            if (start < text.size()) {
                lines.push_back(text.substr(start));
            }
            break;
        }
        std::string line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        lines.push_back(line);
        start = end + 1;
    }
    return lines;
}

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) {
            ++i;
        }
        size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) {
            ++i;
        }
        if (i > start) {
            out.push_back(line.substr(start, i - start));
        }
    }
    return out;
}

std::vector<std::string> split_char(const std::string& line, char sep) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        size_t end = line.find(sep, start);
        if (end == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, end - start));
        start = end + 1;
    }
    return out;
}

std::string lowercase(std::string s) {
    for (auto& c : s) {
        c = char(std::tolower(static_cast<unsigned char>(c)));
    }
    return s;
}

std::string strip_leading_space(std::string s) {
    size_t i = 0;
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) {
        ++i;
    }
    return s.substr(i);
}

void append_f32_le(std::string& out, const float* values, size_t count) {
    for (size_t i = 0; i < count; ++i) {
        uint32_t bits;
        std::memcpy(&bits, &values[i], 4);
        out.push_back(char(bits & 0xff));
        out.push_back(char((bits >> 8) & 0xff));
        out.push_back(char((bits >> 16) & 0xff));
        out.push_back(char((bits >> 24) & 0xff));
    }
}

void read_f32_le(const std::string& bytes, size_t offset, float* values, size_t count) {
    require(offset + 4 * count <= bytes.size(), ErrorKind::io, "truncated float payload");
    for (size_t i = 0; i < count; ++i) {
        const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + offset + 4 * i);
        uint32_t bits = uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) |
                        (uint32_t(p[3]) << 24);
        std::memcpy(&values[i], &bits, 4);
    }
}

void write_vector_file(const std::filesystem::path& path, const Mat<float>& vectors) {
    std::string out = std::to_string(vectors.rows) + " " + std::to_string(vectors.cols) + "\n";
    append_f32_le(out, vectors.data.data(), vectors.data.size());
    write_text_file(path, out);
}

Mat<float> read_vector_file(const std::filesystem::path& path) {
    std::string bytes = read_text_file(path);
    size_t nl = bytes.find('\n');
    require(nl != std::string::npos, ErrorKind::io, "vector file missing header: " + path.string());
    auto fields = split_ws(bytes.substr(0, nl));
    require(fields.size() == 2, ErrorKind::io, "vector file header must be 'N d'");
    int n = std::stoi(fields[0]);
    int d = std::stoi(fields[1]);
    require(n > 0 && d > 0, ErrorKind::io, "vector file header out of range");
    Mat<float> out(n, d);
    read_f32_le(bytes, nl + 1, out.data.data(), out.data.size());
    return out;
}

std::string fmt_g6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return std::string(buf);
}

std::string fmt_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

} // namespace plab
