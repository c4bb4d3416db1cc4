#include "plab/config_file.hpp"

#include "plab/errors.hpp"
#include "plab/io_util.hpp"

namespace plab {

namespace {

std::string trim(std::string s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.erase(s.begin());
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.pop_back();
    }
    return s;
}

} // namespace

ConfigFile ConfigFile::parse(const std::string& text) {
    ConfigFile cfg;
    std::string section = "run";
    size_t start = 0;
    while (start <= text.size()) {
        size_t end = text.find('\n', start);
        if (end == std::string::npos) {
            end = text.size();
        }
        std::string line = trim(text.substr(start, end - start));
        start = end + 1;
        if (line.empty() || line[0] == '#' || line[0] == ';') {
            continue;
        }
        if (line.front() == '[') {
            require(line.back() == ']', ErrorKind::config, "malformed section header: " + line);
            section = trim(line.substr(1, line.size() - 2));
            require(!section.empty(), ErrorKind::config, "empty section name");
            continue;
        }
        const size_t eq = line.find('=');
        require(eq != std::string::npos, ErrorKind::config, "malformed config line: " + line);
        cfg.sections_[section][trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return cfg;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
    return parse(read_text_file(path));
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
    auto it = sections_.find(section);
    return it != sections_.end() && it->second.count(key) != 0;
}

std::string ConfigFile::get(const std::string& section, const std::string& key,
                            const std::string& fallback) const {
    auto it = sections_.find(section);
    if (it == sections_.end()) {
        return fallback;
    }
    auto kt = it->second.find(key);
    return kt == it->second.end() ? fallback : kt->second;
}

int ConfigFile::get_int(const std::string& section, const std::string& key, int fallback) const {
    const std::string v = get(section, key, "");
    return v.empty() ? fallback : std::stoi(v);
}

double ConfigFile::get_double(const std::string& section, const std::string& key,
                              double fallback) const {
    const std::string v = get(section, key, "");
    return v.empty() ? fallback : std::stod(v);
}

uint64_t ConfigFile::get_u64(const std::string& section, const std::string& key,
                             uint64_t fallback) const {
    const std::string v = get(section, key, "");
    return v.empty() ? fallback : std::stoull(v);
}

bool ConfigFile::get_bool(const std::string& section, const std::string& key,
                          bool fallback) const {
    const std::string v = get(section, key, "");
    if (v.empty()) {
        return fallback;
    }
    if (v == "true" || v == "1" || v == "yes" || v == "on") {
        return true;
    }
    if (v == "false" || v == "0" || v == "no" || v == "off") {
        return false;
    }
    fail(ErrorKind::config, "not a boolean: " + section + "." + key + " = " + v);
}

void ConfigFile::set(const std::string& section, const std::string& key,
                     const std::string& value) {
    sections_[section][key] = value;
}

void ConfigFile::set_dotted(const std::string& assignment) {
    const size_t eq = assignment.find('=');
    require(eq != std::string::npos, ErrorKind::config,
            "expected section.key=value, got: " + assignment);
    const std::string path = trim(assignment.substr(0, eq));
    const size_t dot = path.find('.');
    require(dot != std::string::npos && dot > 0 && dot + 1 < path.size(), ErrorKind::config,
            "expected section.key=value, got: " + assignment);
    set(path.substr(0, dot), path.substr(dot + 1), trim(assignment.substr(eq + 1)));
}

std::string ConfigFile::serialize() const {
    std::string out;
    for (const auto& [section, kv] : sections_) {
        out += "[" + section + "]\n";
        for (const auto& [key, value] : kv) {
            out += key + " = " + value + "\n";
        }
    }
    return out;
}

} // namespace plab
