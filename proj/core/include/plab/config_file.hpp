#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace plab {

// Nested key-value config with [section] headers. Every science parameter of
// the pipeline lives here; CLI flags override individual keys.
class ConfigFile {
  public:
    ConfigFile() = default;

    static ConfigFile parse(const std::string& text);
    static ConfigFile load(const std::filesystem::path& path);

    bool has(const std::string& section, const std::string& key) const;

    std::string get(const std::string& section, const std::string& key,
                    const std::string& fallback) const;
    int get_int(const std::string& section, const std::string& key, int fallback) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    uint64_t get_u64(const std::string& section, const std::string& key, uint64_t fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;

    void set(const std::string& section, const std::string& key, const std::string& value);
    // "section.key=value" as passed on the command line
    void set_dotted(const std::string& assignment);

    std::string serialize() const;

  private:
    std::map<std::string, std::map<std::string, std::string>> sections_;
};

} // namespace plab
