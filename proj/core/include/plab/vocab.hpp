#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace plab {

// Whitespace word-level vocabulary. Ids are assigned once at build time:
// specials first, then remaining tokens in lexicographic order, so argmax
// tie-breaks on "lowest id" are stable across runs and machines.
class Vocab {
  public:
    static constexpr const char* kBos = "<bos>";
    static constexpr const char* kFill = "<fill>";

    Vocab() = default;

    // builds from a token multiset (specials are added automatically)
    static Vocab build(const std::vector<std::string>& tokens);

    static Vocab load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    int size() const { return int(id_to_token_.size()); }
    int bos_id() const { return bos_id_; }
    int fill_id() const { return fill_id_; }

    bool contains(const std::string& token) const { return token_to_id_.count(token) != 0; }

    // throws ErrorKind::vocab on unknown token
    int id(const std::string& token) const;
    const std::string& token(int id) const;

    std::vector<int> encode(const std::vector<std::string>& tokens) const;
    std::vector<int> encode_line(const std::string& line) const;

  private:
    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, int> token_to_id_;
    int bos_id_ = -1;
    int fill_id_ = -1;

    void index_();
};

} // namespace plab
