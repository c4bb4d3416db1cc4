#include "plab/vocab.hpp"

#include <algorithm>
#include <set>

#include "plab/errors.hpp"
#include "plab/io_util.hpp"

namespace plab {

Vocab Vocab::build(const std::vector<std::string>& tokens) {
    std::set<std::string> unique(tokens.begin(), tokens.end());
    unique.erase(kBos);
    unique.erase(kFill);

    Vocab v;
    v.id_to_token_.push_back(kBos);
    v.id_to_token_.push_back(kFill);
    v.id_to_token_.insert(v.id_to_token_.end(), unique.begin(), unique.end());
    v.index_();
    return v;
}

Vocab Vocab::load(const std::filesystem::path& path) {
    Vocab v;
    v.id_to_token_ = read_lines(path);
    while (!v.id_to_token_.empty() && v.id_to_token_.back().empty()) {
        v.id_to_token_.pop_back();
    }
    require(!v.id_to_token_.empty(), ErrorKind::io, "empty vocab file: " + path.string());
    v.index_();
    return v;
}

void Vocab::save(const std::filesystem::path& path) const {
    std::string out;
    for (const auto& t : id_to_token_) {
        out += t;
        out += '\n';
    }
    write_text_file(path, out);
}

void Vocab::index_() {
    token_to_id_.clear();
    for (int i = 0; i < int(id_to_token_.size()); ++i) {
        auto [it, inserted] = token_to_id_.emplace(id_to_token_[i], i);
        require(inserted, ErrorKind::data, "duplicate token in vocab: " + id_to_token_[i]);
    }
    bos_id_ = contains(kBos) ? token_to_id_.at(kBos) : -1;
    fill_id_ = contains(kFill) ? token_to_id_.at(kFill) : -1;
}

int Vocab::id(const std::string& token) const {
    auto it = token_to_id_.find(token);
    require(it != token_to_id_.end(), ErrorKind::vocab, "token not in vocabulary: " + token);
    return it->second;
}

const std::string& Vocab::token(int id) const {
    require(id >= 0 && id < size(), ErrorKind::vocab, "token id out of range");
    return id_to_token_[size_t(id)];
}

std::vector<int> Vocab::encode(const std::vector<std::string>& tokens) const {
    std::vector<int> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) {
        out.push_back(id(t));
    }
    return out;
}

std::vector<int> Vocab::encode_line(const std::string& line) const {
    return encode(split_ws(line));
}

} // namespace plab
