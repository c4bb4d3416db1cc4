#include "plab/checkpoint.hpp"

#include <map>

#include "plab/hash.hpp"
#include "plab/io_util.hpp"

namespace plab {

static std::string serialize(const Parameters<float>& params) {
    const ModelConfig& c = params.config;
    int tensor_count = 0;
    for_each_tensor(params, [&](const char*, const Mat<float>&) { ++tensor_count; });

    std::string out;
    out += "plab-checkpoint v1\n";
    out += "num_layers = " + std::to_string(c.num_layers) + "\n";
    out += "num_heads = " + std::to_string(c.num_heads) + "\n";
    out += "model_dim = " + std::to_string(c.model_dim) + "\n";
    out += "ff_dim = " + std::to_string(c.ff_dim) + "\n";
    out += "vocab_size = " + std::to_string(c.vocab_size) + "\n";
    out += "context_length = " + std::to_string(c.context_length) + "\n";
    out += std::string("nonlinearity = ") + nonlinearity_name(c.nonlinearity) + "\n";
    out += "tensors = " + std::to_string(tensor_count) + "\n";
    out += "end-header\n";

    for_each_tensor(params, [&](const char*, const Mat<float>& m) {
        append_f32_le(out, m.data.data(), m.size());
    });
    return out;
}

void save_checkpoint(const std::filesystem::path& path, const Parameters<float>& params) {
    write_text_file(path, serialize(params));
}

Parameters<float> load_checkpoint(const std::filesystem::path& path) {
    const std::string bytes = read_text_file(path);

    size_t offset = 0;
    auto next_line = [&]() {
        size_t nl = bytes.find('\n', offset);
        require(nl != std::string::npos, ErrorKind::io, "truncated checkpoint header");
        std::string line = bytes.substr(offset, nl - offset);
        offset = nl + 1;
        return line;
    };

    require(next_line() == "plab-checkpoint v1", ErrorKind::io,
            "not a plab checkpoint: " + path.string());

    std::map<std::string, std::string> kv;
    while (true) {
        std::string line = next_line();
        if (line == "end-header") {
            break;
        }
        size_t eq = line.find('=');
        require(eq != std::string::npos, ErrorKind::io, "malformed checkpoint header line: " + line);
        auto trim = [](std::string s) {
            while (!s.empty() && s.front() == ' ') s.erase(s.begin());
            while (!s.empty() && s.back() == ' ') s.pop_back();
            return s;
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }

    ModelConfig cfg;
    cfg.num_layers = std::stoi(kv.at("num_layers"));
    cfg.num_heads = std::stoi(kv.at("num_heads"));
    cfg.model_dim = std::stoi(kv.at("model_dim"));
    cfg.ff_dim = std::stoi(kv.at("ff_dim"));
    cfg.vocab_size = std::stoi(kv.at("vocab_size"));
    cfg.context_length = std::stoi(kv.at("context_length"));
    cfg.nonlinearity = nonlinearity_from_name(kv.at("nonlinearity"));

    Parameters<float> params = Parameters<float>::zeros(cfg);
    for_each_tensor(params, [&](const char* name, Mat<float>& m) {
        require(offset + 4 * m.size() <= bytes.size(), ErrorKind::io,
                std::string("checkpoint payload truncated at tensor ") + name);
        read_f32_le(bytes, offset, m.data.data(), m.size());
        offset += 4 * m.size();
    });
    require(offset == bytes.size(), ErrorKind::io, "checkpoint has trailing bytes");
    return params;
}

uint64_t checkpoint_hash(const Parameters<float>& params) {
    return fnv1a(serialize(params));
}

std::string describe_checkpoint(const Parameters<float>& params) {
    const ModelConfig& c = params.config;
    std::string out;
    out += "layers=" + std::to_string(c.num_layers) + " heads=" + std::to_string(c.num_heads) +
           " d=" + std::to_string(c.model_dim) + " d_m=" + std::to_string(c.ff_dim) +
           " vocab=" + std::to_string(c.vocab_size) + " ctx=" + std::to_string(c.context_length) +
           " f=" + nonlinearity_name(c.nonlinearity) + "\n";
    out += "parameters=" + std::to_string(num_parameters(params)) + "\n";
    out += "hash=" + hash_hex(checkpoint_hash(params)) + "\n";
    for_each_tensor(params, [&](const char* name, const Mat<float>& m) {
        double lo = m.data.empty() ? 0.0 : m.data[0];
        double hi = lo;
        double sumsq = 0.0;
        for (float v : m.data) {
            lo = std::min(lo, double(v));
            hi = std::max(hi, double(v));
            sumsq += double(v) * double(v);
        }
        const double rms = m.data.empty() ? 0.0 : std::sqrt(sumsq / double(m.size()));
        out += std::string(name) + " [" + std::to_string(m.rows) + "x" + std::to_string(m.cols) +
               "] min=" + fmt_g6(lo) + " max=" + fmt_g6(hi) + " rms=" + fmt_g6(rms) + "\n";
    });
    return out;
}

} // namespace plab
