#include "plab/tasks.hpp"

#include <algorithm>
#include <set>

#include "plab/io_util.hpp"

namespace plab {

PromptType prompt_type_from_name(const std::string& name) {
    if (name == "human") {
        return PromptType::human;
    }
    if (name == "m_disc") {
        return PromptType::m_disc;
    }
    if (name == "m_cont") {
        return PromptType::m_cont;
    }
    fail(ErrorKind::data, "unknown prompt type: " + name);
}

void Template::validate(int machine_template_len) const {
    if (type == PromptType::m_cont) {
        require(payload_tokens.empty(), ErrorKind::data,
                "m_cont template must not carry a token payload: " + id);
        require(payload_vectors.rows == machine_template_len, ErrorKind::data,
                "machine template " + id + " must have exactly " +
                    std::to_string(machine_template_len) + " payload positions");
    } else {
        require(payload_vectors.size() == 0, ErrorKind::data,
                "discrete template must not carry vectors: " + id);
        if (type == PromptType::m_disc) {
            require(int(payload_tokens.size()) == machine_template_len, ErrorKind::data,
                    "machine template " + id + " must have exactly " +
                        std::to_string(machine_template_len) + " payload positions");
        }
    }
}

const RelationTask& TaskData::relation(const std::string& id) const {
    for (const auto& r : relations) {
        if (r.relation_id == id) {
            return r;
        }
    }
    fail(ErrorKind::data, "unknown relation: " + id);
}

std::vector<std::string> TaskData::relation_ids() const {
    std::vector<std::string> out;
    out.reserve(relations.size());
    for (const auto& r : relations) {
        out.push_back(r.relation_id);
    }
    return out;
}

MixedSequence instantiate(const Template& tmpl, const std::string& subject, const Vocab& vocab) {
    MixedSequence seq;
    for (const auto& tok : split_ws(subject)) {
        seq.push_token(vocab.id(tok));
    }
    require(seq.length() > 0, ErrorKind::vocab, "subject tokenizes to nothing: " + subject);

    if (tmpl.type == PromptType::m_cont) {
        const Mat<float>& vs = tmpl.payload_vectors;
        for (int r = 0; r < vs.rows; ++r) {
            std::vector<double> v(vs.row(r), vs.row(r) + vs.cols);
            seq.push_vector(std::move(v));
        }
    } else {
        for (const auto& tok : tmpl.payload_tokens) {
            seq.push_token(vocab.id(tok));
        }
    }
    return seq;
}

FilterResult filter_templates(const std::vector<Template>& templates, const AccuracyFn& accuracy,
                              double threshold) {
    // accuracy per template, grouped by task
    std::map<std::string, std::vector<std::pair<const Template*, double>>> by_task;
    for (const auto& t : templates) {
        by_task[t.relation_id].emplace_back(&t, accuracy(t));
    }

    FilterResult result;
    for (const auto& [task_id, entries] : by_task) {
        std::map<PromptType, int> counts;
        for (const auto& [tmpl, acc] : entries) {
            if (acc > threshold) { // strict: exactly-at-threshold templates drop
                counts[tmpl->type] += 1;
            }
        }
        const bool keep = counts[PromptType::human] > 0 && counts[PromptType::m_disc] > 0 &&
                          counts[PromptType::m_cont] > 0;
        if (!keep) {
            continue;
        }
        result.retained_task_ids.push_back(task_id);
        result.per_task_counts[task_id] = counts;
        for (const auto& [tmpl, acc] : entries) {
            if (acc > threshold) {
                result.retained.push_back(*tmpl);
            }
        }
    }

    for (PromptType t : kAllPromptTypes) {
        double total = 0.0;
        for (const auto& [task_id, counts] : result.per_task_counts) {
            auto it = counts.find(t);
            total += it == counts.end() ? 0.0 : double(it->second);
        }
        result.avg_templates_per_task[t] =
            result.per_task_counts.empty() ? 0.0 : total / double(result.per_task_counts.size());
    }
    return result;
}

void write_triplets(const std::filesystem::path& path, const std::vector<Triplet>& triplets) {
    std::string out;
    for (const auto& t : triplets) {
        out += t.relation_id + "\t" + t.subject + "\t" + t.object + "\n";
    }
    write_text_file(path, out);
}

std::vector<Triplet> read_triplets(const std::filesystem::path& path) {
    std::vector<Triplet> out;
    for (const auto& line : read_lines(path)) {
        if (line.empty()) {
            continue;
        }
        auto fields = split_char(line, '\t');
        require(fields.size() == 3, ErrorKind::io, "malformed triplet line: " + line);
        out.push_back(Triplet{fields[0], fields[1], fields[2]});
    }
    return out;
}

void write_templates(const std::filesystem::path& path, const std::vector<Template>& templates) {
    std::string out;
    for (const auto& t : templates) {
        std::string payload;
        if (t.type == PromptType::m_cont) {
            payload = "vectors/" + t.id + ".vec";
            Mat<float> vs = t.payload_vectors;
            write_vector_file(path.parent_path() / payload, vs);
        } else {
            for (size_t i = 0; i < t.payload_tokens.size(); ++i) {
                if (i) {
                    payload += ' ';
                }
                payload += t.payload_tokens[i];
            }
        }
        out += t.id + "\t" + t.relation_id + "\t" + prompt_type_name(t.type) + "\t" + payload +
               "\t" + t.method + "\t" + std::to_string(t.seed) + "\t" + std::to_string(t.steps) +
               "\n";
    }
    write_text_file(path, out);
}

std::vector<Template> read_templates(const std::filesystem::path& path) {
    std::vector<Template> out;
    for (const auto& line : read_lines(path)) {
        if (line.empty()) {
            continue;
        }
        auto fields = split_char(line, '\t');
        require(fields.size() == 7, ErrorKind::io, "malformed template line: " + line);
        Template t;
        t.id = fields[0];
        t.relation_id = fields[1];
        t.type = prompt_type_from_name(fields[2]);
        if (t.type == PromptType::m_cont) {
            t.payload_vectors = read_vector_file(path.parent_path() / fields[3]);
        } else {
            t.payload_tokens = split_ws(fields[3]);
        }
        t.method = fields[4];
        t.seed = std::stoull(fields[5]);
        t.steps = std::stoi(fields[6]);
        out.push_back(std::move(t));
    }
    return out;
}

TaskData task_data_from_files(const std::filesystem::path& train_path,
                              const std::filesystem::path& test_path) {
    std::map<std::string, RelationTask> by_id;
    for (auto& t : read_triplets(train_path)) {
        by_id[t.relation_id].relation_id = t.relation_id;
        by_id[t.relation_id].train.push_back(std::move(t));
    }
    for (auto& t : read_triplets(test_path)) {
        by_id[t.relation_id].relation_id = t.relation_id;
        by_id[t.relation_id].test.push_back(std::move(t));
    }
    TaskData data;
    for (auto& [id, task] : by_id) {
        data.relations.push_back(std::move(task));
    }
    return data;
}

} // namespace plab
