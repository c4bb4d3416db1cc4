#include "doctest.h"

#include <filesystem>
#include <set>

#include "plab/io_util.hpp"
#include "plab/tasks.hpp"

using namespace plab;

namespace {

Vocab small_vocab() {
    return Vocab::build({"alpha", "beta", "gamma", "delta", "eps", "zeta", "subj"});
}

Template disc_template(const std::string& rel, std::vector<std::string> tokens) {
    Template t;
    t.id = rel + ":m_disc:t";
    t.relation_id = rel;
    t.type = PromptType::m_disc;
    t.payload_tokens = std::move(tokens);
    t.method = "test";
    return t;
}

} // namespace

TEST_CASE("instantiate concatenates subject and payload") {
    Vocab vocab = small_vocab();

    SUBCASE("empty template gives subject only") {
        Template t;
        t.id = "P00:human:0";
        t.relation_id = "P00";
        t.type = PromptType::human;
        MixedSequence seq = instantiate(t, "subj", vocab);
        CHECK(seq.length() == 1);
        CHECK(seq.elems[0].token == vocab.id("subj"));
    }

    SUBCASE("five discrete tokens plus one-token subject gives length six") {
        Template t = disc_template("P00", {"alpha", "beta", "gamma", "delta", "eps"});
        MixedSequence seq = instantiate(t, "subj", vocab);
        CHECK(seq.length() == 6);
        CHECK(seq.elems[0].token == vocab.id("subj"));
        CHECK(seq.elems[5].token == vocab.id("eps"));
    }

    SUBCASE("continuous template mixes one token id and five raw vectors") {
        Template t;
        t.id = "P00:m_cont:s0";
        t.relation_id = "P00";
        t.type = PromptType::m_cont;
        t.payload_vectors = Mat<float>(5, 8);
        for (int r = 0; r < 5; ++r) {
            for (int c = 0; c < 8; ++c) {
                t.payload_vectors.at(r, c) = float(r * 8 + c) * 0.01f;
            }
        }
        MixedSequence seq = instantiate(t, "subj", vocab);
        REQUIRE(seq.length() == 6);
        CHECK(seq.elems[0].is_token());
        for (int r = 1; r <= 5; ++r) {
            REQUIRE_FALSE(seq.elems[size_t(r)].is_token());
            CHECK(seq.elems[size_t(r)].vec.size() == 8);
            CHECK(seq.elems[size_t(r)].vec[3] ==
                  doctest::Approx(double(t.payload_vectors.at(r - 1, 3))));
        }
    }

    SUBCASE("unknown subject raises a vocabulary error") {
        Template t = disc_template("P00", {"alpha"});
        try {
            instantiate(t, "nosuchtoken", vocab);
            FAIL("expected vocab error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::vocab);
        }
    }
}

TEST_CASE("filter_templates keeps tasks where every type clears the threshold") {
    // synthetic accuracy table over two tasks and all three types
    std::vector<Template> templates;
    std::map<std::string, double> acc;
    auto add = [&](const std::string& rel, PromptType type, const std::string& tag, double a) {
        Template t;
        t.id = rel + ":" + prompt_type_name(type) + ":" + tag;
        t.relation_id = rel;
        t.type = type;
        if (type == PromptType::m_cont) {
            t.payload_vectors = Mat<float>(5, 4);
        } else {
            t.payload_tokens = {"alpha", "beta", "gamma", "delta", "eps"};
        }
        templates.push_back(t);
        acc[t.id] = a;
    };

    // task A: all types have a passing template
    add("A", PromptType::human, "0", 0.35);
    add("A", PromptType::human, "1", 0.05);
    add("A", PromptType::m_disc, "0", 0.12);
    add("A", PromptType::m_cont, "0", 0.80);
    // task B: m_disc tops out exactly at the threshold -> dropped (strict >)
    add("B", PromptType::human, "0", 0.50);
    add("B", PromptType::m_disc, "0", 0.10);
    add("B", PromptType::m_cont, "0", 0.90);

    auto accuracy = [&](const Template& t) { return acc.at(t.id); };

    FilterResult res = filter_templates(templates, accuracy, 0.10);
    CHECK(res.retained_task_ids == std::vector<std::string>{"A"});
    CHECK(res.retained.size() == 3); // A:human:0, A:m_disc:0, A:m_cont:0
    for (const auto& t : res.retained) {
        CHECK(t.relation_id == "A");
        CHECK(acc.at(t.id) > 0.10);
    }
    CHECK(res.avg_templates_per_task.at(PromptType::human) == doctest::Approx(1.0));

    SUBCASE("all templates at zero accuracy retain nothing") {
        auto zero = [](const Template&) { return 0.0; };
        FilterResult empty = filter_templates(templates, zero, 0.10);
        CHECK(empty.retained.empty());
        CHECK(empty.retained_task_ids.empty());
    }

    SUBCASE("raising the threshold never adds tasks") {
        for (double th : {0.0, 0.05, 0.11, 0.3, 0.5, 0.85}) {
            FilterResult lo = filter_templates(templates, accuracy, th);
            FilterResult hi = filter_templates(templates, accuracy, th + 0.1);
            std::set<std::string> lo_tasks(lo.retained_task_ids.begin(),
                                           lo.retained_task_ids.end());
            for (const auto& id : hi.retained_task_ids) {
                CHECK(lo_tasks.count(id) == 1);
            }
        }
    }
}

TEST_CASE("filter matches a brute-force reference on a synthetic table") {
    // mixed accuracies, brute force computed by hand below
    std::vector<Template> templates;
    std::map<std::string, double> acc;
    Rng rng(321);
    for (const std::string rel : {"P00", "P01", "P02", "P03"}) {
        for (PromptType type : kAllPromptTypes) {
            for (int k = 0; k < 3; ++k) {
                Template t;
                t.id = rel + ":" + prompt_type_name(type) + ":" + std::to_string(k);
                t.relation_id = rel;
                t.type = type;
                if (type == PromptType::m_cont) {
                    t.payload_vectors = Mat<float>(5, 4);
                } else {
                    t.payload_tokens = {"alpha", "beta", "gamma", "delta", "eps"};
                }
                templates.push_back(t);
                acc[t.id] = rng.uniform01() * 0.4;
            }
        }
    }
    auto accuracy = [&](const Template& t) { return acc.at(t.id); };
    const double threshold = 0.10;
    FilterResult res = filter_templates(templates, accuracy, threshold);

    // brute-force reference
    std::set<std::string> expect_tasks;
    for (const std::string rel : {"P00", "P01", "P02", "P03"}) {
        bool ok = true;
        for (PromptType type : kAllPromptTypes) {
            int n = 0;
            for (const auto& t : templates) {
                if (t.relation_id == rel && t.type == type && acc.at(t.id) > threshold) {
                    ++n;
                }
            }
            ok = ok && n > 0;
        }
        if (ok) {
            expect_tasks.insert(rel);
        }
    }
    std::set<std::string> got_tasks(res.retained_task_ids.begin(), res.retained_task_ids.end());
    CHECK(got_tasks == expect_tasks);
    for (const auto& t : res.retained) {
        CHECK(expect_tasks.count(t.relation_id) == 1);
        CHECK(acc.at(t.id) > threshold);
    }
    size_t expect_count = 0;
    for (const auto& t : templates) {
        expect_count += expect_tasks.count(t.relation_id) && acc.at(t.id) > threshold;
    }
    CHECK(res.retained.size() == expect_count);
}

TEST_CASE("template files round-trip including continuous payloads") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "plab_tmpl_test";
    fs::remove_all(dir);
    fs::create_directories(dir);

    std::vector<Template> templates;
    templates.push_back(disc_template("P01", {"alpha", "beta", "gamma", "delta", "eps"}));
    templates.back().seed = 5;
    templates.back().steps = 40;

    Template cont;
    cont.id = "P01:m_cont:s3";
    cont.relation_id = "P01";
    cont.type = PromptType::m_cont;
    cont.payload_vectors = Mat<float>(5, 6);
    Rng rng(4);
    cont.payload_vectors.fill_gauss(rng, 0.0, 1.0);
    cont.method = "cont_opt";
    cont.seed = 3;
    cont.steps = 200;
    templates.push_back(cont);

    write_templates(dir / "templates.tsv", templates);
    auto loaded = read_templates(dir / "templates.tsv");

    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].payload_tokens == templates[0].payload_tokens);
    CHECK(loaded[0].seed == 5);
    CHECK(loaded[1].type == PromptType::m_cont);
    CHECK(loaded[1].payload_vectors.rows == 5);
    CHECK(loaded[1].payload_vectors.data == cont.payload_vectors.data); // f32 exact
    CHECK(loaded[1].steps == 200);

    fs::remove_all(dir);
}

TEST_CASE("triplet files round-trip") {
    namespace fs = std::filesystem;
    const fs::path path = fs::temp_directory_path() / "plab_triplets_test.tsv";
    std::vector<Triplet> triplets = {{"P00", "velar", "mozia"}, {"P01", "kinel", "darun"}};
    write_triplets(path, triplets);
    CHECK(read_triplets(path) == triplets);
    fs::remove(path);
}
