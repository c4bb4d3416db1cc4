#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "plab/diagnostics.hpp"
#include "t2_fixture.hpp"

using namespace plab;

TEST_CASE("quantile CI: hand values, degeneracy, order invariance, oracle") {
    SUBCASE("constant scores collapse to the point") {
        std::vector<double> scores(12, 7.0);
        const Ci ci = quantile_ci(scores);
        CHECK(ci.lo == 7.0);
        CHECK(ci.hi == 7.0);
    }
    SUBCASE("scores 1..100 give [3.475, 97.525] under linear interpolation") {
        std::vector<double> scores;
        for (int i = 1; i <= 100; ++i) {
            scores.push_back(double(i));
        }
        const Ci ci = quantile_ci(scores);
        CHECK(ci.lo == doctest::Approx(3.475).epsilon(1e-12));
        CHECK(ci.hi == doctest::Approx(97.525).epsilon(1e-12));
    }
    SUBCASE("single score degenerates to the point") {
        const Ci ci = quantile_ci({4.25});
        CHECK(ci.lo == 4.25);
        CHECK(ci.hi == 4.25);
    }
    SUBCASE("permutation of input order changes nothing") {
        Rng rng(5);
        std::vector<double> scores;
        for (int i = 0; i < 37; ++i) {
            scores.push_back(rng.gauss(3.0, 2.0));
        }
        const Ci a = quantile_ci(scores);
        std::vector<double> shuffled = scores;
        rng.shuffle(shuffled);
        const Ci b = quantile_ci(shuffled);
        CHECK(a.lo == b.lo);
        CHECK(a.hi == b.hi);
    }
    SUBCASE("matches the index-arithmetic oracle on random lists") {
        Rng rng(11);
        for (int k = 0; k < 300; ++k) {
            const int n = 1 + rng.index(40);
            std::vector<double> values(static_cast<size_t>(n));
            for (auto& v : values) {
                v = rng.gauss(0.0, 10.0);
            }
            for (double q : {0.025, 0.5, 0.975, 0.2}) {
                const double got = quantile_linear(values, q);
                const double want = oracle::quantile(values, q);
                CHECK(oracle::relative_error(got, want) < 1e-12);
            }
        }
    }
}

TEST_CASE("bootstrap CI: determinism, collapse, bracketing") {
    std::vector<double> items = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    const IndexStat mean_stat = [&](const std::vector<size_t>& idx) {
        double s = 0.0;
        for (size_t i : idx) {
            s += items[i];
        }
        return s / double(idx.size());
    };

    SUBCASE("fixed seed twice is bit-identical") {
        const BootstrapCi a = bootstrap_ci(mean_stat, items.size(), 99);
        const BootstrapCi b = bootstrap_ci(mean_stat, items.size(), 99);
        CHECK(a.lo == b.lo);
        CHECK(a.hi == b.hi);
        CHECK(a.resamples == b.resamples);
    }
    SUBCASE("mean of 1..10: CI brackets 5.5 inside [1, 10]") {
        const BootstrapCi ci = bootstrap_ci(mean_stat, items.size(), 7);
        CHECK(ci.lo < 5.5);
        CHECK(ci.hi > 5.5);
        CHECK(ci.lo >= 1.0);
        CHECK(ci.hi <= 10.0);
        CHECK(ci.resamples >= 400); // at least one doubling round happened
    }
    SUBCASE("single item collapses to the point statistic") {
        std::vector<double> one = {42.0};
        const IndexStat stat = [&](const std::vector<size_t>& idx) { return one[idx[0]]; };
        const BootstrapCi ci = bootstrap_ci(stat, 1, 3);
        CHECK(ci.lo == 42.0);
        CHECK(ci.hi == 42.0);
    }
    SUBCASE("resample count stays within the cap") {
        // high-variance statistic to force many rounds
        const IndexStat noisy = [&](const std::vector<size_t>& idx) {
            double s = 1.0;
            for (size_t i : idx) {
                s *= 1.0 + items[i];
            }
            return std::fmod(s, 17.0);
        };
        const BootstrapCi ci = bootstrap_ci(noisy, items.size(), 13);
        CHECK(ci.resamples <= 51200);
    }
}

TEST_CASE("pearson correlation basics") {
    SUBCASE("a statistic against itself correlates at 1") {
        std::vector<double> xs = {1.0, 2.5, 3.0, 4.7, 5.2, 6.0};
        const PearsonResult pr = pearson(xs, xs);
        CHECK(pr.defined);
        CHECK(pr.r == doctest::Approx(1.0));
        CHECK(pr.p_value < 1e-6);
    }
    SUBCASE("a constant axis is undefined") {
        std::vector<double> xs = {1.0, 2.0, 3.0, 4.0};
        std::vector<double> ys(4, 3.3);
        CHECK_FALSE(pearson(xs, ys).defined);
    }
    SUBCASE("fewer than three pairs is undefined") {
        CHECK_FALSE(pearson({1.0, 2.0}, {2.0, 1.0}).defined);
    }
    SUBCASE("two-sided t p-value matches the classic table value") {
        // t = 2.086 at 20 degrees of freedom is the 5% two-sided critical value
        CHECK(student_t_two_sided_p(2.086, 20) == doctest::Approx(0.05).epsilon(2e-3));
        CHECK(student_t_two_sided_p(0.0, 20) == doctest::Approx(1.0));
        CHECK(student_t_two_sided_p(50.0, 20) < 1e-10);
    }
    SUBCASE("anticorrelated data gives r near -1") {
        std::vector<double> xs, ys;
        Rng rng(3);
        for (int i = 0; i < 50; ++i) {
            const double v = rng.gauss();
            xs.push_back(v);
            ys.push_back(-2.0 * v + 1e-3 * rng.gauss());
        }
        const PearsonResult pr = pearson(xs, ys);
        CHECK(pr.r < -0.999);
        CHECK(pr.p_value < 1e-12);
    }
}

TEST_CASE("correlation table renders the reference Table-2 cell") {
    // frozen fixture: 44 relations x 6 human templates, correlated pair stats
    const auto pairs = t2fix::make_pairs(44, 6, 0.54, 2);
    const auto cells = correlation_table(pairs, {}, 77);

    const CorrelationCell* cell = nullptr;
    for (const auto& c : cells) {
        if (c.comparison == "human_vs_human" && c.axes == "input_vs_output") {
            cell = &c;
        }
    }
    REQUIRE(cell != nullptr);
    CHECK(cell->defined);
    CHECK(std::round(cell->r * 100.0) / 100.0 == doctest::Approx(0.53));
    CHECK(std::round(cell->ci.lo * 100.0) / 100.0 == doctest::Approx(0.43));
    CHECK(std::round(cell->ci.hi * 100.0) / 100.0 == doctest::Approx(0.62));
    CHECK(cell->p_value < 0.01); // significant, as in the reference table
    CHECK(cell->n_pairs == 44 * 15);
}

TEST_CASE("correlation table flags undefined cells") {
    // duplicate one statistic as both axes -> r = 1; constant axis -> undefined
    std::vector<PairStat> pairs;
    Rng rng(8);
    for (int r = 0; r < 4; ++r) {
        const std::string rel = "R" + std::to_string(r);
        for (int i = 0; i < 3; ++i) {
            for (int j = i + 1; j < 3; ++j) {
                PairStat ps;
                ps.relation_id = rel;
                ps.id_a = rel + ":m_disc:" + std::to_string(i);
                ps.id_b = rel + ":m_disc:" + std::to_string(j);
                ps.type_a = ps.type_b = PromptType::m_disc;
                const double v = rng.uniform01();
                ps.input_similarity = v;
                ps.output_agreement = v;  // identical axis -> r = 1
                ps.activation_overlap = 0.25; // constant -> undefined
                pairs.push_back(ps);
            }
        }
    }
    const auto cells = correlation_table(pairs, {}, 5);
    for (const auto& c : cells) {
        if (c.comparison != "m_disc_vs_m_disc") {
            CHECK_FALSE(c.defined); // no pairs for other sets
            continue;
        }
        if (c.axes == "input_vs_output") {
            CHECK(c.defined);
            CHECK(c.r == doctest::Approx(1.0));
        } else {
            CHECK_FALSE(c.defined); // activation overlap is constant
        }
    }
}

TEST_CASE("type-pair matrix means and self-set behavior") {
    std::vector<PairStat> pairs;
    auto add = [&](const std::string& rel, const std::string& a, PromptType ta,
                   const std::string& b, PromptType tb, double overlap) {
        PairStat ps;
        ps.relation_id = rel;
        ps.id_a = a;
        ps.id_b = b;
        ps.type_a = ta;
        ps.type_b = tb;
        ps.input_similarity = 0.5;
        ps.output_agreement = 0.5;
        ps.activation_overlap = overlap;
        pairs.push_back(ps);
    };
    // within human overlap high, cross overlap low
    add("R0", "R0:h:0", PromptType::human, "R0:h:1", PromptType::human, 0.8);
    add("R0", "R0:h:0", PromptType::human, "R0:c:0", PromptType::m_cont, 0.2);
    add("R0", "R0:h:1", PromptType::human, "R0:c:0", PromptType::m_cont, 0.3);
    add("R1", "R1:h:0", PromptType::human, "R1:h:1", PromptType::human, 0.6);

    const auto cells = type_pair_matrix(pairs, {}, PairStatKind::activation_overlap, 3);
    auto find = [&](PromptType a, PromptType b) -> const TypePairCell& {
        for (const auto& c : cells) {
            if (c.type_a == a && c.type_b == b) {
                return c;
            }
        }
        FAIL("missing cell");
        return cells.front();
    };
    CHECK(find(PromptType::human, PromptType::human).mean == doctest::Approx(0.7));
    CHECK(find(PromptType::human, PromptType::m_cont).mean == doctest::Approx(0.25));
    CHECK(find(PromptType::human, PromptType::m_cont).n_pairs == 2);
    CHECK(find(PromptType::m_disc, PromptType::m_disc).n_pairs == 0);
}
