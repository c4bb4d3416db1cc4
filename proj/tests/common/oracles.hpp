#pragma once

// Brute-force reference implementations, written independently of the library
// paths they check. Each favors a different algorithm or accumulation order
// than the production code.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "plab/model.hpp"

namespace oracle {

// entropy by direct summation in long double, high-index-first order
inline double entropy_nats(const std::vector<double>& dist) {
    long double h = 0.0L;
    for (size_t i = dist.size(); i-- > 0;) {
        const long double p = dist[i];
        if (p > 0.0L) {
            h -= p * std::log(p);
        }
    }
    return double(h);
}

// perplexity via naive (unshifted) softmax per position, long double sums
inline double sequence_perplexity(const plab::Parameters<float>& params,
                                  const std::vector<int>& token_seq) {
    plab::Workspace<float> ws;
    plab::MixedSequence seq = plab::MixedSequence::from_tokens(token_seq);
    plab::forward_ws(params, seq, ws);
    long double nll = 0.0L;
    const int n = seq.length() - 1;
    for (int t = 0; t < n; ++t) {
        const float* logits = ws.logits.row(t);
        long double denom = 0.0L;
        for (int v = 0; v < params.config.vocab_size; ++v) {
            denom += std::exp((long double)(logits[v]));
        }
        const long double p = std::exp((long double)(logits[token_seq[size_t(t + 1)]])) / denom;
        nll -= std::log(p);
    }
    return double(std::exp(nll / (long double)(n)));
}

// IoU by explicit set construction
inline double iou(const std::vector<uint8_t>& a, const std::vector<uint8_t>& b) {
    std::vector<size_t> set_a, set_b;
    for (size_t i = 0; i < a.size(); ++i) {
        if (a[i]) {
            set_a.push_back(i);
        }
    }
    for (size_t i = 0; i < b.size(); ++i) {
        if (b[i]) {
            set_b.push_back(i);
        }
    }
    std::vector<size_t> inter, uni;
    std::set_intersection(set_a.begin(), set_a.end(), set_b.begin(), set_b.end(),
                          std::back_inserter(inter));
    std::set_union(set_a.begin(), set_a.end(), set_b.begin(), set_b.end(),
                   std::back_inserter(uni));
    if (uni.empty()) {
        return 1.0;
    }
    return double(inter.size()) / double(uni.size());
}

// attention spread by greedy smallest-first dropping: keep dropping the
// smallest entry while the kept mass stays >= 0.90
inline double attention_row_spread_pct(const std::vector<double>& row) {
    std::vector<double> sorted = row;
    std::sort(sorted.begin(), sorted.end()); // ascending
    double kept = 0.0;
    for (double v : sorted) {
        kept += v;
    }
    size_t dropped = 0;
    for (const double v : sorted) {
        if (kept - v >= 0.90) {
            kept -= v;
            ++dropped;
        } else {
            break;
        }
    }
    const size_t count = sorted.size() - dropped;
    return 100.0 * double(count) / double(row.size());
}

// LMI from scratch: every probability recomputed from redundant count passes
struct LmiOracleEntry {
    std::string item;
    double lmi;
};

inline std::vector<LmiOracleEntry> lmi_for_type(
    const std::map<std::string, std::map<std::string, int>>& lists, const std::string& type) {
    double grand = 0.0;
    for (const auto& [t, counts] : lists) {
        for (const auto& [v, n] : counts) {
            grand += n;
        }
    }
    std::vector<LmiOracleEntry> out;
    for (const auto& [v, n] : lists.at(type)) {
        if (n == 0) {
            out.push_back({v, 0.0});
            continue;
        }
        double v_total = 0.0;
        for (const auto& [t2, counts2] : lists) {
            auto it = counts2.find(v);
            v_total += it == counts2.end() ? 0.0 : double(it->second);
        }
        double t_total = 0.0;
        for (const auto& [v2, n2] : lists.at(type)) {
            t_total += n2;
        }
        const double p_vt = double(n) / grand;
        const double p_v = v_total / grand;
        const double p_t = t_total / grand;
        out.push_back({v, double(n) * std::log(p_vt / (p_v * p_t))});
    }
    return out;
}

// quantile with explicit integer index arithmetic (R-7 / numpy linear)
inline double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    if (n == 1) {
        return v[0];
    }
    const double pos = q * double(n - 1);
    const size_t k = size_t(pos);
    const double d = pos - double(k);
    if (k + 1 >= n) {
        return v[n - 1];
    }
    return v[k] * (1.0 - d) + v[k + 1] * d;
}

inline double relative_error(double a, double b) {
    const double denom = std::max(std::abs(a), std::abs(b));
    if (denom == 0.0) {
        return 0.0;
    }
    return std::abs(a - b) / denom;
}

} // namespace oracle
