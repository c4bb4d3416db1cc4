#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "plab/errors.hpp"
#include "plab/mat.hpp"
#include "plab/rng.hpp"

namespace plab {

// ---------------------------------------------------------------------------
// Minimal instrumented autoregressive transformer.
//
// Pre-norm blocks, learned positional embeddings, untied output head.
// The feed-forward block is written in key/value form: the intermediate
// activations u = f(x K^T + b_K) are the "units" every analysis module reads,
// and the block output is reconstructable as u V + b_V.
//
// Everything is templated on the scalar type: float is the working precision,
// double is used by the gradient-check path.
// ---------------------------------------------------------------------------

enum class Nonlinearity { relu, gelu };

inline const char* nonlinearity_name(Nonlinearity f) {
    return f == Nonlinearity::relu ? "relu" : "gelu";
}

inline Nonlinearity nonlinearity_from_name(const std::string& name) {
    if (name == "relu") {
        return Nonlinearity::relu;
    }
    if (name == "gelu") {
        return Nonlinearity::gelu;
    }
    fail(ErrorKind::config, "unknown nonlinearity: " + name);
}

struct ModelConfig {
    int num_layers = 2;
    int num_heads = 4;
    int model_dim = 64;       // d
    int ff_dim = 256;         // d_m
    int vocab_size = 0;
    int context_length = 24;
    Nonlinearity nonlinearity = Nonlinearity::relu;

    int head_dim() const { return model_dim / num_heads; }

    void validate() const {
        require(num_layers >= 1, ErrorKind::config, "num_layers must be >= 1");
        require(num_heads >= 1, ErrorKind::config, "num_heads must be >= 1");
        require(model_dim >= 1 && model_dim % num_heads == 0, ErrorKind::config,
                "model_dim must be divisible by num_heads");
        require(ff_dim >= model_dim, ErrorKind::config, "ff_dim must be >= model_dim");
        require(vocab_size >= 2, ErrorKind::config, "vocab_size must be >= 2");
        require(context_length >= 2, ErrorKind::config, "context_length must be >= 2");
    }

    bool operator==(const ModelConfig&) const = default;
};

// Input element: a vocabulary token id, or a raw d-dimensional vector for
// continuous prompt positions. Vectors are held in double and cast to the
// model scalar on use.
struct MixedElem {
    int token = -1;
    std::vector<double> vec;

    bool is_token() const { return token >= 0; }
};

struct MixedSequence {
    std::vector<MixedElem> elems;

    static MixedSequence from_tokens(const std::vector<int>& ids) {
        MixedSequence s;
        s.elems.reserve(ids.size());
        for (int id : ids) {
            s.push_token(id);
        }
        return s;
    }

    void push_token(int id) { elems.push_back(MixedElem{id, {}}); }
    void push_vector(std::vector<double> v) { elems.push_back(MixedElem{-1, std::move(v)}); }

    int length() const { return int(elems.size()); }
};

struct CaptureFlags {
    bool attention = true;
    bool units = true;
    bool hidden = true; // per-layer feed-forward block outputs
    bool logits = true;
};

template <typename T>
struct ForwardTrace {
    int seq_len = 0;
    std::vector<std::vector<Mat<T>>> attention; // [layer][head], each T x T, causal rows
    std::vector<Mat<T>> units;                  // [layer], T x d_m
    std::vector<Mat<T>> ffn_out;                // [layer], T x d
    Mat<T> logits;                              // T x vocab
};

template <typename T>
struct LayerParams {
    Mat<T> ln1_g, ln1_b;
    Mat<T> attn_q_w, attn_q_b;
    Mat<T> attn_k_w, attn_k_b;
    Mat<T> attn_v_w, attn_v_b;
    Mat<T> attn_o_w, attn_o_b;
    Mat<T> ln2_g, ln2_b;
    Mat<T> ff_key_w, ff_key_b; // K: [d_m x d], b_K: [1 x d_m]
    Mat<T> ff_val_w, ff_val_b; // V: [d_m x d] (memory slots as rows), b_V: [1 x d]
};

template <typename T>
struct Parameters {
    ModelConfig config;
    Mat<T> tok_emb; // [vocab x d]
    Mat<T> pos_emb; // [context x d]
    std::vector<LayerParams<T>> layers;
    Mat<T> lnf_g, lnf_b;
    Mat<T> head_w, head_b; // [vocab x d], [1 x vocab]

    static Parameters zeros(const ModelConfig& cfg) {
        cfg.validate();
        Parameters p;
        p.config = cfg;
        const int d = cfg.model_dim;
        const int dm = cfg.ff_dim;
        p.tok_emb = Mat<T>(cfg.vocab_size, d);
        p.pos_emb = Mat<T>(cfg.context_length, d);
        p.layers.resize(size_t(cfg.num_layers));
        for (auto& l : p.layers) {
            l.ln1_g = Mat<T>(1, d);
            l.ln1_b = Mat<T>(1, d);
            l.attn_q_w = Mat<T>(d, d);
            l.attn_q_b = Mat<T>(1, d);
            l.attn_k_w = Mat<T>(d, d);
            l.attn_k_b = Mat<T>(1, d);
            l.attn_v_w = Mat<T>(d, d);
            l.attn_v_b = Mat<T>(1, d);
            l.attn_o_w = Mat<T>(d, d);
            l.attn_o_b = Mat<T>(1, d);
            l.ln2_g = Mat<T>(1, d);
            l.ln2_b = Mat<T>(1, d);
            l.ff_key_w = Mat<T>(dm, d);
            l.ff_key_b = Mat<T>(1, dm);
            l.ff_val_w = Mat<T>(dm, d);
            l.ff_val_b = Mat<T>(1, d);
        }
        p.lnf_g = Mat<T>(1, d);
        p.lnf_b = Mat<T>(1, d);
        p.head_w = Mat<T>(cfg.vocab_size, d);
        p.head_b = Mat<T>(1, cfg.vocab_size);
        return p;
    }

    static Parameters init_random(const ModelConfig& cfg, Rng& rng, double weight_std) {
        Parameters p = zeros(cfg);
        p.tok_emb.fill_gauss(rng, 0.0, weight_std);
        p.pos_emb.fill_gauss(rng, 0.0, weight_std);
        for (auto& l : p.layers) {
            l.ln1_g.fill(T(1));
            l.ln2_g.fill(T(1));
            l.attn_q_w.fill_gauss(rng, 0.0, weight_std);
            l.attn_k_w.fill_gauss(rng, 0.0, weight_std);
            l.attn_v_w.fill_gauss(rng, 0.0, weight_std);
            l.attn_o_w.fill_gauss(rng, 0.0, weight_std);
            l.ff_key_w.fill_gauss(rng, 0.0, weight_std);
            l.ff_val_w.fill_gauss(rng, 0.0, weight_std);
        }
        p.lnf_g.fill(T(1));
        p.head_w.fill_gauss(rng, 0.0, weight_std);
        return p;
    }

    template <typename U>
    Parameters<U> cast() const {
        Parameters<U> out;
        out.config = config;
        out.tok_emb = tok_emb.template cast<U>();
        out.pos_emb = pos_emb.template cast<U>();
        out.layers.resize(layers.size());
        for (size_t i = 0; i < layers.size(); ++i) {
            const auto& s = layers[i];
            auto& o = out.layers[i];
            o.ln1_g = s.ln1_g.template cast<U>();
            o.ln1_b = s.ln1_b.template cast<U>();
            o.attn_q_w = s.attn_q_w.template cast<U>();
            o.attn_q_b = s.attn_q_b.template cast<U>();
            o.attn_k_w = s.attn_k_w.template cast<U>();
            o.attn_k_b = s.attn_k_b.template cast<U>();
            o.attn_v_w = s.attn_v_w.template cast<U>();
            o.attn_v_b = s.attn_v_b.template cast<U>();
            o.attn_o_w = s.attn_o_w.template cast<U>();
            o.attn_o_b = s.attn_o_b.template cast<U>();
            o.ln2_g = s.ln2_g.template cast<U>();
            o.ln2_b = s.ln2_b.template cast<U>();
            o.ff_key_w = s.ff_key_w.template cast<U>();
            o.ff_key_b = s.ff_key_b.template cast<U>();
            o.ff_val_w = s.ff_val_w.template cast<U>();
            o.ff_val_b = s.ff_val_b.template cast<U>();
        }
        out.lnf_g = lnf_g.template cast<U>();
        out.lnf_b = lnf_b.template cast<U>();
        out.head_w = head_w.template cast<U>();
        out.head_b = head_b.template cast<U>();
        return out;
    }
};

// Visits every parameter tensor in the declared checkpoint order.
template <typename T, typename Fn>
void for_each_tensor(Parameters<T>& p, Fn&& fn) {
    fn("tok_emb", p.tok_emb);
    fn("pos_emb", p.pos_emb);
    for (size_t li = 0; li < p.layers.size(); ++li) {
        auto& l = p.layers[li];
        char name[64];
        auto visit = [&](const char* field, Mat<T>& m) {
            std::snprintf(name, sizeof(name), "layers.%zu.%s", li, field);
            fn(name, m);
        };
        visit("ln1_g", l.ln1_g);
        visit("ln1_b", l.ln1_b);
        visit("attn_q_w", l.attn_q_w);
        visit("attn_q_b", l.attn_q_b);
        visit("attn_k_w", l.attn_k_w);
        visit("attn_k_b", l.attn_k_b);
        visit("attn_v_w", l.attn_v_w);
        visit("attn_v_b", l.attn_v_b);
        visit("attn_o_w", l.attn_o_w);
        visit("attn_o_b", l.attn_o_b);
        visit("ln2_g", l.ln2_g);
        visit("ln2_b", l.ln2_b);
        visit("ff_key_w", l.ff_key_w);
        visit("ff_key_b", l.ff_key_b);
        visit("ff_val_w", l.ff_val_w);
        visit("ff_val_b", l.ff_val_b);
    }
    fn("lnf_g", p.lnf_g);
    fn("lnf_b", p.lnf_b);
    fn("head_w", p.head_w);
    fn("head_b", p.head_b);
}

template <typename T, typename Fn>
void for_each_tensor(const Parameters<T>& p, Fn&& fn) {
    for_each_tensor(const_cast<Parameters<T>&>(p),
                    [&](const char* name, Mat<T>& m) { fn(name, const_cast<const Mat<T>&>(m)); });
}

template <typename T>
size_t num_parameters(const Parameters<T>& p) {
    size_t n = 0;
    for_each_tensor(p, [&](const char*, const Mat<T>& m) { n += m.size(); });
    return n;
}

// Test hook: adds delta to one unit (post-activation) during the forward
// pass, so unit gradients can be checked against finite differences.
template <typename T>
struct UnitDelta {
    int layer = -1;
    int pos = 0;
    int unit = 0;
    T delta = T(0);
};

// All intermediate activations of one forward pass, kept for backward.
template <typename T>
struct Workspace {
    int seq_len = 0;
    Mat<T> x0; // embeddings + positions

    struct Layer {
        Mat<T> ln1_out;
        std::vector<T> ln1_mean, ln1_rstd;
        Mat<T> q, k, v;
        std::vector<Mat<T>> att; // per head, T x T
        Mat<T> ctx;
        Mat<T> resid1;
        Mat<T> ln2_out;
        std::vector<T> ln2_mean, ln2_rstd;
        Mat<T> ff_pre;
        Mat<T> units;
        Mat<T> ffn_out;
        Mat<T> resid2;
    };
    std::vector<Layer> layers;

    Mat<T> lnf_out;
    std::vector<T> lnf_mean, lnf_rstd;
    Mat<T> logits;

    void prepare(const ModelConfig& cfg, int t) {
        seq_len = t;
        const int d = cfg.model_dim;
        const int dm = cfg.ff_dim;
        x0 = Mat<T>(t, d);
        layers.resize(size_t(cfg.num_layers));
        for (auto& l : layers) {
            l.ln1_out = Mat<T>(t, d);
            l.ln1_mean.assign(size_t(t), T(0));
            l.ln1_rstd.assign(size_t(t), T(0));
            l.q = Mat<T>(t, d);
            l.k = Mat<T>(t, d);
            l.v = Mat<T>(t, d);
            l.att.assign(size_t(cfg.num_heads), Mat<T>(t, t));
            l.ctx = Mat<T>(t, d);
            l.resid1 = Mat<T>(t, d);
            l.ln2_out = Mat<T>(t, d);
            l.ln2_mean.assign(size_t(t), T(0));
            l.ln2_rstd.assign(size_t(t), T(0));
            l.ff_pre = Mat<T>(t, dm);
            l.units = Mat<T>(t, dm);
            l.ffn_out = Mat<T>(t, d);
            l.resid2 = Mat<T>(t, d);
        }
        lnf_out = Mat<T>(t, d);
        lnf_mean.assign(size_t(t), T(0));
        lnf_rstd.assign(size_t(t), T(0));
        logits = Mat<T>(t, cfg.vocab_size);
    }
};

template <typename T>
struct GradientTrace {
    Mat<T> grad_input;                // T x d, gradient at the input embedding vectors
    std::vector<Mat<T>> grad_units;   // [layer], T x d_m, gradient at post-activation u
    Parameters<T> grad_params;

    // Reallocates only on shape change, so batch loops can reuse one trace.
    // grad_input / grad_units are fully overwritten by backward_ws; parameter
    // gradients accumulate and are zeroed by the caller per batch.
    void prepare(const ModelConfig& cfg, int t) {
        if (grad_params.layers.empty() || !(grad_params.config == cfg)) {
            grad_params = Parameters<T>::zeros(cfg);
        }
        if (grad_input.rows != t || grad_input.cols != cfg.model_dim) {
            grad_input = Mat<T>(t, cfg.model_dim);
        }
        if (grad_units.size() != size_t(cfg.num_layers) || grad_units[0].rows != t ||
            grad_units[0].cols != cfg.ff_dim) {
            grad_units.assign(size_t(cfg.num_layers), Mat<T>(t, cfg.ff_dim));
        }
    }

    void zero_params() {
        for_each_tensor(grad_params, [](const char*, Mat<T>& m) { m.fill(T(0)); });
    }
};

namespace detail {

constexpr double kLnEps = 1e-5;

template <typename T>
void layernorm_row(const T* x, const T* g, const T* b, int d, T* y, T& mean_out, T& rstd_out) {
    T mean = T(0);
    for (int i = 0; i < d; ++i) {
        mean += x[i];
    }
    mean /= T(d);
    T var = T(0);
    for (int i = 0; i < d; ++i) {
        const T c = x[i] - mean;
        var += c * c;
    }
    var /= T(d);
    const T rstd = T(1) / std::sqrt(var + T(kLnEps));
    for (int i = 0; i < d; ++i) {
        y[i] = (x[i] - mean) * rstd * g[i] + b[i];
    }
    mean_out = mean;
    rstd_out = rstd;
}

template <typename T>
void layernorm_backward_row(const T* x, T mean, T rstd, const T* g, const T* dy, int d, T* dx_accum,
                            T* dg_accum, T* db_accum) {
    T sum_dxhat = T(0);
    T sum_dxhat_xhat = T(0);
    for (int i = 0; i < d; ++i) {
        const T xhat = (x[i] - mean) * rstd;
        const T dxhat = dy[i] * g[i];
        sum_dxhat += dxhat;
        sum_dxhat_xhat += dxhat * xhat;
        dg_accum[i] += dy[i] * xhat;
        db_accum[i] += dy[i];
    }
    const T inv_d = T(1) / T(d);
    for (int i = 0; i < d; ++i) {
        const T xhat = (x[i] - mean) * rstd;
        const T dxhat = dy[i] * g[i];
        dx_accum[i] += rstd * (dxhat - sum_dxhat * inv_d - xhat * sum_dxhat_xhat * inv_d);
    }
}

template <typename T>
T activation(Nonlinearity f, T x) {
    if (f == Nonlinearity::relu) {
        return x > T(0) ? x : T(0);
    }
    // exact gelu: 0.5 x (1 + erf(x / sqrt(2)))
    return T(0.5) * x * (T(1) + std::erf(x * T(0.70710678118654752440)));
}

template <typename T>
T activation_grad(Nonlinearity f, T pre) {
    if (f == Nonlinearity::relu) {
        return pre > T(0) ? T(1) : T(0);
    }
    const T cdf = T(0.5) * (T(1) + std::erf(pre * T(0.70710678118654752440)));
    const T pdf = T(0.39894228040143267794) * std::exp(T(-0.5) * pre * pre);
    return cdf + pre * pdf;
}

template <typename T>
void softmax_row_inplace(T* x, int n) {
    T mx = x[0];
    for (int i = 1; i < n; ++i) {
        mx = std::max(mx, x[i]);
    }
    T sum = T(0);
    for (int i = 0; i < n; ++i) {
        x[i] = std::exp(x[i] - mx);
        sum += x[i];
    }
    const T inv = T(1) / sum;
    for (int i = 0; i < n; ++i) {
        x[i] *= inv;
    }
}

} // namespace detail

// Forward pass storing every intermediate in ws. Input validation lives here;
// every public entry point funnels through this. head_position restricts the
// final-norm + output-head computation to one position (-1 = all positions);
// logit rows at other positions are left zero.
template <typename T>
void forward_ws(const Parameters<T>& params, const MixedSequence& input, Workspace<T>& ws,
                const UnitDelta<T>* unit_delta = nullptr, int head_position = -1) {
    const ModelConfig& cfg = params.config;
    const int t_len = input.length();
    require(t_len > 0, ErrorKind::data, "forward: empty input sequence");
    require(t_len <= cfg.context_length, ErrorKind::length,
            "forward: sequence length " + std::to_string(t_len) + " exceeds context length " +
                std::to_string(cfg.context_length));

    const int d = cfg.model_dim;
    const int dm = cfg.ff_dim;
    const int heads = cfg.num_heads;
    const int dh = cfg.head_dim();
    const T inv_sqrt_dh = T(1) / std::sqrt(T(dh));

    ws.prepare(cfg, t_len);

    for (int t = 0; t < t_len; ++t) {
        const MixedElem& e = input.elems[size_t(t)];
        T* x = ws.x0.row(t);
        if (e.is_token()) {
            require(e.token < cfg.vocab_size, ErrorKind::vocab,
                    "forward: token id " + std::to_string(e.token) + " outside vocabulary");
            const T* emb = params.tok_emb.row(e.token);
            for (int i = 0; i < d; ++i) {
                x[i] = emb[i];
            }
        } else {
            require(int(e.vec.size()) == d, ErrorKind::shape,
                    "forward: raw vector has dimension " + std::to_string(e.vec.size()) +
                        ", expected " + std::to_string(d));
            for (int i = 0; i < d; ++i) {
                x[i] = T(e.vec[size_t(i)]);
            }
        }
        const T* pos = params.pos_emb.row(t);
        for (int i = 0; i < d; ++i) {
            x[i] += pos[i];
        }
    }

    const Mat<T>* x_in = &ws.x0;
    for (int li = 0; li < cfg.num_layers; ++li) {
        const auto& lp = params.layers[size_t(li)];
        auto& lw = ws.layers[size_t(li)];

        for (int t = 0; t < t_len; ++t) {
            detail::layernorm_row(x_in->row(t), lp.ln1_g.row(0), lp.ln1_b.row(0), d,
                                  lw.ln1_out.row(t), lw.ln1_mean[size_t(t)],
                                  lw.ln1_rstd[size_t(t)]);
            matvec(lp.attn_q_w, lw.ln1_out.row(t), lp.attn_q_b.row(0), lw.q.row(t));
            matvec(lp.attn_k_w, lw.ln1_out.row(t), lp.attn_k_b.row(0), lw.k.row(t));
            matvec(lp.attn_v_w, lw.ln1_out.row(t), lp.attn_v_b.row(0), lw.v.row(t));
        }

        for (int h = 0; h < heads; ++h) {
            Mat<T>& att = lw.att[size_t(h)];
            const int hoff = h * dh;
            for (int t = 0; t < t_len; ++t) {
                T* row = att.row(t);
                const T* qh = lw.q.row(t) + hoff;
                for (int j = 0; j <= t; ++j) {
                    row[j] = dot(qh, lw.k.row(j) + hoff, dh) * inv_sqrt_dh;
                }
                detail::softmax_row_inplace(row, t + 1); // entries above the diagonal stay 0
                T* ctx = lw.ctx.row(t) + hoff;
                for (int i = 0; i < dh; ++i) {
                    ctx[i] = T(0);
                }
                for (int j = 0; j <= t; ++j) {
                    axpy(row[j], lw.v.row(j) + hoff, ctx, dh);
                }
            }
        }

        for (int t = 0; t < t_len; ++t) {
            T* r1 = lw.resid1.row(t);
            matvec(lp.attn_o_w, lw.ctx.row(t), lp.attn_o_b.row(0), r1);
            const T* x = x_in->row(t);
            for (int i = 0; i < d; ++i) {
                r1[i] += x[i];
            }

            detail::layernorm_row(r1, lp.ln2_g.row(0), lp.ln2_b.row(0), d, lw.ln2_out.row(t),
                                  lw.ln2_mean[size_t(t)], lw.ln2_rstd[size_t(t)]);
            matvec(lp.ff_key_w, lw.ln2_out.row(t), lp.ff_key_b.row(0), lw.ff_pre.row(t));

            T* u = lw.units.row(t);
            const T* pre = lw.ff_pre.row(t);
            for (int i = 0; i < dm; ++i) {
                u[i] = detail::activation(cfg.nonlinearity, pre[i]);
            }
            if (unit_delta && unit_delta->layer == li && unit_delta->pos == t) {
                u[unit_delta->unit] += unit_delta->delta;
            }

            T* f = lw.ffn_out.row(t);
            const T* bv = lp.ff_val_b.row(0);
            for (int i = 0; i < d; ++i) {
                f[i] = bv[i];
            }
            for (int i = 0; i < dm; ++i) {
                if (u[i] != T(0)) {
                    axpy(u[i], lp.ff_val_w.row(i), f, d);
                }
            }

            T* r2 = lw.resid2.row(t);
            for (int i = 0; i < d; ++i) {
                r2[i] = r1[i] + f[i];
            }
        }

        x_in = &lw.resid2;
    }

    for (int t = 0; t < t_len; ++t) {
        if (head_position >= 0 && t != head_position) {
            continue;
        }
        detail::layernorm_row(x_in->row(t), params.lnf_g.row(0), params.lnf_b.row(0), d,
                              ws.lnf_out.row(t), ws.lnf_mean[size_t(t)], ws.lnf_rstd[size_t(t)]);
        matvec(params.head_w, ws.lnf_out.row(t), params.head_b.row(0), ws.logits.row(t));
    }
}

template <typename T>
ForwardTrace<T> trace_from_ws(const Workspace<T>& ws, const ModelConfig& cfg, CaptureFlags capture) {
    ForwardTrace<T> trace;
    trace.seq_len = ws.seq_len;
    if (capture.attention) {
        trace.attention.reserve(ws.layers.size());
        for (const auto& l : ws.layers) {
            trace.attention.push_back(l.att);
        }
    }
    if (capture.units) {
        trace.units.reserve(ws.layers.size());
        for (const auto& l : ws.layers) {
            trace.units.push_back(l.units);
        }
    }
    if (capture.hidden) {
        trace.ffn_out.reserve(ws.layers.size());
        for (const auto& l : ws.layers) {
            trace.ffn_out.push_back(l.ffn_out);
        }
    }
    if (capture.logits) {
        trace.logits = ws.logits;
    }
    (void)cfg;
    return trace;
}

template <typename T>
ForwardTrace<T> forward(const Parameters<T>& params, const MixedSequence& input,
                        CaptureFlags capture = {}) {
    Workspace<T> ws;
    forward_ws(params, input, ws);
    return trace_from_ws(ws, params.config, capture);
}

// Reconstructs every layer's feed-forward output from the captured units and
// returns the maximum absolute deviation from the captured output.
template <typename T>
double ffn_reconstruction_error(const Parameters<T>& params, const ForwardTrace<T>& trace) {
    require(!trace.units.empty() && !trace.ffn_out.empty(), ErrorKind::data,
            "trace must capture units and hidden outputs");
    const int d = params.config.model_dim;
    const int dm = params.config.ff_dim;
    double worst = 0.0;
    for (size_t li = 0; li < trace.units.size(); ++li) {
        const auto& lp = params.layers[li];
        for (int t = 0; t < trace.seq_len; ++t) {
            const T* u = trace.units[li].row(t);
            std::vector<double> rec(static_cast<size_t>(d));
            for (int i = 0; i < d; ++i) {
                rec[size_t(i)] = double(lp.ff_val_b.at(0, i));
            }
            for (int i = 0; i < dm; ++i) {
                const double ui = double(u[i]);
                if (ui == 0.0) {
                    continue;
                }
                const T* vr = lp.ff_val_w.row(i);
                for (int j = 0; j < d; ++j) {
                    rec[size_t(j)] += ui * double(vr[j]);
                }
            }
            for (int j = 0; j < d; ++j) {
                worst = std::max(worst, std::abs(rec[size_t(j)] - double(trace.ffn_out[li].at(t, j))));
            }
        }
    }
    return worst;
}

// Backward pass from an arbitrary logit gradient. Parameter gradients
// accumulate into gt.grad_params (callers zero once per batch); grad_input
// and grad_units are overwritten.
template <typename T>
void backward_ws(const Parameters<T>& params, const MixedSequence& input, const Workspace<T>& ws,
                 const Mat<T>& dlogits, GradientTrace<T>& gt) {
    const ModelConfig& cfg = params.config;
    const int t_len = ws.seq_len;
    const int d = cfg.model_dim;
    const int dm = cfg.ff_dim;
    const int heads = cfg.num_heads;
    const int dh = cfg.head_dim();
    const T inv_sqrt_dh = T(1) / std::sqrt(T(dh));

    require(dlogits.rows == t_len && dlogits.cols == cfg.vocab_size, ErrorKind::shape,
            "backward: dlogits shape mismatch");

    Mat<T> dx(t_len, d);
    Mat<T> scratch_d(t_len, d);

    // head + final layernorm
    {
        Mat<T>& dy = scratch_d;
        dy.fill(T(0));
        for (int t = 0; t < t_len; ++t) {
            const T* dl = dlogits.row(t);
            outer_accum(gt.grad_params.head_w, dl, ws.lnf_out.row(t));
            T* hb = gt.grad_params.head_b.row(0);
            for (int v = 0; v < cfg.vocab_size; ++v) {
                hb[v] += dl[v];
            }
            matvec_transposed_accum(params.head_w, dl, dy.row(t));
        }
        const Mat<T>& lnf_in =
            cfg.num_layers > 0 ? ws.layers[size_t(cfg.num_layers - 1)].resid2 : ws.x0;
        dx.fill(T(0));
        for (int t = 0; t < t_len; ++t) {
            detail::layernorm_backward_row(lnf_in.row(t), ws.lnf_mean[size_t(t)],
                                           ws.lnf_rstd[size_t(t)], params.lnf_g.row(0), dy.row(t), d,
                                           dx.row(t), gt.grad_params.lnf_g.row(0),
                                           gt.grad_params.lnf_b.row(0));
        }
    }

    Mat<T> dq(t_len, d), dk(t_len, d), dv(t_len, d), dctx(t_len, d), da(t_len, d);
    std::vector<T> datt(static_cast<size_t>(t_len));

    for (int li = cfg.num_layers - 1; li >= 0; --li) {
        const auto& lp = params.layers[size_t(li)];
        auto& gp = gt.grad_params.layers[size_t(li)];
        const auto& lw = ws.layers[size_t(li)];
        const Mat<T>& x_in = li > 0 ? ws.layers[size_t(li - 1)].resid2 : ws.x0;

        // ff block: resid2 = resid1 + V^T u + b_V, u = f(K ln2(resid1) + b_K)
        Mat<T>& dmid = scratch_d; // gradient w.r.t. resid1
        dmid.fill(T(0));
        for (int t = 0; t < t_len; ++t) {
            const T* df = dx.row(t); // dF == d(resid2)
            T* du = gt.grad_units[size_t(li)].row(t);
            const T* u = lw.units.row(t);
            T* bv = gp.ff_val_b.row(0);
            for (int i = 0; i < d; ++i) {
                bv[i] += df[i];
            }
            for (int i = 0; i < dm; ++i) {
                du[i] = dot(lp.ff_val_w.row(i), df, d);
                if (u[i] != T(0)) {
                    axpy(u[i], df, gp.ff_val_w.row(i), d);
                }
            }
            // through the nonlinearity into the key projection
            const T* pre = lw.ff_pre.row(t);
            std::vector<T> dpre(static_cast<size_t>(dm));
            for (int i = 0; i < dm; ++i) {
                dpre[size_t(i)] = du[i] * detail::activation_grad(cfg.nonlinearity, pre[i]);
            }
            T* bk = gp.ff_key_b.row(0);
            for (int i = 0; i < dm; ++i) {
                bk[i] += dpre[size_t(i)];
            }
            outer_accum(gp.ff_key_w, dpre.data(), lw.ln2_out.row(t));
            std::vector<T> db(static_cast<size_t>(d), T(0));
            matvec_transposed_accum(lp.ff_key_w, dpre.data(), db.data());
            detail::layernorm_backward_row(lw.resid1.row(t), lw.ln2_mean[size_t(t)],
                                           lw.ln2_rstd[size_t(t)], lp.ln2_g.row(0), db.data(), d,
                                           dmid.row(t), gp.ln2_g.row(0), gp.ln2_b.row(0));
        }
        for (int t = 0; t < t_len; ++t) {
            T* a = dmid.row(t);
            T* b = dx.row(t);
            for (int i = 0; i < d; ++i) {
                b[i] += a[i]; // dx now holds d(resid1)
            }
        }

        // attention block: resid1 = x_in + Wo ctx + bo
        dctx.fill(T(0));
        for (int t = 0; t < t_len; ++t) {
            const T* dp = dx.row(t);
            outer_accum(gp.attn_o_w, dp, lw.ctx.row(t));
            T* bo = gp.attn_o_b.row(0);
            for (int i = 0; i < d; ++i) {
                bo[i] += dp[i];
            }
            matvec_transposed_accum(lp.attn_o_w, dp, dctx.row(t));
        }

        dq.fill(T(0));
        dk.fill(T(0));
        dv.fill(T(0));
        for (int h = 0; h < heads; ++h) {
            const Mat<T>& att = lw.att[size_t(h)];
            const int hoff = h * dh;
            for (int t = 0; t < t_len; ++t) {
                const T* dc = dctx.row(t) + hoff;
                const T* arow = att.row(t);
                T dot_sum = T(0);
                for (int j = 0; j <= t; ++j) {
                    datt[size_t(j)] = dot(dc, lw.v.row(j) + hoff, dh);
                    axpy(arow[j], dc, dv.row(j) + hoff, dh);
                    dot_sum += datt[size_t(j)] * arow[j];
                }
                for (int j = 0; j <= t; ++j) {
                    const T ds = arow[j] * (datt[size_t(j)] - dot_sum) * inv_sqrt_dh;
                    axpy(ds, lw.k.row(j) + hoff, dq.row(t) + hoff, dh);
                    axpy(ds, lw.q.row(t) + hoff, dk.row(j) + hoff, dh);
                }
            }
        }

        da.fill(T(0));
        for (int t = 0; t < t_len; ++t) {
            outer_accum(gp.attn_q_w, dq.row(t), lw.ln1_out.row(t));
            outer_accum(gp.attn_k_w, dk.row(t), lw.ln1_out.row(t));
            outer_accum(gp.attn_v_w, dv.row(t), lw.ln1_out.row(t));
            T* bq = gp.attn_q_b.row(0);
            T* bk = gp.attn_k_b.row(0);
            T* bv = gp.attn_v_b.row(0);
            const T* dqr = dq.row(t);
            const T* dkr = dk.row(t);
            const T* dvr = dv.row(t);
            for (int i = 0; i < d; ++i) {
                bq[i] += dqr[i];
                bk[i] += dkr[i];
                bv[i] += dvr[i];
            }
            matvec_transposed_accum(lp.attn_q_w, dqr, da.row(t));
            matvec_transposed_accum(lp.attn_k_w, dkr, da.row(t));
            matvec_transposed_accum(lp.attn_v_w, dvr, da.row(t));
        }

        for (int t = 0; t < t_len; ++t) {
            detail::layernorm_backward_row(x_in.row(t), lw.ln1_mean[size_t(t)],
                                           lw.ln1_rstd[size_t(t)], lp.ln1_g.row(0), da.row(t), d,
                                           dx.row(t), gp.ln1_g.row(0), gp.ln1_b.row(0));
        }
    }

    // dx is now the gradient at the embedded inputs
    for (int t = 0; t < t_len; ++t) {
        const T* g = dx.row(t);
        T* gi = gt.grad_input.row(t);
        for (int i = 0; i < d; ++i) {
            gi[i] = g[i];
        }
        const MixedElem& e = input.elems[size_t(t)];
        if (e.is_token()) {
            T* te = gt.grad_params.tok_emb.row(e.token);
            for (int i = 0; i < d; ++i) {
                te[i] += g[i];
            }
        }
        T* pe = gt.grad_params.pos_emb.row(t);
        for (int i = 0; i < d; ++i) {
            pe[i] += g[i];
        }
    }
}

enum class LossMode { nll, max_prob };

struct LossSpec {
    LossMode mode = LossMode::nll;
    int position = 0;
    int target_token = -1; // required for nll
};

template <typename T>
struct LossResult {
    T value = T(0);
    GradientTrace<T> grads;
};

// Softmax probabilities of one logit row, in the scalar type of the model.
template <typename T>
std::vector<T> softmax_probs(const T* logits, int n) {
    std::vector<T> p(logits, logits + n);
    detail::softmax_row_inplace(p.data(), n);
    return p;
}

// Loss scalar only, no gradients. Used by candidate sweeps and the
// finite-difference oracle (which perturbs params, inputs or units).
template <typename T>
T loss_value(const Parameters<T>& params, const MixedSequence& input, const LossSpec& spec,
             const UnitDelta<T>* unit_delta = nullptr) {
    Workspace<T> ws;
    forward_ws(params, input, ws, unit_delta, spec.position);
    require(spec.position >= 0 && spec.position < ws.seq_len, ErrorKind::domain,
            "loss: target position outside sequence");
    std::vector<T> probs = softmax_probs(ws.logits.row(spec.position), params.config.vocab_size);
    if (spec.mode == LossMode::nll) {
        require(spec.target_token >= 0 && spec.target_token < params.config.vocab_size,
                ErrorKind::domain, "loss: target token outside vocabulary");
        return -std::log(probs[size_t(spec.target_token)]);
    }
    T pmax = probs[0];
    for (const T p : probs) {
        pmax = std::max(pmax, p);
    }
    return pmax;
}

// NLL of a target token (or, in max_prob mode, the maximum output
// probability) at one position, with gradients for embeddings, units and
// parameters.
template <typename T>
LossResult<T> loss_and_gradients(const Parameters<T>& params, const MixedSequence& input,
                                 const LossSpec& spec) {
    const ModelConfig& cfg = params.config;
    Workspace<T> ws;
    forward_ws(params, input, ws, static_cast<const UnitDelta<T>*>(nullptr), spec.position);

    require(spec.position >= 0 && spec.position < ws.seq_len, ErrorKind::domain,
            "loss: target position outside sequence");

    LossResult<T> out;
    out.grads.prepare(cfg, ws.seq_len);
    out.grads.zero_params();

    const T* logits = ws.logits.row(spec.position);
    std::vector<T> probs = softmax_probs(logits, cfg.vocab_size);

    Mat<T> dlogits(ws.seq_len, cfg.vocab_size);
    T* dl = dlogits.row(spec.position);

    if (spec.mode == LossMode::nll) {
        require(spec.target_token >= 0 && spec.target_token < cfg.vocab_size, ErrorKind::domain,
                "loss: target token outside vocabulary");
        out.value = -std::log(probs[size_t(spec.target_token)]);
        for (int v = 0; v < cfg.vocab_size; ++v) {
            dl[v] = probs[size_t(v)];
        }
        dl[spec.target_token] -= T(1);
    } else {
        int amax = 0;
        for (int v = 1; v < cfg.vocab_size; ++v) {
            if (probs[size_t(v)] > probs[size_t(amax)]) {
                amax = v;
            }
        }
        const T pmax = probs[size_t(amax)];
        out.value = pmax;
        // d pmax / d logit_v = pmax * ([v == amax] - p_v)
        for (int v = 0; v < cfg.vocab_size; ++v) {
            dl[v] = -pmax * probs[size_t(v)];
        }
        dl[amax] += pmax;
    }

    backward_ws(params, input, ws, dlogits, out.grads);
    return out;
}

} // namespace plab
