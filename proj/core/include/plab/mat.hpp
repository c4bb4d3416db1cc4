#pragma once

#include <cstddef>
#include <vector>

#include "plab/errors.hpp"
#include "plab/rng.hpp"

namespace plab {

// Dense row-major matrix. Everything at desk scale fits comfortably in
// std::vector<T>; no views, no strides.
template <typename T>
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<T> data;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), data(size_t(r) * size_t(c), T(0)) {}

    size_t size() const { return data.size(); }

    T* row(int r) { return data.data() + size_t(r) * size_t(cols); }
    const T* row(int r) const { return data.data() + size_t(r) * size_t(cols); }

    T& at(int r, int c) { return data[size_t(r) * size_t(cols) + size_t(c)]; }
    const T& at(int r, int c) const { return data[size_t(r) * size_t(cols) + size_t(c)]; }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    void fill_gauss(Rng& rng, double mu, double sigma) {
        for (auto& x : data) {
            x = T(rng.gauss(mu, sigma));
        }
    }

    template <typename U>
    Mat<U> cast() const {
        Mat<U> out(rows, cols);
        for (size_t i = 0; i < data.size(); ++i) {
            out.data[i] = U(data[i]);
        }
        return out;
    }
};

// y = W x + b, with W stored [out x in]. b may be null.
template <typename T>
inline void matvec(const Mat<T>& w, const T* x, const T* b, T* y) {
    for (int o = 0; o < w.rows; ++o) {
        const T* wr = w.row(o);
        T acc = b ? b[o] : T(0);
        for (int i = 0; i < w.cols; ++i) {
            acc += wr[i] * x[i];
        }
        y[o] = acc;
    }
}

// x^T W accumulated into y (length in): y += W^T g for backward passes.
template <typename T>
inline void matvec_transposed_accum(const Mat<T>& w, const T* g, T* y) {
    for (int o = 0; o < w.rows; ++o) {
        const T* wr = w.row(o);
        const T go = g[o];
        if (go == T(0)) {
            continue;
        }
        for (int i = 0; i < w.cols; ++i) {
            y[i] += wr[i] * go;
        }
    }
}

// dW += g x^T (outer product accumulation for weight gradients)
template <typename T>
inline void outer_accum(Mat<T>& dw, const T* g, const T* x) {
    for (int o = 0; o < dw.rows; ++o) {
        T* dr = dw.row(o);
        const T go = g[o];
        if (go == T(0)) {
            continue;
        }
        for (int i = 0; i < dw.cols; ++i) {
            dr[i] += go * x[i];
        }
    }
}

template <typename T>
inline T dot(const T* a, const T* b, int n) {
    T acc = T(0);
    for (int i = 0; i < n; ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

template <typename T>
inline void axpy(T alpha, const T* x, T* y, int n) {
    for (int i = 0; i < n; ++i) {
        y[i] += alpha * x[i];
    }
}

// index of the maximum element; ties resolve to the lowest index
template <typename T>
inline int argmax_lowest(const T* x, int n) {
    int best = 0;
    for (int i = 1; i < n; ++i) {
        if (x[i] > x[best]) {
            best = i;
        }
    }
    return best;
}

} // namespace plab
