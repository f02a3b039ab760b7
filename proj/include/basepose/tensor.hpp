#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace basepose {

// Dense row-major tensor. No broadcasting, no views; shapes are explicit and
// ops validate them. float is the training dtype, double the verification one.
template <typename T>
struct TensorT {
    std::vector<int> shape;
    std::vector<T> data;

    TensorT() = default;
    explicit TensorT(std::vector<int> s, T fill = T(0)) : shape(std::move(s)) {
        data.assign(static_cast<size_t>(numel_of(shape)), fill);
    }

    static int64_t numel_of(const std::vector<int>& s) {
        int64_t n = 1;
        for (int d : s) {
            assert(d >= 0);
            n *= d;
        }
        return n;
    }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int ndim() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }

    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }

    T& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
    const T& operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

    // Slow indexed access, for tests and glue code only.
    T& at(std::initializer_list<int> idx) { return data[static_cast<size_t>(offset(idx))]; }
    const T& at(std::initializer_list<int> idx) const {
        return data[static_cast<size_t>(offset(idx))];
    }

    int64_t offset(std::initializer_list<int> idx) const {
        assert(static_cast<int>(idx.size()) == ndim());
        int64_t off = 0;
        int i = 0;
        for (int v : idx) {
            assert(v >= 0 && v < shape[static_cast<size_t>(i)]);
            off = off * shape[static_cast<size_t>(i)] + v;
            ++i;
        }
        return off;
    }

    bool same_shape(const TensorT& o) const { return shape == o.shape; }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    bool all_finite() const {
        for (const T& v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    template <typename U>
    TensorT<U> cast() const {
        TensorT<U> out(shape);
        for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

using TensorF = TensorT<float>;
using TensorD = TensorT<double>;

inline std::string shape_str(const std::vector<int>& s) {
    std::string r = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) r += ",";
        r += std::to_string(s[i]);
    }
    return r + "]";
}

}  // namespace basepose
