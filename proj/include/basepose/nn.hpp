#pragma once

#include <cassert>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "basepose/rng.hpp"
#include "basepose/tape.hpp"
#include "basepose/tensor.hpp"

namespace basepose {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Named parameter set with per-parameter Adam moments. Parameters live outside
// any tape; each forward pass injects them as tape inputs and gradients are
// read back and accumulated here.
template <typename T>
struct ParamStoreT {
    struct Entry {
        TensorT<T> value;
        TensorT<T> grad;
        TensorT<T> m;
        TensorT<T> v;
    };
    std::map<std::string, Entry> entries;  // ordered: deterministic iteration
    int64_t step = 0;

    TensorT<T>& add(const std::string& name, TensorT<T> init) {
        assert(!entries.count(name));
        Entry e;
        e.grad = TensorT<T>(init.shape);
        e.m = TensorT<T>(init.shape);
        e.v = TensorT<T>(init.shape);
        e.value = std::move(init);
        return entries.emplace(name, std::move(e)).first->second.value;
    }

    bool has(const std::string& name) const { return entries.count(name) != 0; }
    Entry& at(const std::string& name) { return entries.at(name); }
    const Entry& at(const std::string& name) const { return entries.at(name); }

    int64_t param_count() const {
        int64_t n = 0;
        for (const auto& [k, e] : entries) n += e.value.numel();
        return n;
    }

    void zero_grad() {
        for (auto& [k, e] : entries) e.grad.fill(T(0));
    }

    void scale_grad(T s) {
        for (auto& [k, e] : entries)
            for (auto& g : e.grad.data) g *= s;
    }

    // Standard bias-corrected Adam update from the accumulated gradients.
    void adam_step(const AdamConfig& cfg) {
        ++step;
        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
        for (auto& [k, e] : entries) {
            for (int64_t i = 0; i < e.value.numel(); ++i) {
                const double g = static_cast<double>(e.grad[i]);
                const double m = cfg.beta1 * static_cast<double>(e.m[i]) + (1.0 - cfg.beta1) * g;
                const double v =
                    cfg.beta2 * static_cast<double>(e.v[i]) + (1.0 - cfg.beta2) * g * g;
                e.m[i] = static_cast<T>(m);
                e.v[i] = static_cast<T>(v);
                const double mhat = m / bc1;
                const double vhat = v / bc2;
                e.value[i] -= static_cast<T>(cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
            }
        }
    }

    // Flat view helpers, used by the finite-difference harness.
    std::vector<T> flatten_values() const {
        std::vector<T> out;
        for (const auto& [k, e] : entries)
            out.insert(out.end(), e.value.data.begin(), e.value.data.end());
        return out;
    }
    void unflatten_values(const std::vector<T>& flat) {
        size_t off = 0;
        for (auto& [k, e] : entries) {
            std::copy(flat.begin() + off, flat.begin() + off + e.value.data.size(),
                      e.value.data.begin());
            off += e.value.data.size();
        }
        assert(off == flat.size());
    }
    std::vector<T> flatten_grads() const {
        std::vector<T> out;
        for (const auto& [k, e] : entries)
            out.insert(out.end(), e.grad.data.begin(), e.grad.data.end());
        return out;
    }

    template <typename U>
    ParamStoreT<U> cast() const {
        ParamStoreT<U> out;
        for (const auto& [k, e] : entries) out.add(k, e.value.template cast<U>());
        return out;
    }
};

using ParamStore = ParamStoreT<float>;

template <typename T>
TensorT<T> he_normal(std::vector<int> shape, int fan_in, Rng& rng) {
    TensorT<T> t(std::move(shape));
    const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (auto& v : t.data) v = static_cast<T>(rng.normal() * std);
    return t;
}

// Binds a ParamStore to a tape for one forward pass: parameters become tape
// inputs, and harvest() pulls d(loss)/d(param) back into the store's grads.
template <typename T>
class ParamBinding {
public:
    ParamBinding(Tape<T>& tape, ParamStoreT<T>& store) : tape_(tape), store_(store) {}

    typename Tape<T>::Id operator()(const std::string& name) {
        auto it = ids_.find(name);
        if (it != ids_.end()) return it->second;
        const auto id = tape_.input(store_.at(name).value, true);
        ids_.emplace(name, id);
        return id;
    }

    void harvest() {
        for (const auto& [name, id] : ids_) {
            const TensorT<T>& g = tape_.grad(id);
            auto& dst = store_.at(name).grad;
            for (int64_t i = 0; i < g.numel(); ++i) dst[i] += g[i];
        }
    }

private:
    Tape<T>& tape_;
    ParamStoreT<T>& store_;
    std::map<std::string, typename Tape<T>::Id> ids_;
};

}  // namespace basepose
