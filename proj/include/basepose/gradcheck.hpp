#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "basepose/nn.hpp"

namespace basepose {

// Central finite differences against reverse-mode gradients.
//
// fn must evaluate the scalar objective from the store's current values and,
// when accumulate_grads is true, leave d(obj)/d(params) in the store's grads.
// Returns the max elementwise relative error max |g_ad - g_fd| / max(1, |g|).
template <typename T>
double finite_diff_check(ParamStoreT<T>& store,
                         const std::function<double(ParamStoreT<T>&, bool)>& fn,
                         double h) {
    store.zero_grad();
    fn(store, true);
    const std::vector<T> analytic = store.flatten_grads();
    std::vector<T> point = store.flatten_values();

    double max_rel = 0.0;
    for (size_t i = 0; i < point.size(); ++i) {
        const T saved = point[i];
        point[i] = saved + static_cast<T>(h);
        store.unflatten_values(point);
        const double fp = fn(store, false);
        point[i] = saved - static_cast<T>(h);
        store.unflatten_values(point);
        const double fm = fn(store, false);
        point[i] = saved;
        const double numeric = (fp - fm) / (2.0 * h);
        const double a = static_cast<double>(analytic[i]);
        const double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
        max_rel = std::max(max_rel, std::abs(a - numeric) / denom);
    }
    store.unflatten_values(point);
    return max_rel;
}

}  // namespace basepose
