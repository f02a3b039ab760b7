#include "basepose/group.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

#include "basepose/scene.hpp"

namespace basepose {

namespace {

// Spatial tap table for rotating one k x k kernel CCW by 2*pi*g/n. Quarter
// turns become single-tap permutations so the C_4 subgroup stays exact. For
// groups with non-quarter elements the canonical kernel is restricted to a
// disk support (corner weights unused): a square support cannot rotate by 45
// degrees without shedding corner mass, which breaks the odd slices far more
// than the lost capacity costs.
template <typename T>
void rotation_taps(int k, int n, int g, std::vector<int32_t>& offsets,
                   std::vector<typename Tape<T>::SpatialTap>& taps) {
    const int kk = k * k;
    const double c = (k - 1) * 0.5;
    const bool quarter = (4 * g) % n == 0;
    const int q = quarter ? ((4 * g) / n) % 4 : 0;
    const double ang = 2.0 * std::numbers::pi * g / n;
    const double ca = std::cos(-ang), sa = std::sin(-ang);
    const bool disk = n % 4 != 0 || n > 4;
    const double r2max = (c + 0.25) * (c + 0.25);
    auto masked = [&](double sx, double sy) {
        return disk && ((sx - c) * (sx - c) + (sy - c) * (sy - c) > r2max);
    };

    // dense map first: w[out][src], then compress to taps
    std::vector<double> w(static_cast<size_t>(kk) * kk, 0.0);
    std::vector<int> in_disk;
    for (int y = 0; y < k; ++y)
        for (int x = 0; x < k; ++x) {
            if (!masked(x, y)) in_disk.push_back(y * k + x);
            if (quarter) {
                int sx = x, sy = y;
                for (int t = 0; t < q; ++t) {
                    const int nx = sy;
                    const int ny = k - 1 - sx;
                    sx = nx;
                    sy = ny;
                }
                if (!masked(sx, sy) && !masked(x, y))
                    w[static_cast<size_t>(y * k + x) * kk + (sy * k + sx)] = 1.0;
            } else if (!masked(x, y)) {
                // the rotation of a disk-supported kernel is disk-supported
                const double dx = x - c, dy = y - c;
                const double sxf = ca * dx - sa * dy + c;
                const double syf = sa * dx + ca * dy + c;
                const int x0 = static_cast<int>(std::floor(sxf));
                const int y0 = static_cast<int>(std::floor(syf));
                const double fx = sxf - x0, fy = syf - y0;
                const double bw[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
                const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
                const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
                for (int t = 0; t < 4; ++t) {
                    if (xs[t] < 0 || xs[t] >= k || ys[t] < 0 || ys[t] >= k) continue;
                    if (masked(xs[t], ys[t])) continue;
                    w[static_cast<size_t>(y * k + x) * kk + (ys[t] * k + xs[t])] += bw[t];
                }
            }
        }

    // exact mass preservation: whatever interpolation mass a source sheds onto
    // masked positions is returned to it, spread over the in-disk outputs.
    // Quarter turns are permutations (column sums already 1) and stay exact.
    if (!quarter && !in_disk.empty()) {
        for (int s : in_disk) {
            double col = 0.0;
            for (int o = 0; o < kk; ++o) col += w[static_cast<size_t>(o) * kk + s];
            const double deficit = 1.0 - col;
            if (std::abs(deficit) < 1e-12) continue;
            const double share = deficit / static_cast<double>(in_disk.size());
            for (int o : in_disk) w[static_cast<size_t>(o) * kk + s] += share;
        }
    }

    offsets.assign(static_cast<size_t>(kk) + 1, 0);
    taps.clear();
    int32_t cursor = 0;
    for (int o = 0; o < kk; ++o) {
        offsets[static_cast<size_t>(o)] = cursor;
        for (int s = 0; s < kk; ++s) {
            const double v = w[static_cast<size_t>(o) * kk + s];
            if (v == 0.0) continue;
            taps.push_back({static_cast<int32_t>(s), static_cast<T>(v)});
            ++cursor;
        }
    }
    offsets[static_cast<size_t>(kk)] = cursor;
}

}  // namespace

template <typename T>
TensorT<T> rotate_bilinear(const TensorT<T>& t, double angle_ccw) {
    const int w = t.dim(t.ndim() - 1);
    const int h = t.dim(t.ndim() - 2);
    assert(h == w);
    const double turns = angle_ccw / (0.5 * std::numbers::pi);
    const double rturns = std::round(turns);
    if (std::abs(turns - rturns) < 1e-12)
        return rot90_ccw(t, static_cast<int>(rturns) % 4);
    TensorT<T> out(t.shape);
    const int64_t planes = t.numel() / (static_cast<int64_t>(h) * w);
    const double c = (w - 1) * 0.5;
    const double ca = std::cos(-angle_ccw), sa = std::sin(-angle_ccw);
    for (int64_t p = 0; p < planes; ++p) {
        const T* src = t.ptr() + p * h * w;
        T* dst = out.ptr() + p * h * w;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double dx = x - c, dy = y - c;
                const double sx = ca * dx - sa * dy + c;
                const double sy = sa * dx + ca * dy + c;
                const int x0 = static_cast<int>(std::floor(sx));
                const int y0 = static_cast<int>(std::floor(sy));
                const double fx = sx - x0, fy = sy - y0;
                double acc = 0.0;
                const double wt[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
                const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
                const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
                for (int k = 0; k < 4; ++k) {
                    if (xs[k] < 0 || xs[k] >= w || ys[k] < 0 || ys[k] >= h) continue;
                    acc += wt[k] * static_cast<double>(src[static_cast<int64_t>(ys[k]) * w + xs[k]]);
                }
                dst[static_cast<int64_t>(y) * w + x] = static_cast<T>(acc);
            }
    }
    return out;
}

template <typename T>
TensorT<T> group_act(const TensorT<T>& f, int n, int m, int j) {
    assert(f.ndim() == 3 && f.dim(0) == n * m);
    assert((j * 4) % n == 0);
    const int q = (((j * 4) / n) % 4 + 4) % 4;
    const TensorT<T> rot = rot90_ccw(f, q);
    TensorT<T> out(f.shape);
    const int64_t mhw = static_cast<int64_t>(m) * f.dim(1) * f.dim(2);
    for (int g = 0; g < n; ++g) {
        const int src = ((g - j) % n + n) % n;
        std::copy(rot.ptr() + src * mhw, rot.ptr() + (src + 1) * mhw, out.ptr() + g * mhw);
    }
    return out;
}

template <typename T>
const typename GroupOps<T>::Plan& GroupOps<T>::lift_plan(int n, int m_out, int c_in, int k) {
    static std::map<std::tuple<int, int, int, int>, Plan> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_tuple(n, m_out, c_in, k);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;

    Plan plan;
    plan.out_shape = {n * m_out, c_in, k, k};
    plan.block_elems = k * k;
    plan.set_offsets.resize(static_cast<size_t>(n));
    plan.set_taps.resize(static_cast<size_t>(n));
    for (int g = 0; g < n; ++g)
        rotation_taps<T>(k, n, g, plan.set_offsets[static_cast<size_t>(g)],
                         plan.set_taps[static_cast<size_t>(g)]);
    const int64_t kk = static_cast<int64_t>(k) * k;
    for (int g = 0; g < n; ++g)
        for (int o = 0; o < m_out; ++o)
            for (int i = 0; i < c_in; ++i)
                plan.blocks.push_back(
                    {((static_cast<int64_t>(g) * m_out + o) * c_in + i) * kk,
                     (static_cast<int64_t>(o) * c_in + i) * kk, g});
    return cache.emplace(key, std::move(plan)).first->second;
}

template <typename T>
const typename GroupOps<T>::Plan& GroupOps<T>::group_plan(int n, int m_out, int m_in, int k) {
    static std::map<std::tuple<int, int, int, int>, Plan> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_tuple(n, m_out, m_in, k);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;

    Plan plan;
    plan.out_shape = {n * m_out, n * m_in, k, k};
    plan.block_elems = k * k;
    plan.set_offsets.resize(static_cast<size_t>(n));
    plan.set_taps.resize(static_cast<size_t>(n));
    for (int g = 0; g < n; ++g)
        rotation_taps<T>(k, n, g, plan.set_offsets[static_cast<size_t>(g)],
                         plan.set_taps[static_cast<size_t>(g)]);
    const int64_t kk = static_cast<int64_t>(k) * k;
    for (int g = 0; g < n; ++g)
        for (int o = 0; o < m_out; ++o)
            for (int h = 0; h < n; ++h)
                for (int i = 0; i < m_in; ++i) {
                    const int delta = ((h - g) % n + n) % n;
                    plan.blocks.push_back(
                        {(((static_cast<int64_t>(g) * m_out + o) * n + h) * m_in + i) * kk,
                         ((static_cast<int64_t>(o) * m_in + i) * n + delta) * kk, g});
                }
    return cache.emplace(key, std::move(plan)).first->second;
}

template <typename T>
typename Tape<T>::Id GroupOps<T>::lift_conv(Tape<T>& tape, typename Tape<T>::Id x,
                                            typename Tape<T>::Id canonical, int n, int stride,
                                            int pad) {
    const auto& shape = tape.value(canonical).shape;
    assert(shape.size() == 4);
    const auto& plan = lift_plan(n, shape[0], shape[1], shape[3]);
    const auto expanded = tape.gather_blocks(canonical, plan);
    return tape.conv2d(x, expanded, stride, pad);
}

template <typename T>
typename Tape<T>::Id GroupOps<T>::group_conv(Tape<T>& tape, typename Tape<T>::Id x,
                                             typename Tape<T>::Id canonical, int n, int stride,
                                             int pad) {
    const auto& shape = tape.value(canonical).shape;
    assert(shape.size() == 5 && shape[2] == n);
    const auto& plan = group_plan(n, shape[0], shape[1], shape[4]);
    // canonical is [m_out, m_in, n, k, k]; gather_blocks reads flat offsets
    const auto expanded = tape.gather_blocks(canonical, plan);
    return tape.conv2d(x, expanded, stride, pad);
}

template class GroupOps<float>;
template class GroupOps<double>;
template TensorT<float> rotate_bilinear<float>(const TensorT<float>&, double);
template TensorT<double> rotate_bilinear<double>(const TensorT<double>&, double);
template TensorT<float> group_act<float>(const TensorT<float>&, int, int, int);
template TensorT<double> group_act<double>(const TensorT<double>&, int, int, int);

}  // namespace basepose
