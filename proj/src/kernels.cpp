#include "basepose/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>

namespace basepose::kernels {

namespace {
std::atomic<bool> g_parallel{true};
}

bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }
void set_parallel(bool on) { g_parallel.store(on, std::memory_order_relaxed); }
void set_threads(int n) {
    if (n > 0) omp_set_num_threads(n);
}
int thread_count() { return omp_get_max_threads(); }

namespace {

// Accumulate one (co, oh) output row. Inner loop over ow is contiguous in both
// the input row and the output row, so it vectorizes.
template <typename T>
inline void conv_row(const T* x, int ci, int h, int w,
                     const T* k, int kh, int kw,
                     int stride, int pad, T* yrow, int ow,
                     const T* kco, int oh_idx) {
    (void)h;
    for (int c = 0; c < ci; ++c) {
        const T* xc = x + static_cast<int64_t>(c) * h * w;
        const T* kc = kco + static_cast<int64_t>(c) * kh * kw;
        for (int r = 0; r < kh; ++r) {
            const int ih = oh_idx * stride + r - pad;
            if (ih < 0 || ih >= h) continue;
            const T* xrow = xc + static_cast<int64_t>(ih) * w;
            for (int s = 0; s < kw; ++s) {
                const T kv = kc[r * kw + s];
                if (kv == T(0)) continue;
                // valid ow range: 0 <= ow*stride + s - pad < w
                int lo = 0, hi = ow;
                if (stride == 1) {
                    lo = std::max(0, pad - s);
                    hi = std::min(ow, w - s + pad);
                    const T* xp = xrow + lo + s - pad;
                    T* yp = yrow + lo;
                    for (int o = 0; o < hi - lo; ++o) yp[o] += kv * xp[o];
                } else {
                    for (int o = lo; o < hi; ++o) {
                        const int iw = o * stride + s - pad;
                        if (iw < 0 || iw >= w) continue;
                        yrow[o] += kv * xrow[iw];
                    }
                }
            }
        }
    }
}

}  // namespace

template <typename T>
void conv2d_forward_serial(const T* x, int ci, int h, int w,
                           const T* k, int co, int kh, int kw,
                           int stride, int pad, T* y, int oh, int ow) {
    // plain reference loops, used as the oracle-grade path
    for (int o = 0; o < co; ++o)
        for (int i = 0; i < oh; ++i)
            for (int j = 0; j < ow; ++j) {
                T acc = T(0);
                for (int c = 0; c < ci; ++c)
                    for (int r = 0; r < kh; ++r)
                        for (int s = 0; s < kw; ++s) {
                            const int ih = i * stride + r - pad;
                            const int iw = j * stride + s - pad;
                            if (ih < 0 || ih >= h || iw < 0 || iw >= w) continue;
                            acc += x[(static_cast<int64_t>(c) * h + ih) * w + iw] *
                                   k[((static_cast<int64_t>(o) * ci + c) * kh + r) * kw + s];
                        }
                y[(static_cast<int64_t>(o) * oh + i) * ow + j] = acc;
            }
}

template <typename T>
void conv2d_forward_parallel(const T* x, int ci, int h, int w,
                             const T* k, int co, int kh, int kw,
                             int stride, int pad, T* y, int oh, int ow) {
    const int64_t rows = static_cast<int64_t>(co) * oh;
#pragma omp parallel for schedule(static)
    for (int64_t rc = 0; rc < rows; ++rc) {
        const int o = static_cast<int>(rc / oh);
        const int i = static_cast<int>(rc % oh);
        T* yrow = y + (static_cast<int64_t>(o) * oh + i) * ow;
        std::fill(yrow, yrow + ow, T(0));
        conv_row(x, ci, h, w, k, kh, kw, stride, pad, yrow, ow,
                 k + static_cast<int64_t>(o) * ci * kh * kw, i);
    }
}

template <typename T>
void conv2d_forward(const T* x, int ci, int h, int w,
                    const T* k, int co, int kh, int kw,
                    int stride, int pad, T* y, int oh, int ow) {
    if (parallel_enabled())
        conv2d_forward_parallel(x, ci, h, w, k, co, kh, kw, stride, pad, y, oh, ow);
    else {
        // same row kernel, single thread; keeps serial/parallel bit-identical
        for (int64_t rc = 0; rc < static_cast<int64_t>(co) * oh; ++rc) {
            const int o = static_cast<int>(rc / oh);
            const int i = static_cast<int>(rc % oh);
            T* yrow = y + (static_cast<int64_t>(o) * oh + i) * ow;
            std::fill(yrow, yrow + ow, T(0));
            conv_row(x, ci, h, w, k, kh, kw, stride, pad, yrow, ow,
                     k + static_cast<int64_t>(o) * ci * kh * kw, i);
        }
    }
}

template <typename T>
void conv2d_backward_input_serial(const T* gy, int co, int oh, int ow,
                                  const T* k, int ci, int kh, int kw,
                                  int stride, int pad, T* gx, int h, int w) {
    for (int o = 0; o < co; ++o)
        for (int i = 0; i < oh; ++i)
            for (int j = 0; j < ow; ++j) {
                const T g = gy[(static_cast<int64_t>(o) * oh + i) * ow + j];
                if (g == T(0)) continue;
                for (int c = 0; c < ci; ++c)
                    for (int r = 0; r < kh; ++r)
                        for (int s = 0; s < kw; ++s) {
                            const int ih = i * stride + r - pad;
                            const int iw = j * stride + s - pad;
                            if (ih < 0 || ih >= h || iw < 0 || iw >= w) continue;
                            gx[(static_cast<int64_t>(c) * h + ih) * w + iw] +=
                                g * k[((static_cast<int64_t>(o) * ci + c) * kh + r) * kw + s];
                        }
            }
}

template <typename T>
void conv2d_backward_input_parallel(const T* gy, int co, int oh, int ow,
                                    const T* k, int ci, int kh, int kw,
                                    int stride, int pad, T* gx, int h, int w) {
    // each thread owns a slab of input channels; all writes stay inside it
#pragma omp parallel for schedule(static)
    for (int c = 0; c < ci; ++c) {
        T* gxc = gx + static_cast<int64_t>(c) * h * w;
        for (int o = 0; o < co; ++o) {
            const T* kc = k + ((static_cast<int64_t>(o) * ci + c) * kh) * kw;
            const T* gyo = gy + static_cast<int64_t>(o) * oh * ow;
            for (int r = 0; r < kh; ++r)
                for (int s = 0; s < kw; ++s) {
                    const T kv = kc[r * kw + s];
                    if (kv == T(0)) continue;
                    for (int i = 0; i < oh; ++i) {
                        const int ih = i * stride + r - pad;
                        if (ih < 0 || ih >= h) continue;
                        T* gxrow = gxc + static_cast<int64_t>(ih) * w;
                        const T* gyrow = gyo + static_cast<int64_t>(i) * ow;
                        if (stride == 1) {
                            const int lo = std::max(0, pad - s);
                            const int hi = std::min(ow, w - s + pad);
                            T* gp = gxrow + lo + s - pad;
                            const T* yp = gyrow + lo;
                            for (int t = 0; t < hi - lo; ++t) gp[t] += kv * yp[t];
                        } else {
                            for (int j = 0; j < ow; ++j) {
                                const int iw = j * stride + s - pad;
                                if (iw < 0 || iw >= w) continue;
                                gxrow[iw] += kv * gyrow[j];
                            }
                        }
                    }
                }
        }
    }
}

template <typename T>
void conv2d_backward_input(const T* gy, int co, int oh, int ow,
                           const T* k, int ci, int kh, int kw,
                           int stride, int pad, T* gx, int h, int w) {
    if (parallel_enabled())
        conv2d_backward_input_parallel(gy, co, oh, ow, k, ci, kh, kw, stride, pad, gx, h, w);
    else
        conv2d_backward_input_serial(gy, co, oh, ow, k, ci, kh, kw, stride, pad, gx, h, w);
}

template <typename T>
void conv2d_backward_kernel_serial(const T* x, int ci, int h, int w,
                                   const T* gy, int co, int oh, int ow,
                                   int kh, int kw, int stride, int pad, T* gk) {
    for (int o = 0; o < co; ++o)
        for (int c = 0; c < ci; ++c)
            for (int r = 0; r < kh; ++r)
                for (int s = 0; s < kw; ++s) {
                    T acc = T(0);
                    for (int i = 0; i < oh; ++i)
                        for (int j = 0; j < ow; ++j) {
                            const int ih = i * stride + r - pad;
                            const int iw = j * stride + s - pad;
                            if (ih < 0 || ih >= h || iw < 0 || iw >= w) continue;
                            acc += x[(static_cast<int64_t>(c) * h + ih) * w + iw] *
                                   gy[(static_cast<int64_t>(o) * oh + i) * ow + j];
                        }
                    gk[((static_cast<int64_t>(o) * ci + c) * kh + r) * kw + s] += acc;
                }
}

template <typename T>
void conv2d_backward_kernel_parallel(const T* x, int ci, int h, int w,
                                     const T* gy, int co, int oh, int ow,
                                     int kh, int kw, int stride, int pad, T* gk) {
#pragma omp parallel for schedule(static)
    for (int o = 0; o < co; ++o) {
        const T* gyo = gy + static_cast<int64_t>(o) * oh * ow;
        for (int c = 0; c < ci; ++c) {
            const T* xc = x + static_cast<int64_t>(c) * h * w;
            T* gko = gk + ((static_cast<int64_t>(o) * ci + c) * kh) * kw;
            for (int r = 0; r < kh; ++r)
                for (int s = 0; s < kw; ++s) {
                    T acc = T(0);
                    for (int i = 0; i < oh; ++i) {
                        const int ih = i * stride + r - pad;
                        if (ih < 0 || ih >= h) continue;
                        const T* xrow = xc + static_cast<int64_t>(ih) * w;
                        const T* gyrow = gyo + static_cast<int64_t>(i) * ow;
                        if (stride == 1) {
                            const int lo = std::max(0, pad - s);
                            const int hi = std::min(ow, w - s + pad);
                            const T* xp = xrow + lo + s - pad;
                            const T* yp = gyrow + lo;
                            for (int t = 0; t < hi - lo; ++t) acc += xp[t] * yp[t];
                        } else {
                            for (int j = 0; j < ow; ++j) {
                                const int iw = j * stride + s - pad;
                                if (iw < 0 || iw >= w) continue;
                                acc += xrow[iw] * gyrow[j];
                            }
                        }
                    }
                    gko[r * kw + s] += acc;
                }
        }
    }
}

template <typename T>
void conv2d_backward_kernel(const T* x, int ci, int h, int w,
                            const T* gy, int co, int oh, int ow,
                            int kh, int kw, int stride, int pad, T* gk) {
    if (parallel_enabled())
        conv2d_backward_kernel_parallel(x, ci, h, w, gy, co, oh, ow, kh, kw, stride, pad, gk);
    else
        conv2d_backward_kernel_serial(x, ci, h, w, gy, co, oh, ow, kh, kw, stride, pad, gk);
}

template <typename T>
void matmul_serial(const T* a, const T* b, T* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        T* crow = c + static_cast<int64_t>(i) * n;
        std::fill(crow, crow + n, T(0));
        for (int p = 0; p < k; ++p) {
            const T av = a[static_cast<int64_t>(i) * k + p];
            if (av == T(0)) continue;
            const T* brow = b + static_cast<int64_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

template <typename T>
void matmul_parallel(const T* a, const T* b, T* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        T* crow = c + static_cast<int64_t>(i) * n;
        std::fill(crow, crow + n, T(0));
        for (int p = 0; p < k; ++p) {
            const T av = a[static_cast<int64_t>(i) * k + p];
            if (av == T(0)) continue;
            const T* brow = b + static_cast<int64_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

template <typename T>
void matmul(const T* a, const T* b, T* c, int m, int k, int n) {
    // row-parallel pays off only for large m; the GAT matrices are small
    if (parallel_enabled() && static_cast<int64_t>(m) * k * n > 1 << 16)
        matmul_parallel(a, b, c, m, k, n);
    else
        matmul_serial(a, b, c, m, k, n);
}

#define BASEPOSE_INSTANTIATE(T)                                                              \
    template void conv2d_forward_serial<T>(const T*, int, int, int, const T*, int, int,     \
                                           int, int, int, T*, int, int);                     \
    template void conv2d_forward_parallel<T>(const T*, int, int, int, const T*, int, int,   \
                                             int, int, int, T*, int, int);                   \
    template void conv2d_forward<T>(const T*, int, int, int, const T*, int, int, int, int,  \
                                    int, T*, int, int);                                      \
    template void conv2d_backward_input_serial<T>(const T*, int, int, int, const T*, int,   \
                                                  int, int, int, int, T*, int, int);         \
    template void conv2d_backward_input_parallel<T>(const T*, int, int, int, const T*, int, \
                                                    int, int, int, int, T*, int, int);       \
    template void conv2d_backward_input<T>(const T*, int, int, int, const T*, int, int,     \
                                           int, int, int, T*, int, int);                     \
    template void conv2d_backward_kernel_serial<T>(const T*, int, int, int, const T*, int,  \
                                                   int, int, int, int, int, int, T*);        \
    template void conv2d_backward_kernel_parallel<T>(const T*, int, int, int, const T*,     \
                                                     int, int, int, int, int, int, int,     \
                                                     T*);                                    \
    template void conv2d_backward_kernel<T>(const T*, int, int, int, const T*, int, int,    \
                                            int, int, int, int, int, T*);                    \
    template void matmul_serial<T>(const T*, const T*, T*, int, int, int);                   \
    template void matmul_parallel<T>(const T*, const T*, T*, int, int, int);                 \
    template void matmul<T>(const T*, const T*, T*, int, int, int);

BASEPOSE_INSTANTIATE(float)
BASEPOSE_INSTANTIATE(double)
#undef BASEPOSE_INSTANTIATE

}  // namespace basepose::kernels
