#pragma once

#include <cstdint>

namespace basepose::kernels {

// Process-wide switch between the OpenMP kernels and the serial reference
// path. The reference implementations are the plain textbook loops; the
// parallel ones are restructured so every output element is owned by exactly
// one thread, which keeps results bit-identical across thread counts.
bool parallel_enabled();
void set_parallel(bool on);
void set_threads(int n);  // 0 = leave to the runtime
int thread_count();

// y[co,oh,ow] = sum_{ci,kh,kw} x[ci, oh*stride+kh-pad, ow*stride+kw-pad] * w[co,ci,kh,kw]
// Cross-correlation semantics, zero padding. Output buffer is overwritten.
template <typename T>
void conv2d_forward_serial(const T* x, int ci, int h, int w,
                           const T* k, int co, int kh, int kw,
                           int stride, int pad, T* y, int oh, int ow);
template <typename T>
void conv2d_forward_parallel(const T* x, int ci, int h, int w,
                             const T* k, int co, int kh, int kw,
                             int stride, int pad, T* y, int oh, int ow);
template <typename T>
void conv2d_forward(const T* x, int ci, int h, int w,
                    const T* k, int co, int kh, int kw,
                    int stride, int pad, T* y, int oh, int ow);

// gx += dL/dx given gy = dL/dy; gx must be pre-sized [ci,h,w].
template <typename T>
void conv2d_backward_input_serial(const T* gy, int co, int oh, int ow,
                                  const T* k, int ci, int kh, int kw,
                                  int stride, int pad, T* gx, int h, int w);
template <typename T>
void conv2d_backward_input_parallel(const T* gy, int co, int oh, int ow,
                                    const T* k, int ci, int kh, int kw,
                                    int stride, int pad, T* gx, int h, int w);
template <typename T>
void conv2d_backward_input(const T* gy, int co, int oh, int ow,
                           const T* k, int ci, int kh, int kw,
                           int stride, int pad, T* gx, int h, int w);

// gk += dL/dk; gk pre-sized [co,ci,kh,kw].
template <typename T>
void conv2d_backward_kernel_serial(const T* x, int ci, int h, int w,
                                   const T* gy, int co, int oh, int ow,
                                   int kh, int kw, int stride, int pad, T* gk);
template <typename T>
void conv2d_backward_kernel_parallel(const T* x, int ci, int h, int w,
                                     const T* gy, int co, int oh, int ow,
                                     int kh, int kw, int stride, int pad, T* gk);
template <typename T>
void conv2d_backward_kernel(const T* x, int ci, int h, int w,
                            const T* gy, int co, int oh, int ow,
                            int kh, int kw, int stride, int pad, T* gk);

// C[m,n] = A[m,k] * B[k,n]  (C overwritten)
template <typename T>
void matmul_serial(const T* a, const T* b, T* c, int m, int k, int n);
template <typename T>
void matmul_parallel(const T* a, const T* b, T* c, int m, int k, int n);
template <typename T>
void matmul(const T* a, const T* b, T* c, int m, int k, int n);

inline void conv2d_out_size(int h, int w, int kh, int kw, int stride, int pad,
                            int& oh, int& ow) {
    oh = (h + 2 * pad - kh) / stride + 1;
    ow = (w + 2 * pad - kw) / stride + 1;
}

}  // namespace basepose::kernels
