#include "basepose/tape.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <memory>

#include "basepose/kernels.hpp"

namespace basepose {

template <typename T>
typename Tape<T>::Id Tape<T>::emit(TensorT<T> val, bool needs_grad,
                                   std::function<void(Tape&)> back) {
    Node n;
    n.val = std::move(val);
    n.needs_grad = needs_grad;
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
}

template <typename T>
typename Tape<T>::Id Tape<T>::input(TensorT<T> value, bool needs_grad) {
    return emit(std::move(value), needs_grad, nullptr);
}

template <typename T>
TensorT<T>& Tape<T>::grad_buf(Id id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.grad_alloc) {
        n.grd = TensorT<T>(n.val.shape);
        n.grad_alloc = true;
    }
    return n.grd;
}

template <typename T>
const TensorT<T>& Tape<T>::grad(Id id) {
    return grad_buf(id);
}

template <typename T>
void Tape<T>::backward(Id out) {
    assert(nodes_[static_cast<size_t>(out)].val.numel() == 1);
    grad_buf(out)[0] = T(1);
    for (Id id = out; id >= 0; --id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (n.grad_alloc && n.back) n.back(*this);
    }
}

template <typename T>
void Tape<T>::clear() {
    nodes_.clear();
}

// ---------- elementwise ----------

template <typename T>
typename Tape<T>::Id Tape<T>::add(Id a, Id b) {
    assert(value(a).same_shape(value(b)));
    TensorT<T> out = value(a);
    const TensorT<T>& vb = value(b);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] += vb[i];
    const bool ng = wants(a) || wants(b);
    return emit(std::move(out), ng, [a, b, me = Id(nodes_.size())](Tape& t) {
        const TensorT<T>& g = t.grad_buf(me);
        if (t.wants(a)) {
            TensorT<T>& ga = t.grad_buf(a);
            for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
        }
        if (t.wants(b)) {
            TensorT<T>& gb = t.grad_buf(b);
            for (int64_t i = 0; i < g.numel(); ++i) gb[i] += g[i];
        }
    });
}

template <typename T>
typename Tape<T>::Id Tape<T>::sub(Id a, Id b) {
    assert(value(a).same_shape(value(b)));
    TensorT<T> out = value(a);
    const TensorT<T>& vb = value(b);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] -= vb[i];
    const bool ng = wants(a) || wants(b);
    return emit(std::move(out), ng, [a, b, me = Id(nodes_.size())](Tape& t) {
        const TensorT<T>& g = t.grad_buf(me);
        if (t.wants(a)) {
            TensorT<T>& ga = t.grad_buf(a);
            for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
        }
        if (t.wants(b)) {
            TensorT<T>& gb = t.grad_buf(b);
            for (int64_t i = 0; i < g.numel(); ++i) gb[i] -= g[i];
        }
    });
}

template <typename T>
typename Tape<T>::Id Tape<T>::mul(Id a, Id b) {
    assert(value(a).same_shape(value(b)));
    TensorT<T> out = value(a);
    const TensorT<T>& vb = value(b);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] *= vb[i];
    const bool ng = wants(a) || wants(b);
    return emit(std::move(out), ng, [a, b, me = Id(nodes_.size())](Tape& t) {
        const TensorT<T>& g = t.grad_buf(me);
        if (t.wants(a)) {
            TensorT<T>& ga = t.grad_buf(a);
            const TensorT<T>& vb2 = t.value(b);
            for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * vb2[i];
        }
        if (t.wants(b)) {
            TensorT<T>& gb = t.grad_buf(b);
            const TensorT<T>& va = t.value(a);
            for (int64_t i = 0; i < g.numel(); ++i) gb[i] += g[i] * va[i];
        }
    });
}

template <typename T>
typename Tape<T>::Id Tape<T>::scale(Id a, T s) {
    TensorT<T> out = value(a);
    for (auto& v : out.data) v *= s;
    return emit(std::move(out), wants(a), [a, s, me = Id(nodes_.size())](Tape& t) {
        if (!t.wants(a)) return;
        const TensorT<T>& g = t.grad_buf(me);
        TensorT<T>& ga = t.grad_buf(a);
        for (int64_t i = 0; i < g.numel(); ++i) ga[i] += s * g[i];
    });
}

template <typename T>
typename Tape<T>::Id Tape<T>::add_scalar(Id a, T s) {
    TensorT<T> out = value(a);
    for (auto& v : out.data) v += s;
    return emit(std::move(out), wants(a), [a, me = Id(nodes_.size())](Tape& t) {
        if (!t.wants(a)) return;
        const TensorT<T>& g = t.grad_buf(me);
        TensorT<T>& ga = t.grad_buf(a);
        for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
    });
}

template <typename T>
typename Tape<T>::Id Tape<T>::relu(Id a) {
    TensorT<T> out = value(a);
    for (auto& v : out.data) v = v > T(0) ? v : T(0);
    return emit(std::move(out), wants(a), [a, me = Id(nodes_.size())](Tape& t) {
        if (!t.wants(a)) return;
        const TensorT<T>& g = t.grad_buf(me);
        const TensorT<T>& va = t.value(a);
        TensorT<T>& ga = t.grad_buf(a);
        for (int64_t i = 0; i < g.numel(); ++i)
            if (va[i] > T(0)) ga[i] += g[i];
    });
}

template <typename T>
typename Tape<T>::Id Tape<T>::leaky_relu(Id a, T slope) {
    TensorT<T> out = value(a);
    for (auto& v : out.data) v = v > T(0) ? v : slope * v;
    return emit(std::move(out), wants(a), [a, slope, me = Id(nodes_.size())](Tape& t) {
        if (!t.wants(a)) return;
        const TensorT<T>& g = t.grad_buf(me);
        const TensorT<T>& va = t.value(a);
        TensorT<T>& ga = t.grad_buf(a);
        for (int64_t i = 0; i < g.numel(); ++i) ga[i] += (va[i] > T(0) ? T(1) : slope) * g[i];
    });
}

template <typename T>
typename Tape<T>::Id Tape<T>::sigmoid(Id a) {
    TensorT<T> out = value(a);
    for (auto& v : out.data) v = T(1) / (T(1) + std::exp(-v));
    return emit(std::move(out), wants(a), [a, me = Id(nodes_.size())](Tape& t) {
        if (!t.wants(a)) return;
        const TensorT<T>& g = t.grad_buf(me);
        const TensorT<T>& y = t.value(me);
        TensorT<T>& ga = t.grad_buf(a);
        for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * y[i] * (T(1) - y[i]);
    });
}

template <typename T>
typename Tape<T>::Id Tape<T>::log(Id a) {
    TensorT<T> out = value(a);
    for (auto& v : out.data) v = std::log(v);
    return emit(std::move(out), wants(a), [a, me = Id(nodes_.size())](Tape& t) {
        if (!t.wants(a)) return;
        const TensorT<T>& g = t.grad_buf(me);
        const TensorT<T>& va = t.value(a);
        TensorT<T>& ga = t.grad_buf(a);
        for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i] / va[i];
    });
}

template <typename T>
typename Tape<T>::Id Tape<T>::reshape(Id a, std::vector<int> shape) {
    assert(TensorT<T>::numel_of(shape) == value(a).numel());
    TensorT<T> out = value(a);
    out.shape = std::move(shape);
    return emit(std::move(out), wants(a), [a, me = Id(nodes_.size())](Tape& t) {
        if (!t.wants(a)) return;
        const TensorT<T>& g = t.grad_buf(me);
        TensorT<T>& ga = t.grad_buf(a);
        for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
    });
}

template <typename T>
typename Tape<T>::Id Tape<T>::concat_ch(Id a, Id b) {
    const TensorT<T>& va = value(a);
    const TensorT<T>& vb = value(b);
    assert(va.ndim() == 3 && vb.ndim() == 3 && va.dim(1) == vb.dim(1) && va.dim(2) == vb.dim(2));
    TensorT<T> out({va.dim(0) + vb.dim(0), va.dim(1), va.dim(2)});
    std::copy(va.data.begin(), va.data.end(), out.data.begin());
    std::copy(vb.data.begin(), vb.data.end(), out.data.begin() + va.numel());
    const bool ng = wants(a) || wants(b);
    return emit(std::move(out), ng, [a, b, me = Id(nodes_.size())](Tape& t) {
        const TensorT<T>& g = t.grad_buf(me);
        const int64_t na = t.value(a).numel();
        if (t.wants(a)) {
            TensorT<T>& ga = t.grad_buf(a);
            for (int64_t i = 0; i < na; ++i) ga[i] += g[i];
        }
        if (t.wants(b)) {
            TensorT<T>& gb = t.grad_buf(b);
            for (int64_t i = 0; i < gb.numel(); ++i) gb[i] += g[na + i];
        }
    });
}

template <typename T>
typename Tape<T>::Id Tape<T>::group_concat_ch(Id a, Id b, int n) {
    const TensorT<T>& va = value(a);
    const TensorT<T>& vb = value(b);
    assert(va.ndim() == 3 && vb.ndim() == 3 && va.dim(1) == vb.dim(1) &&
           va.dim(2) == vb.dim(2));
    assert(va.dim(0) % n == 0 && vb.dim(0) % n == 0);
    const int ma = va.dim(0) / n;
    const int mb = vb.dim(0) / n;
    const int64_t hw = static_cast<int64_t>(va.dim(1)) * va.dim(2);
    TensorT<T> out({n * (ma + mb), va.dim(1), va.dim(2)});
    for (int g = 0; g < n; ++g) {
        std::copy(va.ptr() + static_cast<int64_t>(g) * ma * hw,
                  va.ptr() + static_cast<int64_t>(g + 1) * ma * hw,
                  out.ptr() + static_cast<int64_t>(g) * (ma + mb) * hw);
        std::copy(vb.ptr() + static_cast<int64_t>(g) * mb * hw,
                  vb.ptr() + static_cast<int64_t>(g + 1) * mb * hw,
                  out.ptr() + (static_cast<int64_t>(g) * (ma + mb) + ma) * hw);
    }
    const bool ng = wants(a) || wants(b);
    return emit(std::move(out), ng, [a, b, n, ma, mb, hw, me = Id(nodes_.size())](Tape& t) {
        const TensorT<T>& g = t.grad_buf(me);
        if (t.wants(a)) {
            TensorT<T>& ga = t.grad_buf(a);
            for (int s = 0; s < n; ++s) {
                const T* src = g.ptr() + static_cast<int64_t>(s) * (ma + mb) * hw;
                T* dst = ga.ptr() + static_cast<int64_t>(s) * ma * hw;
                for (int64_t i = 0; i < static_cast<int64_t>(ma) * hw; ++i) dst[i] += src[i];
            }
        }
        if (t.wants(b)) {
            TensorT<T>& gb = t.grad_buf(b);
            for (int s = 0; s < n; ++s) {
                const T* src = g.ptr() + (static_cast<int64_t>(s) * (ma + mb) + ma) * hw;
                T* dst = gb.ptr() + static_cast<int64_t>(s) * mb * hw;
                for (int64_t i = 0; i < static_cast<int64_t>(mb) * hw; ++i) dst[i] += src[i];
            }
        }
    });
}

template <typename T>
typename Tape<T>::Id Tape<T>::slice_ch(Id a, int from, int count) {
    const TensorT<T>& va = value(a);
    assert(va.ndim() == 3 && from >= 0 && from + count <= va.dim(0));
    const int64_t hw = static_cast<int64_t>(va.dim(1)) * va.dim(2);
    TensorT<T> out({count, va.dim(1), va.dim(2)});
    std::copy(va.data.begin() + from * hw, va.data.begin() + (from + count) * hw,
              out.data.begin());
    return emit(std::move(out), wants(a), [a, from, hw, me = Id(nodes_.size())](Tape& t) {
        if (!t.wants(a)) return;
        const TensorT<T>& g = t.grad_buf(me);
        TensorT<T>& ga = t.grad_buf(a);
        for (int64_t i = 0; i < g.numel(); ++i) ga[from * hw + i] += g[i];
    });
}

template <typename T>
typename Tape<T>::Id Tape<T>::sum(Id a) {
    TensorT<T> out(std::vector<int>{1});
    T acc = T(0);
    for (const T& v : value(a).data) acc += v;
    out[0] = acc;
    return emit(std::move(out), wants(a), [a, me = Id(nodes_.size())](Tape& t) {
        if (!t.wants(a)) return;
        const T g = t.grad_buf(me)[0];
        TensorT<T>& ga = t.grad_buf(a);
        for (auto& v : ga.data) v += g;
    });
}

template <typename T>
typename Tape<T>::Id Tape<T>::mean(Id a) {
    const int64_t n = value(a).numel();
    Id s = sum(a);
    return scale(s, T(1) / static_cast<T>(n));
}

template <typename T>
typename Tape<T>::Id Tape<T>::pick(Id vec, int idx) {
    const TensorT<T>& v = value(vec);
    assert(idx >= 0 && idx < v.numel());
    TensorT<T> out(std::vector<int>{1});
    out[0] = v[idx];
    return emit(std::move(out), wants(vec), [vec, idx, me = Id(nodes_.size())](Tape& t) {
        if (!t.wants(vec)) return;
        t.grad_buf(vec)[idx] += t.grad_buf(me)[0];
    });
}

template <typename T>
typename Tape<T>::Id Tape<T>::scale_var(Id a, Id s) {
    assert(value(s).numel() == 1);
    const T sv = value(s)[0];
    TensorT<T> out = value(a);
    for (auto& v : out.data) v *= sv;
    const bool ng = wants(a) || wants(s);
    return emit(std::move(out), ng, [a, s, sv, me = Id(nodes_.size())](Tape& t) {
        const TensorT<T>& g = t.grad_buf(me);
        if (t.wants(a)) {
            TensorT<T>& ga = t.grad_buf(a);
            for (int64_t i = 0; i < g.numel(); ++i) ga[i] += sv * g[i];
        }
        if (t.wants(s)) {
            const TensorT<T>& va = t.value(a);
            T acc = T(0);
            for (int64_t i = 0; i < g.numel(); ++i) acc += g[i] * va[i];
            t.grad_buf(s)[0] += acc;
        }
    });
}

template <typename T>
typename Tape<T>::Id Tape<T>::shift_var(Id a, Id b) {
    assert(value(b).numel() == 1);
    const T bv = value(b)[0];
    TensorT<T> out = value(a);
    for (auto& v : out.data) v += bv;
    const bool ng = wants(a) || wants(b);
    return emit(std::move(out), ng, [a, b, me = Id(nodes_.size())](Tape& t) {
        const TensorT<T>& g = t.grad_buf(me);
        if (t.wants(a)) {
            TensorT<T>& ga = t.grad_buf(a);
            for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
        }
        if (t.wants(b)) {
            T acc = T(0);
            for (int64_t i = 0; i < g.numel(); ++i) acc += g[i];
            t.grad_buf(b)[0] += acc;
        }
    });
}

template <typename T>
typename Tape<T>::Id Tape<T>::rsqrt_eps(Id a, T eps) {
    TensorT<T> out = value(a);
    for (auto& v : out.data) v = T(1) / std::sqrt(v + eps);
    return emit(std::move(out), wants(a), [a, me = Id(nodes_.size())](Tape& t) {
        if (!t.wants(a)) return;
        const TensorT<T>& g = t.grad_buf(me);
        const TensorT<T>& y = t.value(me);
        TensorT<T>& ga = t.grad_buf(a);
        for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * T(-0.5) * y[i] * y[i] * y[i];
    });
}

// ---------- dense NN ----------

template <typename T>
typename Tape<T>::Id Tape<T>::linear(Id x, Id w, Id b) {
    const TensorT<T>& vx = value(x);
    const TensorT<T>& vw = value(w);
    const bool batched = vx.ndim() == 2;
    const int rows = batched ? vx.dim(0) : 1;
    const int nin = batched ? vx.dim(1) : vx.dim(0);
    const int nout = vw.dim(0);
    assert(vw.ndim() == 2 && vw.dim(1) == nin);
    TensorT<T> out(batched ? std::vector<int>{rows, nout} : std::vector<int>{nout});
    for (int r = 0; r < rows; ++r) {
        const T* xr = vx.ptr() + static_cast<int64_t>(r) * nin;
        T* yr = out.ptr() + static_cast<int64_t>(r) * nout;
        for (int o = 0; o < nout; ++o) {
            const T* wr = vw.ptr() + static_cast<int64_t>(o) * nin;
            T acc = b != kNone ? value(b)[o] : T(0);
            for (int i = 0; i < nin; ++i) acc += xr[i] * wr[i];
            yr[o] = acc;
        }
    }
    const bool ng = wants(x) || wants(w) || (b != kNone && wants(b));
    return emit(std::move(out), ng,
                [x, w, b, rows, nin, nout, me = Id(nodes_.size())](Tape& t) {
                    const TensorT<T>& g = t.grad_buf(me);
                    const TensorT<T>& vx2 = t.value(x);
                    const TensorT<T>& vw2 = t.value(w);
                    if (t.wants(x)) {
                        TensorT<T>& gx = t.grad_buf(x);
                        for (int r = 0; r < rows; ++r)
                            for (int o = 0; o < nout; ++o) {
                                const T gv = g[static_cast<int64_t>(r) * nout + o];
                                const T* wr = vw2.ptr() + static_cast<int64_t>(o) * nin;
                                T* gxr = gx.ptr() + static_cast<int64_t>(r) * nin;
                                for (int i = 0; i < nin; ++i) gxr[i] += gv * wr[i];
                            }
                    }
                    if (t.wants(w)) {
                        TensorT<T>& gw = t.grad_buf(w);
                        for (int r = 0; r < rows; ++r)
                            for (int o = 0; o < nout; ++o) {
                                const T gv = g[static_cast<int64_t>(r) * nout + o];
                                const T* xr = vx2.ptr() + static_cast<int64_t>(r) * nin;
                                T* gwr = gw.ptr() + static_cast<int64_t>(o) * nin;
                                for (int i = 0; i < nin; ++i) gwr[i] += gv * xr[i];
                            }
                    }
                    if (b != Tape::kNone && t.wants(b)) {
                        TensorT<T>& gb = t.grad_buf(b);
                        for (int r = 0; r < rows; ++r)
                            for (int o = 0; o < nout; ++o)
                                gb[o] += g[static_cast<int64_t>(r) * nout + o];
                    }
                });
}

template <typename T>
typename Tape<T>::Id Tape<T>::matmul(Id a, Id b) {
    const TensorT<T>& va = value(a);
    const TensorT<T>& vb = value(b);
    assert(va.ndim() == 2 && vb.ndim() == 2 && va.dim(1) == vb.dim(0));
    const int m = va.dim(0), k = va.dim(1), n = vb.dim(1);
    TensorT<T> out({m, n});
    kernels::matmul(va.ptr(), vb.ptr(), out.ptr(), m, k, n);
    const bool ng = wants(a) || wants(b);
    return emit(std::move(out), ng, [a, b, m, k, n, me = Id(nodes_.size())](Tape& t) {
        const TensorT<T>& g = t.grad_buf(me);
        if (t.wants(a)) {  // gA += g * B^T
            TensorT<T>& ga = t.grad_buf(a);
            const TensorT<T>& vb2 = t.value(b);
            for (int i = 0; i < m; ++i)
                for (int p = 0; p < k; ++p) {
                    T acc = T(0);
                    const T* grow = g.ptr() + static_cast<int64_t>(i) * n;
                    const T* brow = vb2.ptr() + static_cast<int64_t>(p) * n;
                    for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
                    ga[static_cast<int64_t>(i) * k + p] += acc;
                }
        }
        if (t.wants(b)) {  // gB += A^T * g
            TensorT<T>& gb = t.grad_buf(b);
            const TensorT<T>& va2 = t.value(a);
            for (int i = 0; i < m; ++i) {
                const T* arow = va2.ptr() + static_cast<int64_t>(i) * k;
                const T* grow = g.ptr() + static_cast<int64_t>(i) * n;
                for (int p = 0; p < k; ++p) {
                    const T av = arow[p];
                    if (av == T(0)) continue;
                    T* gbrow = gb.ptr() + static_cast<int64_t>(p) * n;
                    for (int j = 0; j < n; ++j) gbrow[j] += av * grow[j];
                }
            }
        }
    });
}

template <typename T>
typename Tape<T>::Id Tape<T>::conv2d(Id x, Id k, int stride, int pad) {
    const TensorT<T>& vx = value(x);
    const TensorT<T>& vk = value(k);
    assert(vx.ndim() == 3 && vk.ndim() == 4 && vk.dim(1) == vx.dim(0));
    const int ci = vx.dim(0), h = vx.dim(1), w = vx.dim(2);
    const int co = vk.dim(0), kh = vk.dim(2), kw = vk.dim(3);
    int oh, ow;
    kernels::conv2d_out_size(h, w, kh, kw, stride, pad, oh, ow);
    assert(oh > 0 && ow > 0);
    TensorT<T> out({co, oh, ow});
    kernels::conv2d_forward(vx.ptr(), ci, h, w, vk.ptr(), co, kh, kw, stride, pad,
                            out.ptr(), oh, ow);
    const bool ng = wants(x) || wants(k);
    return emit(std::move(out), ng,
                [x, k, ci, h, w, co, kh, kw, stride, pad, oh, ow,
                 me = Id(nodes_.size())](Tape& t) {
                    const TensorT<T>& g = t.grad_buf(me);
                    if (t.wants(x)) {
                        TensorT<T>& gx = t.grad_buf(x);
                        kernels::conv2d_backward_input(g.ptr(), co, oh, ow, t.value(k).ptr(),
                                                       ci, kh, kw, stride, pad, gx.ptr(), h, w);
                    }
                    if (t.wants(k)) {
                        TensorT<T>& gk = t.grad_buf(k);
                        kernels::conv2d_backward_kernel(t.value(x).ptr(), ci, h, w, g.ptr(),
                                                        co, oh, ow, kh, kw, stride, pad,
                                                        gk.ptr());
                    }
                });
}

template <typename T>
typename Tape<T>::Id Tape<T>::bias_add_ch(Id x, Id b) {
    const TensorT<T>& vx = value(x);
    const TensorT<T>& vb = value(b);
    assert(vx.ndim() == 3 && vb.ndim() == 1 && vx.dim(0) % vb.dim(0) == 0);
    const int c = vx.dim(0);
    const int nb = vb.dim(0);
    const int64_t hw = static_cast<int64_t>(vx.dim(1)) * vx.dim(2);
    TensorT<T> out = vx;
    for (int ch = 0; ch < c; ++ch) {
        const T bv = vb[ch % nb];
        T* p = out.ptr() + ch * hw;
        for (int64_t i = 0; i < hw; ++i) p[i] += bv;
    }
    const bool ng = wants(x) || wants(b);
    return emit(std::move(out), ng, [x, b, c, nb, hw, me = Id(nodes_.size())](Tape& t) {
        const TensorT<T>& g = t.grad_buf(me);
        if (t.wants(x)) {
            TensorT<T>& gx = t.grad_buf(x);
            for (int64_t i = 0; i < g.numel(); ++i) gx[i] += g[i];
        }
        if (t.wants(b)) {
            TensorT<T>& gb = t.grad_buf(b);
            for (int ch = 0; ch < c; ++ch) {
                const T* p = g.ptr() + ch * hw;
                T acc = T(0);
                for (int64_t i = 0; i < hw; ++i) acc += p[i];
                gb[ch % nb] += acc;
            }
        }
    });
}

template <typename T>
typename Tape<T>::Id Tape<T>::max_pool2(Id x) {
    const TensorT<T>& vx = value(x);
    assert(vx.ndim() == 3 && vx.dim(1) % 2 == 0 && vx.dim(2) % 2 == 0);
    const int c = vx.dim(0), h = vx.dim(1), w = vx.dim(2);
    const int oh = h / 2, ow = w / 2;
    TensorT<T> out({c, oh, ow});
    auto argmax = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(out.numel()));
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < oh; ++i)
            for (int j = 0; j < ow; ++j) {
                int64_t best = ((static_cast<int64_t>(ch) * h + 2 * i) * w + 2 * j);
                T bv = vx[best];
                for (int di = 0; di < 2; ++di)
                    for (int dj = 0; dj < 2; ++dj) {
                        const int64_t idx =
                            (static_cast<int64_t>(ch) * h + 2 * i + di) * w + 2 * j + dj;
                        if (vx[idx] > bv) {
                            bv = vx[idx];
                            best = idx;
                        }
                    }
                const int64_t oidx = (static_cast<int64_t>(ch) * oh + i) * ow + j;
                out[oidx] = bv;
                (*argmax)[static_cast<size_t>(oidx)] = best;
            }
    return emit(std::move(out), wants(x), [x, argmax, me = Id(nodes_.size())](Tape& t) {
        if (!t.wants(x)) return;
        const TensorT<T>& g = t.grad_buf(me);
        TensorT<T>& gx = t.grad_buf(x);
        for (int64_t i = 0; i < g.numel(); ++i) gx[(*argmax)[static_cast<size_t>(i)]] += g[i];
    });
}

template <typename T>
typename Tape<T>::Id Tape<T>::nearest_upsample2(Id x) {
    const TensorT<T>& vx = value(x);
    assert(vx.ndim() == 3);
    const int c = vx.dim(0), h = vx.dim(1), w = vx.dim(2);
    TensorT<T> out({c, 2 * h, 2 * w});
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                const T v = vx[(static_cast<int64_t>(ch) * h + i) * w + j];
                for (int di = 0; di < 2; ++di) {
                    T* row = out.ptr() + ((static_cast<int64_t>(ch) * 2 * h + 2 * i + di) * 2 * w);
                    row[2 * j] = v;
                    row[2 * j + 1] = v;
                }
            }
    return emit(std::move(out), wants(x), [x, c, h, w, me = Id(nodes_.size())](Tape& t) {
        if (!t.wants(x)) return;
        const TensorT<T>& g = t.grad_buf(me);
        TensorT<T>& gx = t.grad_buf(x);
        for (int ch = 0; ch < c; ++ch)
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j) {
                    T acc = T(0);
                    for (int di = 0; di < 2; ++di) {
                        const T* row =
                            g.ptr() + ((static_cast<int64_t>(ch) * 2 * h + 2 * i + di) * 2 * w);
                        acc += row[2 * j] + row[2 * j + 1];
                    }
                    gx[(static_cast<int64_t>(ch) * h + i) * w + j] += acc;
                }
    });
}

template <typename T>
typename Tape<T>::Id Tape<T>::global_avg_pool(Id x) {
    const TensorT<T>& vx = value(x);
    assert(vx.ndim() == 3);
    const int c = vx.dim(0);
    const int64_t hw = static_cast<int64_t>(vx.dim(1)) * vx.dim(2);
    TensorT<T> out(std::vector<int>{c});
    for (int ch = 0; ch < c; ++ch) {
        T acc = T(0);
        const T* p = vx.ptr() + ch * hw;
        for (int64_t i = 0; i < hw; ++i) acc += p[i];
        out[ch] = acc / static_cast<T>(hw);
    }
    return emit(std::move(out), wants(x), [x, c, hw, me = Id(nodes_.size())](Tape& t) {
        if (!t.wants(x)) return;
        const TensorT<T>& g = t.grad_buf(me);
        TensorT<T>& gx = t.grad_buf(x);
        for (int ch = 0; ch < c; ++ch) {
            const T gv = g[ch] / static_cast<T>(hw);
            T* p = gx.ptr() + ch * hw;
            for (int64_t i = 0; i < hw; ++i) p[i] += gv;
        }
    });
}

template <typename T>
typename Tape<T>::Id Tape<T>::softmax(Id logits) {
    const TensorT<T>& v = value(logits);
    assert(v.ndim() == 1);
    TensorT<T> out = v;
    T mx = out[0];
    for (const T& x : out.data) mx = std::max(mx, x);
    T z = T(0);
    for (auto& x : out.data) {
        x = std::exp(x - mx);
        z += x;
    }
    for (auto& x : out.data) x /= z;
    return emit(std::move(out), wants(logits), [logits, me = Id(nodes_.size())](Tape& t) {
        if (!t.wants(logits)) return;
        const TensorT<T>& g = t.grad_buf(me);
        const TensorT<T>& y = t.value(me);
        TensorT<T>& gx = t.grad_buf(logits);
        T dot = T(0);
        for (int64_t i = 0; i < g.numel(); ++i) dot += g[i] * y[i];
        for (int64_t i = 0; i < g.numel(); ++i) gx[i] += y[i] * (g[i] - dot);
    });
}

template <typename T>
typename Tape<T>::Id Tape<T>::mse_loss(Id pred, Id target) {
    const TensorT<T>& p = value(pred);
    const TensorT<T>& tg = value(target);
    assert(p.same_shape(tg));
    const int64_t n = p.numel();
    T acc = T(0);
    for (int64_t i = 0; i < n; ++i) {
        const T d = p[i] - tg[i];
        acc += d * d;
    }
    TensorT<T> out(std::vector<int>{1});
    out[0] = acc / static_cast<T>(n);
    return emit(std::move(out), wants(pred) || wants(target),
                [pred, target, n, me = Id(nodes_.size())](Tape& t) {
                    const T g = t.grad_buf(me)[0] * T(2) / static_cast<T>(n);
                    const TensorT<T>& p2 = t.value(pred);
                    const TensorT<T>& tg2 = t.value(target);
                    if (t.wants(pred)) {
                        TensorT<T>& gp = t.grad_buf(pred);
                        for (int64_t i = 0; i < n; ++i) gp[i] += g * (p2[i] - tg2[i]);
                    }
                    if (t.wants(target)) {
                        TensorT<T>& gt = t.grad_buf(target);
                        for (int64_t i = 0; i < n; ++i) gt[i] -= g * (p2[i] - tg2[i]);
                    }
                });
}

// ---------- graph attention helpers ----------

template <typename T>
typename Tape<T>::Id Tape<T>::outer_sum(Id u, Id v) {
    const TensorT<T>& vu = value(u);
    const TensorT<T>& vv = value(v);
    assert(vu.ndim() == 1 && vv.ndim() == 1 && vu.dim(0) == vv.dim(0));
    const int n = vu.dim(0);
    TensorT<T> out({n, n});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) out[static_cast<int64_t>(i) * n + j] = vu[i] + vv[j];
    const bool ng = wants(u) || wants(v);
    return emit(std::move(out), ng, [u, v, n, me = Id(nodes_.size())](Tape& t) {
        const TensorT<T>& g = t.grad_buf(me);
        if (t.wants(u)) {
            TensorT<T>& gu = t.grad_buf(u);
            for (int i = 0; i < n; ++i) {
                T acc = T(0);
                for (int j = 0; j < n; ++j) acc += g[static_cast<int64_t>(i) * n + j];
                gu[i] += acc;
            }
        }
        if (t.wants(v)) {
            TensorT<T>& gv = t.grad_buf(v);
            for (int j = 0; j < n; ++j) {
                T acc = T(0);
                for (int i = 0; i < n; ++i) acc += g[static_cast<int64_t>(i) * n + j];
                gv[j] += acc;
            }
        }
    });
}

template <typename T>
typename Tape<T>::Id Tape<T>::masked_row_softmax(Id e) {
    const TensorT<T>& ve = value(e);
    assert(ve.ndim() == 2 && ve.dim(0) == ve.dim(1));
    const int n = ve.dim(0);
    TensorT<T> out({n, n});
    for (int i = 0; i < n; ++i) {
        const T* row = ve.ptr() + static_cast<int64_t>(i) * n;
        T* orow = out.ptr() + static_cast<int64_t>(i) * n;
        if (n == 1) {
            orow[0] = T(0);
            continue;
        }
        T mx = -std::numeric_limits<T>::infinity();
        for (int j = 0; j < n; ++j)
            if (j != i) mx = std::max(mx, row[j]);
        T z = T(0);
        for (int j = 0; j < n; ++j) {
            if (j == i) {
                orow[j] = T(0);
                continue;
            }
            orow[j] = std::exp(row[j] - mx);
            z += orow[j];
        }
        for (int j = 0; j < n; ++j)
            if (j != i) orow[j] /= z;
    }
    return emit(std::move(out), wants(e), [e, n, me = Id(nodes_.size())](Tape& t) {
        if (!t.wants(e)) return;
        const TensorT<T>& g = t.grad_buf(me);
        const TensorT<T>& y = t.value(me);
        TensorT<T>& ge = t.grad_buf(e);
        for (int i = 0; i < n; ++i) {
            const T* grow = g.ptr() + static_cast<int64_t>(i) * n;
            const T* yrow = y.ptr() + static_cast<int64_t>(i) * n;
            T* erow = ge.ptr() + static_cast<int64_t>(i) * n;
            T dot = T(0);
            for (int j = 0; j < n; ++j)
                if (j != i) dot += grow[j] * yrow[j];
            for (int j = 0; j < n; ++j)
                if (j != i) erow[j] += yrow[j] * (grow[j] - dot);
        }
    });
}

template <typename T>
typename Tape<T>::Id Tape<T>::add_rowvec(Id x, Id r) {
    const TensorT<T>& vx = value(x);
    const TensorT<T>& vr = value(r);
    assert(vx.ndim() == 2);
    const int n = vx.dim(0), f = vx.dim(1);
    assert(vr.numel() == f);
    TensorT<T> out = vx;
    for (int i = 0; i < n; ++i) {
        T* row = out.ptr() + static_cast<int64_t>(i) * f;
        for (int j = 0; j < f; ++j) row[j] += vr[j];
    }
    const bool ng = wants(x) || wants(r);
    return emit(std::move(out), ng, [x, r, n, f, me = Id(nodes_.size())](Tape& t) {
        const TensorT<T>& g = t.grad_buf(me);
        if (t.wants(x)) {
            TensorT<T>& gx = t.grad_buf(x);
            for (int64_t i = 0; i < g.numel(); ++i) gx[i] += g[i];
        }
        if (t.wants(r)) {
            TensorT<T>& gr = t.grad_buf(r);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < f; ++j) gr[j] += g[static_cast<int64_t>(i) * f + j];
        }
    });
}

template <typename T>
typename Tape<T>::Id Tape<T>::gather_blocks(Id a, const BlockGatherPlan& plan) {
    const TensorT<T>& va = value(a);
    TensorT<T> out(plan.out_shape);
    for (const auto& blk : plan.blocks) {
        const auto& offs = plan.set_offsets[static_cast<size_t>(blk.set)];
        const auto& taps = plan.set_taps[static_cast<size_t>(blk.set)];
        const T* src = va.ptr() + blk.src_off;
        T* dst = out.ptr() + blk.out_off;
        for (int e = 0; e < plan.block_elems; ++e) {
            T acc = T(0);
            for (int32_t t = offs[static_cast<size_t>(e)]; t < offs[static_cast<size_t>(e) + 1]; ++t)
                acc += taps[static_cast<size_t>(t)].coeff * src[taps[static_cast<size_t>(t)].src];
            dst[e] = acc;
        }
    }
    const BlockGatherPlan* pp = &plan;  // plans are cached for the process lifetime
    return emit(std::move(out), wants(a), [a, pp, me = Id(nodes_.size())](Tape& t) {
        if (!t.wants(a)) return;
        const TensorT<T>& g = t.grad_buf(me);
        TensorT<T>& ga = t.grad_buf(a);
        for (const auto& blk : pp->blocks) {
            const auto& offs = pp->set_offsets[static_cast<size_t>(blk.set)];
            const auto& taps = pp->set_taps[static_cast<size_t>(blk.set)];
            const T* gsrc = g.ptr() + blk.out_off;
            T* dst = ga.ptr() + blk.src_off;
            for (int e = 0; e < pp->block_elems; ++e) {
                const T gv = gsrc[e];
                if (gv == T(0)) continue;
                for (int32_t k = offs[static_cast<size_t>(e)]; k < offs[static_cast<size_t>(e) + 1];
                     ++k)
                    dst[taps[static_cast<size_t>(k)].src] += gv * taps[static_cast<size_t>(k)].coeff;
            }
        }
    });
}

template class Tape<float>;
template class Tape<double>;

}  // namespace basepose
