#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "basepose/tensor.hpp"

namespace basepose {

// Reverse-mode tape over dense tensors. A fresh graph is recorded per forward
// pass; backward() walks it once in reverse. Nodes are addressed by index so
// the tape can be cleared and refilled without invalidating user code.
template <typename T>
class Tape {
public:
    using Id = int32_t;
    static constexpr Id kNone = -1;

    Id input(TensorT<T> value, bool needs_grad);
    Id constant(TensorT<T> value) { return input(std::move(value), false); }
    Id scalar_const(T v) {
        TensorT<T> t(std::vector<int>{1});
        t[0] = v;
        return constant(std::move(t));
    }

    const TensorT<T>& value(Id id) const { return nodes_[static_cast<size_t>(id)].val; }
    // Gradient of the last backward() target w.r.t. node id (zeros if untouched).
    const TensorT<T>& grad(Id id);

    void backward(Id out);  // out must be a scalar (numel == 1)
    void clear();
    size_t size() const { return nodes_.size(); }

    // ---- elementwise / shape ----
    Id add(Id a, Id b);
    Id sub(Id a, Id b);
    Id mul(Id a, Id b);
    Id scale(Id a, T s);
    Id add_scalar(Id a, T s);
    Id neg(Id a) { return scale(a, T(-1)); }
    Id relu(Id a);
    Id leaky_relu(Id a, T slope);
    Id sigmoid(Id a);
    Id log(Id a);
    Id reshape(Id a, std::vector<int> shape);
    Id concat_ch(Id a, Id b);              // [Ca,H,W] + [Cb,H,W] -> [Ca+Cb,H,W]
    Id slice_ch(Id a, int from, int count);  // channel slice of [C,H,W]
    // group-feature concat: slice g of the result is (slice g of a, slice g of
    // b), keeping the [g*m + i] channel layout group convolutions expect
    Id group_concat_ch(Id a, Id b, int n);
    Id sum(Id a);                          // -> scalar
    Id mean(Id a);                         // -> scalar
    Id pick(Id vec, int idx);              // -> scalar, from 1-D tensor
    Id scale_var(Id a, Id s);              // a * s[0], s a 1-element node
    Id shift_var(Id a, Id b);              // a + b[0]
    Id rsqrt_eps(Id a, T eps);             // elementwise 1/sqrt(a + eps)

    // ---- dense NN ----
    // x: [n_in] or [B,n_in]; w: [n_out,n_in]; b: [n_out] or kNone
    Id linear(Id x, Id w, Id b);
    Id matmul(Id a, Id b);  // [M,K]x[K,N]
    Id conv2d(Id x, Id k, int stride, int pad);  // x:[Ci,H,W] k:[Co,Ci,kh,kw]
    // bias index = channel % b.numel(); covers plain conv ([C] bias) and group
    // features (per-channel bias shared across the group axis).
    Id bias_add_ch(Id x, Id b);
    Id max_pool2(Id x);          // [C,H,W] -> [C,H/2,W/2], 2x2 stride 2
    Id nearest_upsample2(Id x);  // [C,H,W] -> [C,2H,2W]
    Id global_avg_pool(Id x);    // [C,H,W] -> [C]
    Id softmax(Id logits);       // 1-D, max-stabilized
    Id mse_loss(Id pred, Id target);  // -> scalar, mean over elements

    // ---- graph attention helpers ----
    Id outer_sum(Id u, Id v);        // u:[N], v:[N] -> [N,N] (u_i + v_j)
    Id masked_row_softmax(Id e);     // softmax over each row, diagonal excluded
    Id add_rowvec(Id x, Id r);       // [N,F] + [F]

    // ---- block-structured weighted gather ----
    // Used for group-equivariant kernel expansion: many (out, src) block pairs
    // share a small per-set spatial tap table, so rotated kernel copies cost
    // O(blocks * block_elems) instead of materializing per-element taps.
    struct SpatialTap {
        int32_t src;  // offset within the source block
        T coeff;
    };
    struct BlockGatherPlan {
        std::vector<int> out_shape;
        int block_elems = 0;  // elements per block (kernel spatial size)
        // tap table per set: set_offsets[s] has block_elems+1 entries into set_taps[s]
        std::vector<std::vector<int32_t>> set_offsets;
        std::vector<std::vector<SpatialTap>> set_taps;
        struct Block {
            int64_t out_off;
            int64_t src_off;
            int32_t set;
        };
        std::vector<Block> blocks;
    };
    Id gather_blocks(Id a, const BlockGatherPlan& plan);

private:
    struct Node {
        TensorT<T> val;
        TensorT<T> grd;
        bool needs_grad = false;
        bool grad_alloc = false;
        std::function<void(Tape&)> back;  // empty for leaves
    };
    std::vector<Node> nodes_;

    Id emit(TensorT<T> val, bool needs_grad, std::function<void(Tape&)> back);
    TensorT<T>& grad_buf(Id id);
    bool wants(Id id) const { return nodes_[static_cast<size_t>(id)].needs_grad; }
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace basepose
