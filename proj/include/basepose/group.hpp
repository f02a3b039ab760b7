#pragma once

#include "basepose/tape.hpp"
#include "basepose/tensor.hpp"

namespace basepose {

// C_n-equivariant convolution layers over "group features": a feature map with
// an extra cyclic-orientation axis, stored as channels [n*m, H, W] with slice
// g occupying channels [g*m, (g+1)*m).
//
// Conventions (locked by the equivariance tests):
//   - rotating an image by j quarter turns uses rot90_ccw
//   - acting with group element j on a group feature rotates each slice
//     spatially and shifts the orientation axis: (act_j F)[g] = R_j F[g - j]
//   - the lift kernel for slice g is the canonical kernel rotated CCW by
//     2*pi*g/n, so lift(R_j x) == act_j(lift(x))
//
// Kernel rotations use exact quarter-turn permutations when 4*g % n == 0 and
// bilinear resampling otherwise, so equivariance is exact (to float roundoff)
// on the C_4 subgroup and approximate for the odd C_8 slots.

// Bilinear CCW rotation of the trailing two dims (square), zeros outside.
// Exact quarter-turn permutation when angle is a multiple of pi/2.
template <typename T>
TensorT<T> rotate_bilinear(const TensorT<T>& t, double angle_ccw);

// Group action on a [n*m, H, W] feature; j*4 must be divisible by n so the
// spatial part is an exact quarter-turn (the only case tests need).
template <typename T>
TensorT<T> group_act(const TensorT<T>& f, int n, int m, int j);

template <typename T>
class GroupOps {
public:
    using Plan = typename Tape<T>::BlockGatherPlan;

    // canonical [m_out, c_in, k, k] -> expanded [n*m_out, c_in, k, k]
    static const Plan& lift_plan(int n, int m_out, int c_in, int k);
    // canonical [m_out, m_in, n, k, k] -> expanded [n*m_out, n*m_in, k, k],
    // expanded[(g,o),(h,i)] = rot_g(canonical[o, i, (h-g) mod n])
    static const Plan& group_plan(int n, int m_out, int m_in, int k);

    // x: [c_in, H, W] plain image -> [n*m_out, H', W'] group feature
    static typename Tape<T>::Id lift_conv(Tape<T>& tape, typename Tape<T>::Id x,
                                          typename Tape<T>::Id canonical, int n, int stride,
                                          int pad);
    // x: [n*m_in, H, W] -> [n*m_out, H', W']
    static typename Tape<T>::Id group_conv(Tape<T>& tape, typename Tape<T>::Id x,
                                           typename Tape<T>::Id canonical, int n, int stride,
                                           int pad);
};

extern template class GroupOps<float>;
extern template class GroupOps<double>;
extern template TensorT<float> rotate_bilinear<float>(const TensorT<float>&, double);
extern template TensorT<double> rotate_bilinear<double>(const TensorT<double>&, double);
extern template TensorT<float> group_act<float>(const TensorT<float>&, int, int, int);
extern template TensorT<double> group_act<double>(const TensorT<double>&, int, int, int);

}  // namespace basepose
