#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "basepose/gradcheck.hpp"
#include "basepose/kernels.hpp"
#include "basepose/nn.hpp"
#include "basepose/rng.hpp"
#include "basepose/tape.hpp"

using namespace basepose;

namespace {

// independent six-nested-loop oracle for conv2d
template <typename T>
TensorT<T> conv_oracle(const TensorT<T>& x, const TensorT<T>& k, int stride, int pad) {
    const int ci = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int co = k.dim(0), kh = k.dim(2), kw = k.dim(3);
    int oh, ow;
    kernels::conv2d_out_size(h, w, kh, kw, stride, pad, oh, ow);
    TensorT<T> y({co, oh, ow});
    for (int o = 0; o < co; ++o)
        for (int i = 0; i < oh; ++i)
            for (int j = 0; j < ow; ++j) {
                T acc = 0;
                for (int c = 0; c < ci; ++c)
                    for (int r = 0; r < kh; ++r)
                        for (int s = 0; s < kw; ++s) {
                            const int ih = i * stride + r - pad;
                            const int iw = j * stride + s - pad;
                            if (ih < 0 || ih >= h || iw < 0 || iw >= w) continue;
                            acc += x.at({c, ih, iw}) * k.at({o, c, r, s});
                        }
                y.at({o, i, j}) = acc;
            }
    return y;
}

template <typename T>
TensorT<T> randn(std::vector<int> shape, Rng& rng, double scale = 1.0) {
    TensorT<T> t(std::move(shape));
    for (auto& v : t.data) v = static_cast<T>(rng.normal() * scale);
    return t;
}

// gradcheck helper: builds a scalar loss from a single-param net fragment
double check_layer(const std::function<Tape<double>::Id(Tape<double>&, ParamBinding<double>&)>& f,
                   ParamStoreT<double>& store, double h = 1e-6) {
    auto fn = [&](ParamStoreT<double>& s, bool grads) {
        Tape<double> tape;
        ParamBinding<double> bind(tape, s);
        const auto loss = f(tape, bind);
        const double v = tape.value(loss)[0];
        if (grads) {
            tape.backward(loss);
            bind.harvest();
        }
        return v;
    };
    return finite_diff_check<double>(store, fn, h);
}

}  // namespace

TEST_CASE("conv2d basic semantics") {
    Tape<float> tape;
    // 1x1 input [[2]], kernel [[3]] -> [[6]]
    TensorF x({1, 1, 1});
    x[0] = 2.0f;
    TensorF k({1, 1, 1, 1});
    k[0] = 3.0f;
    auto y = tape.conv2d(tape.constant(x), tape.constant(k), 1, 0);
    CHECK(tape.value(y)[0] == doctest::Approx(6.0f));

    // identity 1x1 kernel preserves the input
    Rng rng(1);
    TensorF x2 = randn<float>({1, 5, 5}, rng);
    TensorF id({1, 1, 1, 1});
    id[0] = 1.0f;
    auto y2 = tape.conv2d(tape.constant(x2), tape.constant(id), 1, 0);
    for (int64_t i = 0; i < x2.numel(); ++i) CHECK(tape.value(y2)[i] == doctest::Approx(x2[i]));
}

TEST_CASE("conv2d matches the nested-loop oracle on random shapes") {
    Rng rng(42);
    const struct {
        int ci, h, co, k, stride, pad;
    } cases[] = {{3, 8, 4, 3, 1, 1}, {2, 9, 3, 3, 2, 1}, {5, 6, 2, 1, 1, 0},
                 {1, 12, 6, 5, 1, 2}, {4, 7, 3, 3, 2, 0}};
    for (const auto& c : cases) {
        TensorF x = randn<float>({c.ci, c.h, c.h}, rng);
        TensorF k = randn<float>({c.co, c.ci, c.k, c.k}, rng);
        Tape<float> tape;
        auto y = tape.conv2d(tape.constant(x), tape.constant(k), c.stride, c.pad);
        const TensorF ref = conv_oracle(x, k, c.stride, c.pad);
        REQUIRE(tape.value(y).shape == ref.shape);
        for (int64_t i = 0; i < ref.numel(); ++i)
            CHECK(std::abs(tape.value(y)[i] - ref[i]) <= 1e-5);
    }
}

TEST_CASE("elementwise layer semantics") {
    Tape<float> tape;
    TensorF x(std::vector<int>{3});
    x[0] = -1.0f;
    x[1] = 0.0f;
    x[2] = 2.0f;
    auto r = tape.relu(tape.constant(x));
    CHECK(tape.value(r)[0] == 0.0f);
    CHECK(tape.value(r)[1] == 0.0f);
    CHECK(tape.value(r)[2] == 2.0f);

    // softmax over equal logits -> uniform
    TensorF eq(std::vector<int>{5}, 0.7f);
    auto sm = tape.softmax(tape.constant(eq));
    for (int i = 0; i < 5; ++i) CHECK(tape.value(sm)[i] == doctest::Approx(0.2f));

    // mse(x, x) = 0 with zero gradient
    auto xv = tape.input(x, true);
    auto loss = tape.mse_loss(xv, tape.constant(x));
    CHECK(tape.value(loss)[0] == 0.0f);
    tape.backward(loss);
    for (int i = 0; i < 3; ++i) CHECK(tape.grad(xv)[i] == 0.0f);
}

TEST_CASE("softmax is stable under large logits and ops stay finite") {
    Tape<float> tape;
    TensorF big(std::vector<int>{4});
    big[0] = 500.0f;
    big[1] = -500.0f;
    big[2] = 499.0f;
    big[3] = 0.0f;
    auto sm = tape.softmax(tape.constant(big));
    CHECK(tape.value(sm).all_finite());
    float sum = 0.0f;
    for (int i = 0; i < 4; ++i) sum += tape.value(sm)[i];
    CHECK(sum == doctest::Approx(1.0f));

    Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        TensorF x = randn<float>({2, 6, 6}, rng, std::pow(10.0, rng.uniform(-3, 3)));
        TensorF k = randn<float>({3, 2, 3, 3}, rng, std::pow(10.0, rng.uniform(-3, 3)));
        Tape<float> t2;
        auto y = t2.conv2d(t2.constant(x), t2.constant(k), 1, 1);
        auto s = t2.sigmoid(y);
        CHECK(t2.value(y).all_finite());
        CHECK(t2.value(s).all_finite());
    }
}

TEST_CASE("adam closed-form first step and independence") {
    ParamStore p;
    TensorF a(std::vector<int>{1}, 1.0f);
    TensorF b(std::vector<int>{1}, -2.0f);
    p.add("a", a);
    p.add("b", b);
    AdamConfig cfg;
    cfg.lr = 0.1;

    // zero gradient leaves parameters unchanged
    p.zero_grad();
    p.adam_step(cfg);
    CHECK(p.at("a").value[0] == doctest::Approx(1.0f));
    CHECK(p.at("b").value[0] == doctest::Approx(-2.0f));

    // first step with g=1: delta = -lr * 1/(1 + eps)
    ParamStore q;
    q.add("w", TensorF(std::vector<int>{1}, 0.5f));
    q.at("w").grad[0] = 1.0f;
    q.adam_step(cfg);
    CHECK(q.at("w").value[0] == doctest::Approx(0.5f - 0.1 * (1.0 / (1.0 + 1e-8))));

    // two parameters update independently
    ParamStore r;
    r.add("u", TensorF(std::vector<int>{1}, 0.0f));
    r.add("v", TensorF(std::vector<int>{1}, 0.0f));
    r.at("u").grad[0] = 1.0f;
    r.adam_step(cfg);
    CHECK(r.at("u").value[0] != 0.0f);
    CHECK(r.at("v").value[0] == 0.0f);
}

TEST_CASE("every layer backward passes 64-bit finite differences") {
    Rng rng(77);
    const double tol = 1e-5;

    SUBCASE("linear") {
        ParamStoreT<double> s;
        s.add("w", randn<double>({4, 6}, rng, 0.5));
        s.add("b", randn<double>({4}, rng, 0.5));
        const TensorD x = randn<double>({3, 6}, rng);
        const double err = check_layer(
            [&](Tape<double>& t, ParamBinding<double>& bind) {
                return t.sum(t.linear(t.constant(x), bind("w"), bind("b")));
            },
            s);
        CHECK(err < 1e-6);  // linear layer: tighter bound holds
    }
    SUBCASE("conv2d + bias") {
        ParamStoreT<double> s;
        s.add("k", randn<double>({3, 2, 3, 3}, rng, 0.5));
        s.add("b", randn<double>({3}, rng, 0.5));
        const TensorD x = randn<double>({2, 6, 6}, rng);
        const TensorD tgt = randn<double>({3, 6, 6}, rng);
        const double err = check_layer(
            [&](Tape<double>& t, ParamBinding<double>& bind) {
                auto y = t.bias_add_ch(t.conv2d(t.constant(x), bind("k"), 1, 1), bind("b"));
                return t.mse_loss(y, t.constant(tgt));
            },
            s);
        CHECK(err < tol);
    }
    SUBCASE("relu leaky sigmoid log chain") {
        ParamStoreT<double> s;
        s.add("w", randn<double>({5, 5}, rng, 0.7));
        const TensorD x = randn<double>({2, 5}, rng);
        const double err = check_layer(
            [&](Tape<double>& t, ParamBinding<double>& bind) {
                auto h = t.linear(t.constant(x), bind("w"), Tape<double>::kNone);
                auto a = t.relu(h);
                auto b = t.leaky_relu(h, 0.2);
                auto c = t.sigmoid(h);
                auto d = t.log(t.add_scalar(t.sigmoid(h), 1.0));
                return t.add(t.add(t.sum(a), t.sum(b)), t.add(t.sum(c), t.sum(d)));
            },
            s);
        CHECK(err < tol);
    }
    SUBCASE("max_pool2 + upsample + slice/concat") {
        ParamStoreT<double> s;
        s.add("k", randn<double>({4, 2, 3, 3}, rng, 0.5));
        const TensorD x = randn<double>({2, 8, 8}, rng);
        const double err = check_layer(
            [&](Tape<double>& t, ParamBinding<double>& bind) {
                auto y = t.conv2d(t.constant(x), bind("k"), 1, 1);
                auto p = t.max_pool2(y);
                auto u = t.nearest_upsample2(p);
                auto cat = t.concat_ch(t.slice_ch(u, 0, 2), t.slice_ch(y, 2, 2));
                return t.sum(cat);
            },
            s);
        CHECK(err < tol);
    }
    SUBCASE("softmax + pick + global pool") {
        ParamStoreT<double> s;
        s.add("w", randn<double>({6, 3}, rng, 0.7));
        const TensorD x = randn<double>({4, 3}, rng);
        const double err = check_layer(
            [&](Tape<double>& t, ParamBinding<double>& bind) {
                auto h = t.linear(t.constant(x), bind("w"), Tape<double>::kNone);  // [4,6]
                auto pooled = t.global_avg_pool(t.reshape(h, {4, 2, 3}));
                auto y = t.softmax(pooled);
                return t.log(t.pick(y, 1));
            },
            s);
        CHECK(err < tol);
    }
    SUBCASE("attention ops: outer_sum + masked_row_softmax + matmul") {
        ParamStoreT<double> s;
        s.add("w", randn<double>({4, 5}, rng, 0.7));
        s.add("a1", randn<double>({4, 1}, rng, 0.7));
        s.add("a2", randn<double>({4, 1}, rng, 0.7));
        const TensorD x = randn<double>({5, 5}, rng);
        const double err = check_layer(
            [&](Tape<double>& t, ParamBinding<double>& bind) {
                auto h = t.linear(t.constant(x), bind("w"), Tape<double>::kNone);  // [5,4]
                auto u = t.reshape(t.matmul(h, bind("a1")), {5});
                auto v = t.reshape(t.matmul(h, bind("a2")), {5});
                auto e = t.leaky_relu(t.outer_sum(u, v), 0.2);
                auto alpha = t.masked_row_softmax(e);
                auto nb = t.matmul(alpha, h);
                return t.sum(t.mul(nb, nb));
            },
            s);
        CHECK(err < tol);
    }
    SUBCASE("scale_var / shift_var / add_rowvec") {
        ParamStoreT<double> s;
        s.add("g", randn<double>({1}, rng, 0.5));
        s.add("b", randn<double>({1}, rng, 0.5));
        s.add("r", randn<double>({3}, rng, 0.5));
        const TensorD x = randn<double>({4, 3}, rng);
        const double err = check_layer(
            [&](Tape<double>& t, ParamBinding<double>& bind) {
                auto y = t.add_rowvec(t.constant(x), bind("r"));
                return t.sum(t.shift_var(t.scale_var(y, bind("g")), bind("b")));
            },
            s);
        CHECK(err < tol);
    }
    SUBCASE("constant function has zero gradient both ways") {
        ParamStoreT<double> s;
        s.add("w", randn<double>({3}, rng));
        auto fn = [&](ParamStoreT<double>& st, bool grads) {
            if (grads) st.zero_grad();
            (void)st;
            return 7.5;
        };
        const double err = finite_diff_check<double>(s, fn, 1e-6);
        CHECK(err == 0.0);
    }
}
