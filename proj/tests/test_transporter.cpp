#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "basepose/gradcheck.hpp"
#include "basepose/transporter.hpp"

using namespace basepose;

namespace {

TransporterConfig small_cfg() {
    TransporterConfig cfg;
    cfg.n = 8;
    cfg.phi_widths = {3, 4, 5, 6};
    cfg.psi_widths = {3, 4, 4, 3};
    cfg.crop_px = 9;
    return cfg;
}

SceneConfig scene32() {
    SceneConfig c;
    c.resolution = 0.15;  // 32 px cover the same 4.8 m world
    return c;
}

}  // namespace

TEST_CASE("irm_forward: output shape and open-interval range at random init") {
    const TransporterConfig cfg = small_cfg();
    ParamStore params = make_transporter_params(cfg, 7);
    const SceneSpec s = sample_scene(3, scene32());
    const OrthoProjection proj = rasterize(s, 32);
    GridPose rc;
    REQUIRE(world_to_grid(s.robot_start, proj, cfg.n, rc));
    const TensorF out = irm_forward(params, cfg, proj, rc.u, rc.v);
    REQUIRE(out.shape == std::vector<int>{8, 32, 32});
    for (const float v : out.data) {
        CHECK(v > 0.0f);
        CHECK(v < 1.0f);
    }
}

TEST_CASE("irm_forward transforms like the IRM label under 90-degree rotation") {
    // the architecture-level property: rotating the scene rotates the density
    // maps spatially and shifts the orientation channels by K/4
    const TransporterConfig cfg = small_cfg();
    ParamStore params = make_transporter_params(cfg, 11);
    for (uint64_t seed : {5u, 9u, 31u}) {
        const SceneSpec s = sample_scene(seed, scene32());
        const OrthoProjection proj = rasterize(s, 32);
        GridPose rc;
        REQUIRE(world_to_grid(s.robot_start, proj, cfg.n, rc));
        const TensorF base = irm_forward(params, cfg, proj, rc.u, rc.v);

        for (int q = 1; q < 4; ++q) {
            const SceneSpec srot = rotate_scene_quarter(s, q);
            const OrthoProjection prot = rasterize(srot, 32);
            int ru, rv;
            rot90_cell(rc.u, rc.v, 32, q, ru, rv);
            const TensorF rot = irm_forward(params, cfg, prot, ru, rv);

            const int j = q * cfg.n / 4;
            const TensorF base_sp = rot90_ccw(base, q);
            float worst = 0.0f;
            const int64_t hw2 = 32 * 32;
            for (int k = 0; k < cfg.n; ++k) {
                const int src = ((k - j) % cfg.n + cfg.n) % cfg.n;
                for (int64_t i = 0; i < hw2; ++i)
                    worst = std::max(worst, std::abs(rot[k * hw2 + i] - base_sp[src * hw2 + i]));
            }
            CHECK(worst < 1e-4f);
        }
    }
}

TEST_CASE("seg_metrics arithmetic") {
    IRMLabel label;
    label.k = 1;
    label.hw = 2;
    label.cells = {0, 1, 1, 0};  // cells b, c positive
    TensorF pred({1, 2, 2});

    SUBCASE("exact match -> all ones") {
        pred[1] = 1.0f;
        pred[2] = 1.0f;
        const SegMetrics m = seg_metrics(pred, label, 0.5f);
        CHECK(m.iou == 1.0);
        CHECK(m.dice == 1.0);
        CHECK(m.precision == 1.0);
        CHECK(m.recall == 1.0);
    }
    SUBCASE("empty prediction vs non-empty label -> zeros by the empty-denominator rule") {
        const SegMetrics m = seg_metrics(pred, label, 0.5f);
        CHECK(m.iou == 0.0);
        CHECK(m.recall == 0.0);
        CHECK(m.precision == 0.0);
    }
    SUBCASE("pred {a,b} vs label {b,c}") {
        pred[0] = 1.0f;  // a
        pred[1] = 1.0f;  // b
        const SegMetrics m = seg_metrics(pred, label, 0.5f);
        CHECK(m.iou == doctest::Approx(1.0 / 3.0));
        CHECK(m.dice == doctest::Approx(0.5));
        CHECK(m.precision == doctest::Approx(0.5));
        CHECK(m.recall == doctest::Approx(0.5));
    }
}

TEST_CASE("extract_candidates ordering, threshold and truncation") {
    TensorF d({2, 2, 2});
    d.at({0, 0, 0}) = 0.9f;
    d.at({0, 1, 1}) = 0.7f;
    d.at({1, 0, 1}) = 0.8f;
    d.at({1, 1, 0}) = 0.3f;

    SUBCASE("three above threshold, score-sorted") {
        const auto c = extract_candidates(d, 0.5f, 64);
        REQUIRE(c.size() == 3);
        CHECK(c[0].score == 0.9f);
        CHECK(c[1].score == 0.8f);
        CHECK(c[2].score == 0.7f);
        CHECK(c[0].pose == GridPose{0, 0, 0});
        CHECK(c[1].pose == GridPose{1, 0, 1});
    }
    SUBCASE("all below threshold -> abstention") {
        CHECK(extract_candidates(d, 0.95f, 64).empty());
    }
    SUBCASE("max_n truncates to the best scores") {
        const auto c = extract_candidates(d, 0.5f, 2);
        REQUIRE(c.size() == 2);
        CHECK(c[0].score == 0.9f);
        CHECK(c[1].score == 0.8f);
    }
    SUBCASE("score ties break (k, v, u) lexicographic") {
        TensorF t({2, 1, 2}, 0.6f);
        const auto c = extract_candidates(t, 0.5f, 10);
        REQUIRE(c.size() == 4);
        CHECK(c[0].pose == GridPose{0, 0, 0});
        CHECK(c[1].pose == GridPose{1, 0, 0});
        CHECK(c[2].pose == GridPose{0, 0, 1});
        CHECK(c[3].pose == GridPose{1, 0, 1});
    }
}

TEST_CASE("single-sample overfit reaches MSE < 1e-3 in 500 epochs") {
    RobotModel robot;
    const auto data = sample_dataset(1, 21, scene32(), robot, 8, 32);
    TransporterConfig cfg = small_cfg();
    TrainIrmConfig tcfg;
    tcfg.epochs = 500;
    tcfg.batch = 1;
    tcfg.lr = 3e-3;
    tcfg.seed = 2;
    tcfg.heldout_frac = 0.0;
    const auto res = train_irm(data, cfg, tcfg);
    MESSAGE("overfit MSE: " << res.final_train_mse);
    CHECK(res.final_train_mse < 1e-3);
}

TEST_CASE("same seed gives identical loss trajectories") {
    RobotModel robot;
    const auto data = sample_dataset(4, 22, scene32(), robot, 8, 32);
    TransporterConfig cfg = small_cfg();
    TrainIrmConfig tcfg;
    tcfg.epochs = 3;
    tcfg.batch = 2;
    tcfg.lr = 1e-3;
    tcfg.seed = 5;
    tcfg.heldout_frac = 0.25;
    const auto a = train_irm(data, cfg, tcfg);
    const auto b = train_irm(data, cfg, tcfg);
    REQUIRE(a.log.size() == b.log.size());
    for (size_t i = 0; i < a.log.size(); ++i) {
        CHECK(a.log[i].train_loss == b.log[i].train_loss);
        CHECK(a.log[i].held.iou == b.log[i].held.iou);
    }
}

TEST_CASE("plain U-Net twin: output shape and parameter matching") {
    TransporterConfig cfg = small_cfg();
    PlainUNetConfig pcfg;
    pcfg.widths = {9, 12, 15, 18};
    pcfg.k_out = 8;
    ParamStore plain = make_plain_unet_params(pcfg, 3);
    const SceneSpec s = sample_scene(4, scene32());
    const OrthoProjection proj = rasterize(s, 32);
    const TensorF out = plain_unet_infer(plain, pcfg, proj);
    REQUIRE(out.shape == std::vector<int>{8, 32, 32});
    for (const float v : out.data) {
        CHECK(v > 0.0f);
        CHECK(v < 1.0f);
    }
}

TEST_CASE("both stage-1 networks pass 64-bit finite differences (reduced widths)") {
    SceneConfig sc = scene32();
    sc.resolution = 0.3;  // 16 px
    const SceneSpec s = sample_scene(6, sc);
    const OrthoProjection proj = rasterize(s, 16);
    GridPose rc;
    REQUIRE(world_to_grid(s.robot_start, proj, 8, rc));

    TransporterConfig cfg;
    cfg.n = 8;
    cfg.phi_widths = {2, 2, 3, 3};
    cfg.psi_widths = {2, 2, 2, 2};
    cfg.crop_px = 5;

    RobotModel robot;
    const IRMLabel label = compute_irm(s, robot, 8, proj);
    const TensorD state = state_tensor(proj).cast<double>();
    const TensorD crop = robot_query_crop(proj, rc.u, rc.v, cfg.crop_px).cast<double>();
    const TensorD target = label_tensor(label).cast<double>();

    SUBCASE("equivariant transporter") {
        ParamStoreT<double> params = make_transporter_params(cfg, 13).cast<double>();
        auto fn = [&](ParamStoreT<double>& store, bool grads) {
            Tape<double> tape;
            ParamBinding<double> bind(tape, store);
            const auto out = transporter_forward<double>(tape, bind, cfg, tape.constant(state),
                                                         tape.constant(crop));
            const auto loss = tape.mse_loss(out, tape.constant(target));
            const double v = tape.value(loss)[0];
            if (grads) {
                tape.backward(loss);
                bind.harvest();
            }
            return v;
        };
        const double err = finite_diff_check<double>(params, fn, 1e-6);
        MESSAGE("transporter max rel err: " << err);
        CHECK(err < 1e-5);
    }
    SUBCASE("plain U-Net") {
        PlainUNetConfig pcfg;
        pcfg.widths = {3, 4, 4, 5};
        pcfg.k_out = 8;
        ParamStoreT<double> params = make_plain_unet_params(pcfg, 14).cast<double>();
        auto fn = [&](ParamStoreT<double>& store, bool grads) {
            Tape<double> tape;
            ParamBinding<double> bind(tape, store);
            const auto out = plain_unet_forward<double>(tape, bind, pcfg, tape.constant(state));
            const auto loss = tape.mse_loss(out, tape.constant(target));
            const double v = tape.value(loss)[0];
            if (grads) {
                tape.backward(loss);
                bind.harvest();
            }
            return v;
        };
        const double err = finite_diff_check<double>(params, fn, 1e-6);
        MESSAGE("plain U-Net max rel err: " << err);
        CHECK(err < 1e-5);
    }
}
