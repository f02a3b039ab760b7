#include "basepose/transporter.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace basepose {

namespace {

template <typename T>
TensorT<T> he_init(std::vector<int> shape, int fan_in, Rng& rng) {
    return he_normal<T>(std::move(shape), fan_in, rng);
}

}  // namespace

ParamStore make_transporter_params(const TransporterConfig& cfg, uint64_t seed) {
    ParamStore p;
    Rng rng(seed, 0x7ab5);
    const int n = cfg.n;
    const auto& w = cfg.phi_widths;
    const auto pw = cfg.psi();
    const int cin = cfg.state_channels;
    const int m = cfg.m_out();

    auto lift = [&](const std::string& name, int mo, int ci, int k) {
        p.add(name + ".k", he_init<float>({mo, ci, k, k}, ci * k * k, rng));
        p.add(name + ".b", TensorF(std::vector<int>{mo}));
    };
    auto gconv = [&](const std::string& name, int mo, int mi, int k) {
        p.add(name + ".k", he_init<float>({mo, mi, n, k, k}, n * mi * k * k, rng));
        p.add(name + ".b", TensorF(std::vector<int>{mo}));
    };

    lift("phi.lift", w[0], cin, 3);
    gconv("phi.enc1", w[1], w[0], 3);
    gconv("phi.enc2", w[2], w[1], 3);
    gconv("phi.enc3", w[3], w[2], 3);
    gconv("phi.dec2", w[2], w[3] + w[2], 3);
    gconv("phi.dec1", w[1], w[2] + w[1], 3);
    gconv("phi.dec0", w[0], w[1] + w[0], 3);
    gconv("phi.head", m, w[0], 1);

    lift("psi.lift", pw[0], kSemChannels, 3);
    gconv("psi.l1", pw[1], pw[0], 3);
    gconv("psi.l2", pw[2], pw[1], 3);
    gconv("psi.l3", pw[3], pw[2], 3);
    gconv("psi.head", m, pw[3], 1);

    TensorF gain(std::vector<int>{1});
    gain[0] = 4.0f;  // cosine values live in [-1, 1]
    p.add("corr.gain", std::move(gain));
    // start predictions near the sparse positive base rate instead of 0.5, so
    // early training does not have to drive 98% of the cells down first
    TensorF bias(std::vector<int>{1});
    bias[0] = -4.0f;
    p.add("corr.bias", std::move(bias));
    return p;
}

TensorF state_tensor(const OrthoProjection& proj) {
    const int hw = proj.hw;
    TensorF out({kSemChannels + 1, hw, hw});
    std::copy(proj.semantic.data.begin(), proj.semantic.data.end(), out.data.begin());
    std::copy(proj.depth.data.begin(), proj.depth.data.end(),
              out.data.begin() + proj.semantic.numel());
    return out;
}

template <typename T>
typename Tape<T>::Id transporter_forward(Tape<T>& tape, ParamBinding<T>& bind,
                                         const TransporterConfig& cfg,
                                         typename Tape<T>::Id state,
                                         typename Tape<T>::Id crop) {
    using Ops = GroupOps<T>;
    const int n = cfg.n;
    const int m = cfg.m_out();

    auto lift_block = [&](typename Tape<T>::Id x, const std::string& name) {
        auto y = Ops::lift_conv(tape, x, bind(name + ".k"), n, 1, 1);
        return tape.relu(tape.bias_add_ch(y, bind(name + ".b")));
    };
    auto gblock = [&](typename Tape<T>::Id x, const std::string& name, int k, bool act) {
        auto y = Ops::group_conv(tape, x, bind(name + ".k"), n, 1, k == 3 ? 1 : 0);
        y = tape.bias_add_ch(y, bind(name + ".b"));
        return act ? tape.relu(y) : y;
    };

    // key encoder: 4-level U-Net
    auto d0 = lift_block(state, "phi.lift");
    auto d1 = gblock(tape.max_pool2(d0), "phi.enc1", 3, true);
    auto d2 = gblock(tape.max_pool2(d1), "phi.enc2", 3, true);
    auto d3 = gblock(tape.max_pool2(d2), "phi.enc3", 3, true);
    auto u2 = gblock(tape.group_concat_ch(tape.nearest_upsample2(d3), d2, n), "phi.dec2", 3, true);
    auto u1 = gblock(tape.group_concat_ch(tape.nearest_upsample2(u2), d1, n), "phi.dec1", 3, true);
    auto u0 = gblock(tape.group_concat_ch(tape.nearest_upsample2(u1), d0, n), "phi.dec0", 3, true);
    auto key = gblock(u0, "phi.head", 1, false);  // [n*m, H, W]

    // query encoder: stride-1 stack on the odd crop
    auto q0 = lift_block(crop, "psi.lift");
    auto q1 = gblock(q0, "psi.l1", 3, true);
    auto q2 = gblock(q1, "psi.l2", 3, true);
    auto q3 = gblock(q2, "psi.l3", 3, true);
    auto query = gblock(q3, "psi.head", 1, false);  // [n*m, c, c]

    // cosine-normalized correlation: raw inner products over m*c*c terms can
    // swing to thousands and pin the sigmoid, so both the template and each
    // key window are normalized before the learnable gain/bias
    const int c = cfg.crop_px;
    const auto gain = bind("corr.gain");
    const auto bias = bind("corr.bias");
    const auto ones = tape.constant(TensorT<T>({1, m, c, c}, T(1)));
    typename Tape<T>::Id logits = Tape<T>::kNone;
    for (int k = 0; k < n; ++k) {
        auto qk = tape.slice_ch(query, k * m, m);
        auto tmpl = tape.reshape(qk, {1, m, c, c});
        auto keyk = tape.slice_ch(key, k * m, m);
        auto corr = tape.conv2d(keyk, tmpl, 1, (c - 1) / 2);  // [1, H, W]
        auto win_inv = tape.rsqrt_eps(
            tape.conv2d(tape.mul(keyk, keyk), ones, 1, (c - 1) / 2), T(1e-5));
        auto q_inv = tape.rsqrt_eps(tape.sum(tape.mul(qk, qk)), T(1e-5));
        auto cosine = tape.scale_var(tape.mul(corr, win_inv), q_inv);
        auto lg = tape.shift_var(tape.scale_var(cosine, gain), bias);
        logits = k == 0 ? lg : tape.concat_ch(logits, lg);
    }
    return tape.sigmoid(logits);  // [K, H, W]
}

TensorF irm_forward(ParamStore& params, const TransporterConfig& cfg,
                    const OrthoProjection& proj, int robot_u, int robot_v) {
    Tape<float> tape;
    ParamBinding<float> bind(tape, params);
    const auto state = tape.constant(state_tensor(proj));
    const auto crop = tape.constant(robot_query_crop(proj, robot_u, robot_v, cfg.crop_px));
    const auto out = transporter_forward(tape, bind, cfg, state, crop);
    return tape.value(out);
}

ParamStore make_plain_unet_params(const PlainUNetConfig& cfg, uint64_t seed) {
    ParamStore p;
    Rng rng(seed, 0x91e3);
    const auto& w = cfg.widths;
    auto conv = [&](const std::string& name, int co, int ci, int k) {
        p.add(name + ".k", he_init<float>({co, ci, k, k}, ci * k * k, rng));
        p.add(name + ".b", TensorF(std::vector<int>{co}));
    };
    conv("u.enc0", w[0], cfg.state_channels, 3);
    conv("u.enc1", w[1], w[0], 3);
    conv("u.enc2", w[2], w[1], 3);
    conv("u.enc3", w[3], w[2], 3);
    conv("u.dec2", w[2], w[3] + w[2], 3);
    conv("u.dec1", w[1], w[2] + w[1], 3);
    conv("u.dec0", w[0], w[1] + w[0], 3);
    conv("u.head", cfg.k_out, w[0], 1);
    return p;
}

template <typename T>
typename Tape<T>::Id plain_unet_forward(Tape<T>& tape, ParamBinding<T>& bind,
                                        const PlainUNetConfig& cfg, typename Tape<T>::Id state) {
    auto block = [&](typename Tape<T>::Id x, const std::string& name, int pad, bool act) {
        auto y = tape.conv2d(x, bind(name + ".k"), 1, pad);
        y = tape.bias_add_ch(y, bind(name + ".b"));
        return act ? tape.relu(y) : y;
    };
    auto d0 = block(state, "u.enc0", 1, true);
    auto d1 = block(tape.max_pool2(d0), "u.enc1", 1, true);
    auto d2 = block(tape.max_pool2(d1), "u.enc2", 1, true);
    auto d3 = block(tape.max_pool2(d2), "u.enc3", 1, true);
    auto u2 = block(tape.concat_ch(tape.nearest_upsample2(d3), d2), "u.dec2", 1, true);
    auto u1 = block(tape.concat_ch(tape.nearest_upsample2(u2), d1), "u.dec1", 1, true);
    auto u0 = block(tape.concat_ch(tape.nearest_upsample2(u1), d0), "u.dec0", 1, true);
    return tape.sigmoid(block(u0, "u.head", 0, false));
}

TensorF plain_unet_infer(ParamStore& params, const PlainUNetConfig& cfg,
                         const OrthoProjection& proj) {
    Tape<float> tape;
    ParamBinding<float> bind(tape, params);
    const auto state = tape.constant(state_tensor(proj));
    return tape.value(plain_unet_forward(tape, bind, cfg, state));
}

void SegCounts::absorb(const TensorF& pred, const IRMLabel& label, float tau) {
    assert(pred.numel() == static_cast<int64_t>(label.cells.size()));
    for (int64_t i = 0; i < pred.numel(); ++i) {
        const bool p = pred[i] >= tau;
        const bool l = label.cells[static_cast<size_t>(i)] != 0;
        if (p && l)
            ++tp;
        else if (p && !l)
            ++fp;
        else if (!p && l)
            ++fn;
        else
            ++tn;
    }
}

SegMetrics SegCounts::metrics() const {
    SegMetrics m;
    const auto safe = [](int64_t num, int64_t den) {
        return den > 0 ? static_cast<double>(num) / static_cast<double>(den) : 0.0;
    };
    m.iou = safe(tp, tp + fp + fn);
    m.dice = safe(2 * tp, 2 * tp + fp + fn);
    m.precision = safe(tp, tp + fp);
    m.recall = safe(tp, tp + fn);
    return m;
}

SegMetrics seg_metrics(const TensorF& pred, const IRMLabel& label, float tau) {
    SegCounts c;
    c.absorb(pred, label, tau);
    return c.metrics();
}

std::vector<Candidate> extract_candidates(const TensorF& density, float tau, int max_n) {
    assert(density.ndim() == 3 && max_n >= 1);
    const int kk = density.dim(0), h = density.dim(1), w = density.dim(2);
    std::vector<Candidate> out;
    for (int k = 0; k < kk; ++k)
        for (int v = 0; v < h; ++v)
            for (int u = 0; u < w; ++u) {
                const float s = density[(static_cast<int64_t>(k) * h + v) * w + u];
                if (s >= tau) out.push_back({{u, v, k}, s});
            }
    std::stable_sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
        if (a.score != b.score) return a.score > b.score;
        return grid_pose_less(a.pose, b.pose);
    });
    if (static_cast<int>(out.size()) > max_n) out.resize(static_cast<size_t>(max_n));
    return out;
}

TensorF label_tensor(const IRMLabel& label) {
    TensorF t({label.k, label.hw, label.hw});
    for (int64_t i = 0; i < t.numel(); ++i)
        t[i] = label.cells[static_cast<size_t>(i)] ? 1.0f : 0.0f;
    return t;
}

TrainIrmResult train_irm(const std::vector<IrmSample>& dataset, const TransporterConfig& cfg,
                         const TrainIrmConfig& tcfg) {
    assert(!dataset.empty());
    const int n_total = static_cast<int>(dataset.size());
    const int n_held = std::min(n_total - 1, static_cast<int>(std::lround(
                                                 tcfg.heldout_frac * n_total)));
    const int n_train = n_total - n_held;

    TrainIrmResult result;
    result.params = tcfg.plain ? make_plain_unet_params(tcfg.plain_cfg, tcfg.seed)
                               : make_transporter_params(cfg, tcfg.seed);
    ParamStore& params = result.params;
    AdamConfig adam;
    adam.lr = tcfg.lr;

    // robot cells are fixed per sample
    std::vector<GridPose> cells(dataset.size());
    for (size_t i = 0; i < dataset.size(); ++i) {
        const bool ok =
            world_to_grid(dataset[i].scene.robot_start, dataset[i].proj, cfg.n, cells[i]);
        assert(ok);
        (void)ok;
    }

    std::ofstream csv;
    if (!tcfg.csv_path.empty()) {
        csv.open(tcfg.csv_path);
        csv << "epoch,loss,iou,dice,precision,recall\n";
    }

    std::vector<int> order(static_cast<size_t>(n_train));
    for (int i = 0; i < n_train; ++i) order[static_cast<size_t>(i)] = i;

    auto forward_loss = [&](Tape<float>& tape, ParamBinding<float>& bind, int idx,
                            Tape<float>::Id& out) {
        const auto& s = dataset[static_cast<size_t>(idx)];
        const auto state = tape.constant(state_tensor(s.proj));
        if (tcfg.plain) {
            out = plain_unet_forward(tape, bind, tcfg.plain_cfg, state);
        } else {
            const auto crop = tape.constant(robot_query_crop(
                s.proj, cells[static_cast<size_t>(idx)].u, cells[static_cast<size_t>(idx)].v,
                cfg.crop_px));
            out = transporter_forward(tape, bind, cfg, state, crop);
        }
        return tape.mse_loss(out, tape.constant(label_tensor(s.label)));
    };

    for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
        Rng shuffle_rng(tcfg.seed, 0xe90c + static_cast<uint64_t>(epoch));
        for (int i = n_train - 1; i > 0; --i)
            std::swap(order[static_cast<size_t>(i)],
                      order[static_cast<size_t>(shuffle_rng.uniform_int(0, i))]);

        double loss_sum = 0.0;
        int in_batch = 0;
        params.zero_grad();
        for (int step = 0; step < n_train; ++step) {
            Tape<float> tape;
            ParamBinding<float> bind(tape, params);
            Tape<float>::Id out;
            const auto loss = forward_loss(tape, bind, order[static_cast<size_t>(step)], out);
            loss_sum += tape.value(loss)[0];
            tape.backward(loss);
            bind.harvest();
            ++in_batch;
            if (in_batch == tcfg.batch || step == n_train - 1) {
                params.scale_grad(1.0f / static_cast<float>(in_batch));
                params.adam_step(adam);
                params.zero_grad();
                in_batch = 0;
            }
        }

        EpochMetrics em;
        em.epoch = epoch;
        em.train_loss = loss_sum / n_train;
        if (n_held > 0) {
            SegCounts counts;
            for (int i = n_train; i < n_total; ++i) {
                const auto& s = dataset[static_cast<size_t>(i)];
                const TensorF pred =
                    tcfg.plain
                        ? plain_unet_infer(params, tcfg.plain_cfg, s.proj)
                        : irm_forward(params, cfg, s.proj, cells[static_cast<size_t>(i)].u,
                                      cells[static_cast<size_t>(i)].v);
                counts.absorb(pred, s.label, tcfg.tau);
            }
            em.held = counts.metrics();
        }
        result.log.push_back(em);
        result.final_train_mse = em.train_loss;
        if (csv.is_open())
            csv << em.epoch << "," << em.train_loss << "," << em.held.iou << "," << em.held.dice
                << "," << em.held.precision << "," << em.held.recall << "\n";
    }
    return result;
}

template Tape<float>::Id transporter_forward<float>(Tape<float>&, ParamBinding<float>&,
                                                    const TransporterConfig&, Tape<float>::Id,
                                                    Tape<float>::Id);
template Tape<double>::Id transporter_forward<double>(Tape<double>&, ParamBinding<double>&,
                                                      const TransporterConfig&, Tape<double>::Id,
                                                      Tape<double>::Id);
template Tape<float>::Id plain_unet_forward<float>(Tape<float>&, ParamBinding<float>&,
                                                   const PlainUNetConfig&, Tape<float>::Id);
template Tape<double>::Id plain_unet_forward<double>(Tape<double>&, ParamBinding<double>&,
                                                     const PlainUNetConfig&, Tape<double>::Id);

}  // namespace basepose
