#include "basepose/obp.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <fstream>

namespace basepose {

ParamStore make_obp_params(const ObpConfig& cfg, uint64_t seed) {
    ParamStore p;
    Rng rng(seed, 0x0b9);
    const int e = cfg.embed;

    auto dense = [&](const std::string& name, int out, int in, bool bias = true) {
        p.add(name + ".w", he_normal<float>({out, in}, in, rng));
        if (bias) p.add(name + ".b", TensorF(std::vector<int>{out}));
    };
    auto attvec = [&](const std::string& name) {
        p.add(name, he_normal<float>({e, 1}, e, rng));
    };

    // depth encoder: strided convs + GAP + projection
    int ci = 1;
    for (size_t i = 0; i < cfg.depth_channels.size(); ++i) {
        const int co = cfg.depth_channels[i];
        p.add("d.c" + std::to_string(i) + ".k", he_normal<float>({co, ci, 3, 3}, ci * 9, rng));
        p.add("d.c" + std::to_string(i) + ".b", TensorF(std::vector<int>{co}));
        ci = co;
    }
    dense("d.fc", e, ci);

    // layer 1: typed projections + attention over other candidates
    dense("g1.cbp", e, cfg.cand_feats);
    dense("g1.r", e, cfg.robot_feats, false);
    dense("g1.d", e, e, false);
    dense("g1.bp", e, cfg.cand_feats, false);
    attvec("g1.a1");
    attvec("g1.a2");

    // layers 2-3: self projection + attention-weighted neighbors
    for (int l = 2; l <= 3; ++l) {
        const std::string base = "g" + std::to_string(l);
        dense(base + ".self", e, e);
        dense(base + ".nb", e, e, false);
        attvec(base + ".a1");
        attvec(base + ".a2");
    }

    // decoder MLP: two hidden layers of `embed` neurons
    dense("dec.h0", e, e);
    dense("dec.h1", e, e);
    dense("dec.out", 1, e);
    return p;
}

ObpInputs build_obp_inputs(const std::vector<Candidate>& cands, const OrthoProjection& proj,
                           const Pose2& robot_start, int k_bins) {
    ObpInputs in;
    const int n = static_cast<int>(cands.size());
    const float w = static_cast<float>(proj.hw);
    in.cand = TensorF({n, 5});
    for (int i = 0; i < n; ++i) {
        const auto& c = cands[static_cast<size_t>(i)];
        const double th = c.pose.k * kTwoPi / k_bins;
        in.cand[i * 5 + 0] = static_cast<float>(c.pose.u) / w;
        in.cand[i * 5 + 1] = static_cast<float>(c.pose.v) / w;
        in.cand[i * 5 + 2] = static_cast<float>(std::cos(th));
        in.cand[i * 5 + 3] = static_cast<float>(std::sin(th));
        in.cand[i * 5 + 4] = c.score;
    }
    GridPose rc{0, 0, 0};
    world_to_grid(robot_start, proj, k_bins, rc);
    in.robot = TensorF(std::vector<int>{4});
    in.robot[0] = static_cast<float>(rc.u) / w;
    in.robot[1] = static_cast<float>(rc.v) / w;
    in.robot[2] = static_cast<float>(std::cos(robot_start.theta));
    in.robot[3] = static_cast<float>(std::sin(robot_start.theta));
    in.depth = TensorF({1, proj.hw, proj.hw});
    std::copy(proj.depth.data.begin(), proj.depth.data.end(), in.depth.data.begin());
    return in;
}

template <typename T>
typename Tape<T>::Id obp_forward(Tape<T>& tape, ParamBinding<T>& bind, const ObpConfig& cfg,
                                 typename Tape<T>::Id cand, typename Tape<T>::Id robot,
                                 typename Tape<T>::Id depth) {
    const int n = tape.value(cand).dim(0);
    const T slope = static_cast<T>(cfg.leaky_slope);

    // depth embedding mu(s_depth)
    auto x = depth;
    for (size_t i = 0; i < cfg.depth_channels.size(); ++i) {
        const std::string base = "d.c" + std::to_string(i);
        x = tape.conv2d(x, bind(base + ".k"), 2, 1);
        x = tape.bias_add_ch(x, bind(base + ".b"));
        x = tape.relu(x);
    }
    auto mu = tape.linear(tape.global_avg_pool(x), bind("d.fc.w"), bind("d.fc.b"));  // [e]

    auto matvec = [&](typename Tape<T>::Id m, typename Tape<T>::Id a) {
        return tape.reshape(tape.matmul(m, a), {n});
    };
    auto attention = [&](typename Tape<T>::Id src, typename Tape<T>::Id dst,
                         const std::string& base) {
        // e_ij = leakyrelu(a1 . src_i + a2 . dst_j), softmax over j != i
        auto u = matvec(src, bind(base + ".a1"));
        auto v = matvec(dst, bind(base + ".a2"));
        auto e = tape.leaky_relu(tape.outer_sum(u, v), slope);
        return tape.masked_row_softmax(e);  // [N, N], zero diagonal
    };

    // layer 1: the typed-projection context embedding
    auto wc = tape.linear(cand, bind("g1.cbp.w"), bind("g1.cbp.b"));  // [N, e]
    auto wr = tape.linear(robot, bind("g1.r.w"), Tape<T>::kNone);     // [e]
    auto wd = tape.linear(mu, bind("g1.d.w"), Tape<T>::kNone);        // [e]
    auto h = tape.add_rowvec(tape.add_rowvec(wc, wr), wd);
    if (n > 1) {
        auto wb = tape.linear(cand, bind("g1.bp.w"), Tape<T>::kNone);
        auto alpha = attention(wc, wb, "g1");
        h = tape.add(h, tape.matmul(alpha, wb));
    }
    h = tape.relu(h);

    // layers 2-3: standard attention over candidate embeddings
    for (int l = 2; l <= 3; ++l) {
        const std::string base = "g" + std::to_string(l);
        auto self = tape.linear(h, bind(base + ".self.w"), bind(base + ".self.b"));
        if (n > 1) {
            auto nb = tape.linear(h, bind(base + ".nb.w"), Tape<T>::kNone);
            auto alpha = attention(nb, nb, base);
            self = tape.add(self, tape.matmul(alpha, nb));
        }
        h = tape.relu(self);
    }

    // per-node decoder MLP -> softmax across nodes
    auto d0 = tape.relu(tape.linear(h, bind("dec.h0.w"), bind("dec.h0.b")));
    auto d1 = tape.relu(tape.linear(d0, bind("dec.h1.w"), bind("dec.h1.b")));
    auto logits = tape.reshape(tape.linear(d1, bind("dec.out.w"), bind("dec.out.b")), {n});
    return tape.softmax(logits);
}

Decision decode_select(ParamStore& params, const ObpConfig& cfg, const ObpInputs& in,
                       DecodeMode mode, uint64_t seed) {
    Tape<float> tape;
    ParamBinding<float> bind(tape, params);
    const auto y = obp_forward(tape, bind, cfg, tape.constant(in.cand),
                               tape.constant(in.robot), tape.constant(in.depth));
    Decision d;
    const TensorF& yv = tape.value(y);
    d.likelihoods.assign(yv.data.begin(), yv.data.end());
    if (mode == DecodeMode::kGreedy) {
        d.index = 0;
        for (size_t i = 1; i < d.likelihoods.size(); ++i)
            if (d.likelihoods[i] > d.likelihoods[static_cast<size_t>(d.index)])
                d.index = static_cast<int>(i);
    } else {
        Rng rng(seed, 0xdec0de);
        double r = rng.uniform();
        d.index = static_cast<int>(d.likelihoods.size()) - 1;
        double acc = 0.0;
        for (size_t i = 0; i < d.likelihoods.size(); ++i) {
            acc += d.likelihoods[i];
            if (r < acc) {
                d.index = static_cast<int>(i);
                break;
            }
        }
    }
    return d;
}

double reward_with_nav(const SceneSpec& scene, const RobotModel& robot,
                       const OrthoProjection& proj, const GridPose& a, int k_bins, double nav,
                       const RewardConfig& cfg) {
    const Pose2 pose = grid_to_world(a, proj, k_bins);
    const double c = collision_free(scene, robot, pose) ? 1.0 : 0.0;
    const double i = ik_feasible(scene, robot, pose) ? 1.0 : 0.0;
    return cfg.beta1 * c + cfg.beta2 * i + cfg.beta3 * nav;
}

double reward(const SceneSpec& scene, const RobotModel& robot, const NavCostmap& map,
              const OrthoProjection& proj, const GridPose& a, int k_bins,
              const RewardConfig& cfg) {
    const double nav = nav_cost(map, proj, scene.robot_start, a);
    return reward_with_nav(scene, robot, proj, a, k_bins, nav, cfg);
}

double greedy_baseline(const SceneSpec& scene, const RobotModel& robot,
                       const OrthoProjection& proj, const std::vector<Candidate>& cands,
                       const std::vector<double>& nav, int k_bins, const RewardConfig& cfg) {
    assert(!cands.empty() && cands.size() == nav.size());
    size_t best = 0;
    for (size_t i = 1; i < cands.size(); ++i) {
        if (nav[i] < nav[best] ||
            (nav[i] == nav[best] && grid_pose_less(cands[i].pose, cands[best].pose)))
            best = i;
    }
    return reward_with_nav(scene, robot, proj, cands[best].pose, k_bins, nav[best], cfg);
}

double scaled_advantage(double r, double b, const RewardConfig& cfg) {
    const double d = r - b;
    if (!cfg.sign_preserving) return std::log1p(std::max(cfg.eps, d));
    if (d == 0.0) return 0.0;
    return (d > 0.0 ? 1.0 : -1.0) * std::log1p(std::abs(d));
}

void reinforce_update(const ObpInputs& in, int k, double advantage, const ObpConfig& cfg,
                      ParamStore& params, const AdamConfig& adam) {
    if (advantage == 0.0) return;  // zero advantage leaves the weights unchanged
    Tape<float> tape;
    ParamBinding<float> bind(tape, params);
    const auto y = obp_forward(tape, bind, cfg, tape.constant(in.cand),
                               tape.constant(in.robot), tape.constant(in.depth));
    const auto loss = tape.scale(tape.log(tape.pick(y, k)), static_cast<float>(-advantage));
    params.zero_grad();
    tape.backward(loss);
    bind.harvest();
    params.adam_step(adam);
}

TrainObpResult train_obp(const EpisodeEnv& env, const TrainObpConfig& cfg,
                         const TransporterConfig* stage1_cfg, ParamStore* stage1_params) {
    assert(!cfg.learned_source || (stage1_cfg && stage1_params));
    ObpConfig ocfg;
    TrainObpResult result;
    result.params = make_obp_params(ocfg, cfg.seed);
    AdamConfig adam;
    adam.lr = cfg.lr;

    std::ofstream csv;
    if (!cfg.csv_path.empty()) {
        csv.open(cfg.csv_path);
        csv << "episode,reward,baseline,advantage,rolling_success\n";
    }

    std::vector<int> window;  // 1 = success, ring over the last W decisions
    int wpos = 0;
    int wins = 0;
    for (int ep = 0; ep < cfg.episodes; ++ep) {
        const uint64_t ep_seed = mix_seed(cfg.seed, 0xe0000 + static_cast<uint64_t>(ep));
        const SceneSpec scene = sample_scene(ep_seed, env.scene);
        const OrthoProjection proj = rasterize(scene, env.h_pixels);

        std::vector<Candidate> cands;
        if (cfg.learned_source) {
            GridPose rc;
            world_to_grid(scene.robot_start, proj, env.k_bins, rc);
            const TensorF density = irm_forward(*stage1_params, *stage1_cfg, proj, rc.u, rc.v);
            cands = extract_candidates(density, cfg.tau, cfg.max_candidates);
        } else {
            const IRMLabel irm = compute_irm(scene, env.robot, env.k_bins, proj);
            std::vector<Candidate> all;
            for (int k = 0; k < irm.k; ++k)
                for (int v = 0; v < irm.hw; ++v)
                    for (int u = 0; u < irm.hw; ++u)
                        if (irm.at(k, v, u)) all.push_back({{u, v, k}, 1.0f});
            // deterministic subsample keeps the graph small
            Rng sub(ep_seed, 0x50b);
            cands = std::move(all);
            if (static_cast<int>(cands.size()) > cfg.max_candidates) {
                for (int i = static_cast<int>(cands.size()) - 1; i > 0; --i)
                    std::swap(cands[static_cast<size_t>(i)],
                              cands[static_cast<size_t>(sub.uniform_int(0, i))]);
                cands.resize(static_cast<size_t>(cfg.max_candidates));
            }
        }
        if (cands.empty()) {
            ++result.skipped;
            continue;
        }

        const NavCostmap map = build_costmap(proj, env.robot);
        const std::vector<double> field = nav_cost_field(map, proj, scene.robot_start);
        std::vector<double> nav(cands.size());
        for (size_t i = 0; i < cands.size(); ++i)
            nav[i] = field[static_cast<size_t>(cands[i].pose.v) * map.hw + cands[i].pose.u];

        const ObpInputs in = build_obp_inputs(cands, proj, scene.robot_start, env.k_bins);
        const Decision dec =
            decode_select(result.params, ocfg, in, DecodeMode::kSample, ep_seed);

        const double r =
            reward_with_nav(scene, env.robot, proj, cands[static_cast<size_t>(dec.index)].pose,
                            env.k_bins, nav[static_cast<size_t>(dec.index)], cfg.reward);
        const double b = cfg.use_greedy_baseline ? greedy_baseline(scene, env.robot, proj, cands,
                                                                   nav, env.k_bins, cfg.reward)
                                                 : 0.0;
        const double adv = scaled_advantage(r, b, cfg.reward);
        reinforce_update(in, dec.index, adv, ocfg, result.params, adam);

        const double min_nav = *std::min_element(nav.begin(), nav.end());
        const double tol = proj.resolution * std::numbers::sqrt2 * 0.5;
        const bool success = nav[static_cast<size_t>(dec.index)] <= min_nav + tol;

        if (static_cast<int>(window.size()) < cfg.rolling_window) {
            window.push_back(success ? 1 : 0);
            wins += success ? 1 : 0;
        } else {
            wins -= window[static_cast<size_t>(wpos)];
            window[static_cast<size_t>(wpos)] = success ? 1 : 0;
            wins += success ? 1 : 0;
            wpos = (wpos + 1) % cfg.rolling_window;
        }
        ++result.decided;
        const double rolling = static_cast<double>(wins) / window.size();
        result.rolling.push_back(rolling);
        if (csv.is_open())
            csv << ep << "," << r << "," << b << "," << adv << "," << rolling << "\n";
    }
    result.final_rolling = result.rolling.empty() ? 0.0 : result.rolling.back();
    return result;
}

template Tape<float>::Id obp_forward<float>(Tape<float>&, ParamBinding<float>&, const ObpConfig&,
                                            Tape<float>::Id, Tape<float>::Id, Tape<float>::Id);
template Tape<double>::Id obp_forward<double>(Tape<double>&, ParamBinding<double>&,
                                              const ObpConfig&, Tape<double>::Id,
                                              Tape<double>::Id, Tape<double>::Id);

}  // namespace basepose
