// Command-line surface for the base-pose pipeline: scene generation, IRM
// labeling, the two training stages, evaluation, ablations and rendering.
#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "basepose/config.hpp"
#include "basepose/evaluate.hpp"
#include "basepose/kernels.hpp"
#include "basepose/persist.hpp"
#include "basepose/render.hpp"

namespace fs = std::filesystem;
using namespace basepose;

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> sets;
    int64_t seed = -1;
    int workers = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "key = value config file");
    cmd->add_option("--set", args.sets, "override, key=value (repeatable)");
    cmd->add_option("--seed", args.seed, "global seed override");
    cmd->add_option("--workers", args.workers, "thread count for parallel stages");
}

RunConfig resolve_config(const CommonArgs& args) {
    std::vector<std::string> overrides = args.sets;
    if (args.seed >= 0) overrides.push_back("seed=" + std::to_string(args.seed));
    if (args.workers > 0) overrides.push_back("workers=" + std::to_string(args.workers));
    RunConfig cfg = load_config(args.config_path, overrides);
    if (cfg.workers > 0) kernels::set_threads(cfg.workers);
    return cfg;
}

// "path.jsonl:3" -> scene 3 of the file
SceneSpec load_indexed_scene(const std::string& arg, int* index_out = nullptr) {
    std::string path = arg;
    int index = 0;
    const size_t colon = arg.rfind(':');
    if (colon != std::string::npos && colon > 1 && arg.find('/', colon) == std::string::npos) {
        const std::string tail = arg.substr(colon + 1);
        if (!tail.empty() && tail.find_first_not_of("0123456789") == std::string::npos) {
            path = arg.substr(0, colon);
            index = std::stoi(tail);
        }
    }
    const auto scenes = load_scenes_jsonl(path);
    if (index < 0 || index >= static_cast<int>(scenes.size()))
        throw std::runtime_error("scene index out of range: " + arg);
    if (index_out) *index_out = index;
    return scenes[static_cast<size_t>(index)];
}

int cmd_gen_scenes(const CommonArgs& common, int n, const std::string& out) {
    const RunConfig cfg = resolve_config(common);
    const SceneConfig scfg = cfg.scene_config();
    std::vector<SceneSpec> scenes;
    scenes.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        scenes.push_back(sample_scene(mix_seed(cfg.seed, static_cast<uint64_t>(i)), scfg));
    save_scenes_jsonl(out, scenes);
    std::cout << "wrote " << n << " scenes to " << out << "\n";
    return 0;
}

int cmd_gen_irm(const CommonArgs& common, const std::string& scenes_path, int n,
                const std::string& out) {
    const RunConfig cfg = resolve_config(common);
    const RobotModel robot = cfg.robot_model();
    std::vector<IrmSample> samples;
    if (!scenes_path.empty()) {
        for (const SceneSpec& s : load_scenes_jsonl(scenes_path)) {
            IrmSample smp;
            smp.scene = s;
            smp.proj = rasterize(s, cfg.grid_px);
            smp.label = compute_irm(s, robot, cfg.k_orient, smp.proj, cfg.irm_stride_px);
            samples.push_back(std::move(smp));
        }
    } else {
        samples = sample_dataset(n, cfg.seed, cfg.scene_config(), robot, cfg.k_orient,
                                 cfg.grid_px, cfg.irm_stride_px);
    }
    save_irm_dataset(out, samples);
    int64_t pos = 0;
    for (const auto& s : samples) pos += s.label.positive_count();
    std::cout << "wrote " << samples.size() << " samples to " << out << " (mean positive frac "
              << static_cast<double>(pos) /
                     (static_cast<double>(samples.size()) * samples[0].label.cells.size())
              << ")\n";
    return 0;
}

int cmd_train_irm(const CommonArgs& common, const std::string& data, const std::string& out,
                  const std::string& log_csv, bool plain) {
    const RunConfig cfg = resolve_config(common);
    const auto dataset = load_irm_dataset(data);
    TrainIrmConfig tcfg;
    tcfg.epochs = cfg.train_epochs;
    tcfg.batch = cfg.train_batch;
    tcfg.lr = cfg.train_lr;
    tcfg.seed = cfg.seed;
    tcfg.heldout_frac = cfg.heldout_frac;
    tcfg.tau = static_cast<float>(cfg.tau);
    tcfg.plain = plain;
    tcfg.plain_cfg = cfg.plain_unet_config();
    tcfg.csv_path = log_csv;
    const auto res = train_irm(dataset, cfg.transporter_config(), tcfg);
    save_weights(out, res.params);
    const auto& last = res.log.back();
    std::cout << "trained " << (plain ? "plain U-Net" : "equivariant transporter") << ": loss "
              << last.train_loss << ", held-out IoU " << last.held.iou << " -> " << out << "\n";
    return 0;
}

int cmd_train_obp(const CommonArgs& common, const std::string& out, const std::string& log_csv,
                  const std::string& stage1_path) {
    const RunConfig cfg = resolve_config(common);
    EpisodeEnv env{cfg.scene_config(), cfg.robot_model(), cfg.k_orient, cfg.grid_px};
    TrainObpConfig tcfg;
    tcfg.episodes = cfg.obp_episodes;
    tcfg.seed = cfg.seed;
    tcfg.lr = cfg.obp_lr;
    tcfg.max_candidates = cfg.obp_max_candidates;
    tcfg.learned_source = cfg.obp_source == "learned";
    tcfg.tau = static_cast<float>(cfg.tau);
    tcfg.use_greedy_baseline = cfg.obp_use_baseline;
    tcfg.reward = cfg.reward_config();
    tcfg.rolling_window = cfg.rolling_window;
    tcfg.csv_path = log_csv;

    TransporterConfig s1cfg = cfg.transporter_config();
    ParamStore s1;
    if (tcfg.learned_source) {
        if (stage1_path.empty())
            throw std::runtime_error("train-obp: --irm-weights required with obp_source=learned");
        s1 = load_weights(stage1_path);
    }
    const auto res = train_obp(env, tcfg, tcfg.learned_source ? &s1cfg : nullptr,
                               tcfg.learned_source ? &s1 : nullptr);
    save_weights(out, res.params);
    std::cout << "trained obp policy: rolling success " << res.final_rolling << " over "
              << res.decided << " decisions (" << res.skipped << " skipped) -> " << out << "\n";
    return 0;
}

int cmd_eval(const CommonArgs& common, const std::string& methods_csv,
             const std::string& scenes_path, const std::string& irm_path,
             const std::string& stage1_path, const std::string& stage2_path,
             const std::string& out) {
    const RunConfig cfg = resolve_config(common);
    std::vector<Method> methods;
    {
        std::stringstream ss(methods_csv);
        std::string item;
        while (std::getline(ss, item, ',')) {
            const auto m = method_from_name(item);
            if (!m) throw std::runtime_error("unknown method: " + item);
            methods.push_back(*m);
        }
    }
    EvalContext ctx;
    ctx.scene = cfg.scene_config();
    ctx.robot = cfg.robot_model();
    ctx.k_bins = cfg.k_orient;
    ctx.h_pixels = cfg.grid_px;
    ctx.tau = static_cast<float>(cfg.tau);
    ctx.max_candidates = cfg.eval_max_candidates;
    ctx.stage1_cfg = cfg.transporter_config();
    ctx.fbp_standoff = cfg.fbp_standoff;
    ParamStore s1, s2;
    if (!stage1_path.empty()) {
        s1 = load_weights(stage1_path);
        ctx.stage1 = &s1;
    }
    if (!stage2_path.empty()) {
        s2 = load_weights(stage2_path);
        ctx.stage2 = &s2;
    }
    (void)scenes_path;
    (void)irm_path;  // scenes regenerate from the seed; files kept for piping
    const EvalReport report = evaluate(methods, cfg.eval_scenes, cfg.seed, ctx);
    save_eval_report(out, report);
    for (const auto& [name, m] : report.methods)
        std::cout << name << ": time " << m.time_mean << "s, path " << m.path_mean
                  << "m, success(min-cost) " << m.success_min_cost << ", success(feasible) "
                  << m.success_feasible << ", abstained " << m.abstained << "\n";
    std::cout << "wrote " << out << "\n";
    return 0;
}

int cmd_ablate(const CommonArgs& common, const std::string& study, int seeds,
               const std::string& out_json) {
    const RunConfig cfg = resolve_config(common);
    std::vector<AblationRun> runs;
    if (study == "irm") {
        const auto dataset =
            sample_dataset(cfg.eval_scenes, cfg.seed, cfg.scene_config(), cfg.robot_model(),
                           cfg.k_orient, cfg.grid_px, cfg.irm_stride_px);
        for (int s = 0; s < seeds; ++s) {
            for (const bool plain : {false, true}) {
                TrainIrmConfig tcfg;
                tcfg.epochs = cfg.train_epochs;
                tcfg.batch = cfg.train_batch;
                tcfg.lr = cfg.train_lr;
                tcfg.seed = mix_seed(cfg.seed, 100 + static_cast<uint64_t>(s));
                tcfg.heldout_frac = cfg.heldout_frac;
                tcfg.tau = static_cast<float>(cfg.tau);
                tcfg.plain = plain;
                tcfg.plain_cfg = cfg.plain_unet_config();
                const auto res = train_irm(dataset, cfg.transporter_config(), tcfg);
                AblationRun run;
                run.arm = plain ? "unet" : "equivariant";
                run.seed = tcfg.seed;
                run.budget = tcfg.epochs;
                run.final_metric = res.log.back().held.iou;
                for (const auto& e : res.log) run.curve.push_back(e.held.iou);
                runs.push_back(std::move(run));
            }
        }
        // report equivariant first
        std::stable_sort(runs.begin(), runs.end(),
                         [](const AblationRun& a, const AblationRun& b) {
                             return a.arm == "equivariant" && b.arm != "equivariant";
                         });
    } else if (study == "obp") {
        EpisodeEnv env{cfg.scene_config(), cfg.robot_model(), cfg.k_orient, cfg.grid_px};
        for (int s = 0; s < seeds; ++s) {
            for (const bool baseline : {true, false}) {
                TrainObpConfig tcfg;
                tcfg.episodes = cfg.obp_episodes;
                tcfg.seed = mix_seed(cfg.seed, 200 + static_cast<uint64_t>(s));
                tcfg.lr = cfg.obp_lr;
                tcfg.max_candidates = cfg.obp_max_candidates;
                tcfg.use_greedy_baseline = baseline;
                tcfg.reward = cfg.reward_config();
                tcfg.rolling_window = cfg.rolling_window;
                const auto res = train_obp(env, tcfg);
                AblationRun run;
                run.arm = baseline ? "greedy_baseline" : "no_baseline";
                run.seed = tcfg.seed;
                run.budget = tcfg.episodes;
                run.final_metric = res.final_rolling;
                run.curve = res.rolling;
                runs.push_back(std::move(run));
            }
        }
        std::stable_sort(runs.begin(), runs.end(),
                         [](const AblationRun& a, const AblationRun& b) {
                             return a.arm == "greedy_baseline" && b.arm != "greedy_baseline";
                         });
    } else {
        throw std::runtime_error("ablate: study must be 'irm' or 'obp'");
    }

    const AblationReport rep = ablation_report(runs);
    std::string json = "{\n  \"study\": \"" + study + "\",\n  \"arms\": {\n";
    bool first = true;
    for (const auto& arm : rep.arm_order) {
        const auto& a = rep.arms.at(arm);
        if (!first) json += ",\n";
        first = false;
        json += "    \"" + arm + "\": {\"mean\": " + std::to_string(a.mean) +
                ", \"min\": " + std::to_string(a.min) + ", \"max\": " + std::to_string(a.max) +
                ", \"runs\": " + std::to_string(a.runs) + "}";
    }
    json += "\n  },\n  \"gap\": " + std::to_string(rep.gap) + "\n}\n";
    atomic_write(out_json, json);
    std::cout << json;
    return 0;
}

int cmd_render(const CommonArgs& common, const std::string& scene_arg,
               const std::string& density_weights, const std::string& irm_path,
               const std::string& out_dir) {
    const RunConfig cfg = resolve_config(common);
    fs::create_directories(out_dir);
    const SceneSpec scene = load_indexed_scene(scene_arg);
    const OrthoProjection proj = rasterize(scene, cfg.grid_px);

    atomic_write((fs::path(out_dir) / "scene.ppm").string(), to_p6(render_scene(proj)));
    int files = 1;

    if (!density_weights.empty()) {
        ParamStore params = load_weights(density_weights);
        const TransporterConfig tcfg = cfg.transporter_config();
        GridPose rc;
        world_to_grid(scene.robot_start, proj, cfg.k_orient, rc);
        const TensorF density = irm_forward(params, tcfg, proj, rc.u, rc.v);
        for (int k = 0; k < cfg.k_orient; ++k) {
            TensorF ch({proj.hw, proj.hw});
            std::copy(density.data.begin() + static_cast<int64_t>(k) * proj.hw * proj.hw,
                      density.data.begin() + static_cast<int64_t>(k + 1) * proj.hw * proj.hw,
                      ch.data.begin());
            int clamped = 0;
            Image img = render_heatmap(ch, &clamped);
            if (clamped > 0)
                std::cerr << "warning: clamped " << clamped << " out-of-range values\n";
            atomic_write((fs::path(out_dir) / ("density_k" + std::to_string(k) + ".ppm")).string(),
                         to_p6(img));
            ++files;
        }
    }
    if (!irm_path.empty()) {
        const auto samples = load_irm_dataset(irm_path);
        if (!samples.empty()) {
            const auto& label = samples[0].label;
            for (int k = 0; k < label.k; ++k) {
                TensorF ch({label.hw, label.hw});
                for (int64_t i = 0; i < ch.numel(); ++i)
                    ch[i] = label.cells[static_cast<size_t>(k) * ch.numel() + i] ? 1.0f : 0.0f;
                atomic_write(
                    (fs::path(out_dir) / ("irm_k" + std::to_string(k) + ".ppm")).string(),
                    to_p6(render_heatmap(ch)));
                ++files;
            }
        }
    }
    std::cout << "wrote " << files << " images to " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"base-pose-for-grasping pipeline"};
    app.require_subcommand(1);

    CommonArgs common;
    int n = 10;
    std::string out, scenes_path, irm_path, data_path, log_csv, methods = "nbs";
    std::string stage1_path, stage2_path, scene_arg, density_weights, study = "irm";
    int seeds = 3;
    bool plain = false;

    auto* gen_scenes = app.add_subcommand("gen-scenes", "sample scenes to JSONL");
    add_common(gen_scenes, common);
    gen_scenes->add_option("--n", n, "number of scenes");
    gen_scenes->add_option("--out", out, "output JSONL")->required();

    auto* gen_irm = app.add_subcommand("gen-irm", "compute IRM labels into an IRMD archive");
    add_common(gen_irm, common);
    gen_irm->add_option("--scenes", scenes_path, "input scenes JSONL (else sampled fresh)");
    gen_irm->add_option("--n", n, "samples when generating fresh scenes");
    gen_irm->add_option("--out", out, "output IRMD")->required();

    auto* train_irm_cmd = app.add_subcommand("train-irm", "supervised stage-1 training");
    add_common(train_irm_cmd, common);
    train_irm_cmd->add_option("--data", data_path, "IRMD dataset")->required();
    train_irm_cmd->add_option("--out", out, "output weights (WTSB)")->required();
    train_irm_cmd->add_option("--log", log_csv, "per-epoch metrics CSV");
    train_irm_cmd->add_flag("--plain-unet", plain, "train the plain U-Net twin");

    auto* train_obp_cmd = app.add_subcommand("train-obp", "REINFORCE stage-2 training");
    add_common(train_obp_cmd, common);
    train_obp_cmd->add_option("--out", out, "output weights (WTSB)")->required();
    train_obp_cmd->add_option("--log", log_csv, "per-episode CSV");
    train_obp_cmd->add_option("--irm-weights", stage1_path, "stage-1 weights (learned source)");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate methods on random scenes");
    add_common(eval_cmd, common);
    eval_cmd->add_option("--method,--methods", methods, "comma list: fbp,pbs,nbs,learned");
    eval_cmd->add_option("--scenes", scenes_path, "scenes JSONL (informational)");
    eval_cmd->add_option("--irm", irm_path, "IRMD archive (informational)");
    eval_cmd->add_option("--stage1", stage1_path, "stage-1 weights");
    eval_cmd->add_option("--stage2", stage2_path, "stage-2 weights");
    eval_cmd->add_option("--out", out, "metrics.json path")->required();

    auto* ablate_cmd = app.add_subcommand("ablate", "paired ablation runs + report");
    add_common(ablate_cmd, common);
    ablate_cmd->add_option("--study", study, "irm | obp");
    ablate_cmd->add_option("--seeds", seeds, "seed count per arm");
    ablate_cmd->add_option("--out", out, "report JSON")->required();

    auto* render_cmd = app.add_subcommand("render", "P6 renders of scenes/densities/IRMs");
    add_common(render_cmd, common);
    render_cmd->add_option("--scene", scene_arg, "scenes.jsonl[:index]")->required();
    render_cmd->add_option("--density", density_weights, "stage-1 weights to visualize");
    render_cmd->add_option("--irm", irm_path, "IRMD archive to visualize");
    render_cmd->add_option("--out", out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (gen_scenes->parsed()) return cmd_gen_scenes(common, n, out);
        if (gen_irm->parsed()) return cmd_gen_irm(common, scenes_path, n, out);
        if (train_irm_cmd->parsed()) return cmd_train_irm(common, data_path, out, log_csv, plain);
        if (train_obp_cmd->parsed()) return cmd_train_obp(common, out, log_csv, stage1_path);
        if (eval_cmd->parsed())
            return cmd_eval(common, methods, scenes_path, irm_path, stage1_path, stage2_path, out);
        if (ablate_cmd->parsed()) return cmd_ablate(common, study, seeds, out);
        if (render_cmd->parsed())
            return cmd_render(common, scene_arg, density_weights, irm_path, out);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
