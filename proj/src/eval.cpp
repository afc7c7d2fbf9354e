#include "foldcraft/eval.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>

namespace foldcraft {

namespace fs = std::filesystem;

namespace {

ActionIndex script_step_to_action(const ScriptStep& s, const WorkspaceConfig& cfg) {
    const double mpp = cfg.meters_per_pixel();
    ActionIndex a;
    a.col = std::clamp(static_cast<int>(std::lround(s.pick_m.x / mpp - 0.5)), 0, cfg.image_px - 1);
    a.row = std::clamp(static_cast<int>(std::lround(s.pick_m.y / mpp - 0.5)), 0, cfg.image_px - 1);
    a.rot_bin = s.rot_bin;
    a.scale_bin = s.scale_bin;
    return a;
}

Image hstack_with_divider(const std::vector<Image>& frames, const Image& goal) {
    const int sep = 2;
    const int h = goal.height, w = goal.width;
    const int n = static_cast<int>(frames.size()) + 1;
    Image strip(n * (w + sep) - sep, h, Rgb{200, 200, 200});
    for (int f = 0; f < n; ++f) {
        const Image& src = f < n - 1 ? frames[f] : goal;
        const int x0 = f * (w + sep);
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) strip.set(r, x0 + c, src.get(r, c));
    }
    return strip;
}

}  // namespace

// Coarse-bin headings (K=8, executed direction is -45 deg * k):
//   k=7 -> down-right, k=5 -> down-left, k=3 -> up-left, k=1 -> up-right,
//   k=0 -> right, k=2 -> up, k=4 -> left, k=6 -> down.
std::vector<TaskSpec> standard_tasks(const WorkspaceConfig& cfg) {
    const double o = (cfg.side_m - cfg.fabric_side_m) / 2.0;
    const double f = cfg.fabric_side_m;
    const double cy = o + f / 2.0;
    const Vec2 tl{o, o}, tr{o + f, o}, bl{o, o + f}, br{o + f, o + f};

    std::vector<TaskSpec> tasks;
    tasks.push_back({"small_inward", {{tl, 7, 0}}});
    tasks.push_back({"double_inward", {{tl, 7, 1}, {br, 3, 1}}});
    tasks.push_back({"four_corners_inward", {{tl, 7, 1}, {tr, 5, 1}, {br, 3, 1}, {bl, 1, 1}}});
    tasks.push_back({"single_triangle", {{tl, 7, 2}}});
    // Two parallel folds left-to-right; the second pick sits on the first
    // crease (x = o + 0.13) and carries both layers.
    tasks.push_back({"double_straight", {{{o, cy}, 0, 2}, {{o + 0.135, cy}, 0, 1}}});
    tasks.push_back({"double_triangle", {{tl, 7, 2}, {tr, 5, 2}}});
    return tasks;
}

std::vector<std::string> task_names() {
    return {"small_inward", "double_inward", "four_corners_inward",
            "single_triangle", "double_straight", "double_triangle"};
}

TaskSpec task_by_name(const WorkspaceConfig& cfg, const std::string& name) {
    for (TaskSpec& t : standard_tasks(cfg))
        if (t.name == name) return std::move(t);
    std::string valid;
    for (const std::string& n : task_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw std::invalid_argument("unknown task '" + name + "'; valid tasks: " + valid);
}

GoalPack build_goal(const TaskSpec& task, const WorkspaceConfig& cfg, const ActionDiscretization& disc) {
    FabricState state = make_flat_state(cfg);
    for (std::size_t i = 0; i < task.script.size(); ++i) {
        const ActionIndex a = script_step_to_action(task.script[i], cfg);
        const FabricState next = execute_fold(state, to_world(a, disc, cfg), cfg);
        if (next.positions == state.positions)
            throw std::runtime_error("build_goal: script step " + std::to_string(i) + " of task '" +
                                     task.name + "' failed to grasp");
        state = std::move(next);
    }
    GoalPack g;
    g.obs = render(state, cfg);
    g.state = std::move(state);
    return g;
}

PolicyFactory greedy_policy(const QNetwork& net, const ActionDiscretization& disc, Rgb background) {
    const QNetwork* netp = &net;
    return [netp, disc, background](std::uint64_t) -> PolicyFn {
        return [netp, disc, background](const Image& obs, const Image& goal, const BitMask& mask, int) {
            QModel m{netp, disc, background, Sampling::bilinear, false};
            return m.select(obs, goal, mask);
        };
    };
}

PolicyFactory noscale_policy(const QNetwork& net, const ActionDiscretization& disc, Rgb background) {
    const QNetwork* netp = &net;
    return [netp, disc, background](std::uint64_t) -> PolicyFn {
        return [netp, disc, background](const Image& obs, const Image& goal, const BitMask& mask, int) {
            QModel m{netp, disc, background, Sampling::bilinear, true};
            return m.select(obs, goal, mask);
        };
    };
}

PolicyFactory random_policy(const WorkspaceConfig& cfg, const ActionDiscretization& disc) {
    return [cfg, disc](std::uint64_t seed) -> PolicyFn {
        auto rng = std::make_shared<Rng>(mix_seed(seed, 0x3a11d));
        return [cfg, disc, rng](const Image&, const Image&, const BitMask& mask, int) {
            std::vector<int> on;
            for (std::size_t i = 0; i < mask.bits.size(); ++i)
                if (mask.bits[i]) on.push_back(static_cast<int>(i));
            if (on.empty()) throw std::runtime_error("random policy: empty fabric mask");
            const int pix = on[rng->uniform_int(static_cast<int>(on.size()))];
            ActionIndex a;
            a.row = pix / mask.width;
            a.col = pix % mask.width;
            a.scale_bin = rng->uniform_int(disc.num_scales());
            const double mpp = cfg.meters_per_pixel();
            a.rot_bin = center_bias_rot_bin({(a.col + 0.5) * mpp, (a.row + 0.5) * mpp}, cfg, disc);
            return a;
        };
    };
}

PolicyFactory scripted_policy(const TaskSpec& task, const WorkspaceConfig& cfg) {
    return [task, cfg](std::uint64_t) -> PolicyFn {
        return [task, cfg](const Image&, const Image&, const BitMask&, int step) {
            if (step >= static_cast<int>(task.script.size()))
                throw std::runtime_error("scripted policy: script exhausted without reaching the goal");
            return script_step_to_action(task.script[step], cfg);
        };
    };
}

TrialResult run_trial(const PolicyFactory& policy, const TaskSpec& task, const GoalPack& goal,
                      const WorkspaceConfig& cfg, const ActionDiscretization& disc, const EvalConfig& ecfg,
                      std::uint64_t seed) {
    TrialResult res;
    res.task = task.name;

    Rng rng(mix_seed(seed, 0x731a1));
    const double j = ecfg.start_jitter_m;
    FabricState state = make_flat_state(cfg, {rng.uniform(-j, j), rng.uniform(-j, j)});
    PolicyFn act = policy(seed);

    const BitMask goal_mask = fabric_mask(goal.obs, cfg);
    Image obs = render(state, cfg);
    res.frames.push_back(obs);
    res.iou_trace.push_back(mask_iou(fabric_mask(obs, cfg), goal_mask));

    for (int step = 0; step < ecfg.max_episode_steps; ++step) {
        ActionIndex a;
        try {
            a = act(obs, goal.obs, fabric_mask(obs, cfg), step);
            state = execute_fold(state, to_world(a, disc, cfg), cfg);
        } catch (const std::exception& e) {
            res.diagnostic = e.what();
            break;
        }
        obs = render(state, cfg);
        res.actions.push_back(a);
        res.frames.push_back(obs);
        res.iou_trace.push_back(mask_iou(fabric_mask(obs, cfg), goal_mask));
        if (goal_equal(obs, goal.obs, cfg)) {
            res.success = true;
            break;
        }
    }
    res.steps_used = static_cast<int>(res.actions.size());
    return res;
}

int SuiteResult::successes(const std::string& policy, const std::string& task) const {
    int n = 0;
    for (const SuiteRow& r : rows)
        if (r.policy == policy && r.task == task && r.success) ++n;
    return n;
}

SuiteResult run_suite(const std::vector<std::pair<std::string, PolicyFactory>>& policies,
                      const std::vector<TaskSpec>& tasks, int n_trials, const WorkspaceConfig& cfg,
                      const ActionDiscretization& disc, const EvalConfig& ecfg, std::uint64_t seed,
                      const std::string& out_dir) {
    SuiteResult result;
    std::ofstream csv, traces;
    if (!out_dir.empty()) {
        fs::create_directories(fs::path(out_dir) / "strips");
        csv.open(fs::path(out_dir) / "results.csv", std::ios::binary);
        csv << "policy,task,trial,success,steps,final_iou\n";
        traces.open(fs::path(out_dir) / "iou_traces.csv", std::ios::binary);
        traces << "policy,task,trial,step,iou\n";
    }

    for (std::size_t p = 0; p < policies.size(); ++p) {
        for (std::size_t t = 0; t < tasks.size(); ++t) {
            const GoalPack goal = build_goal(tasks[t], cfg, disc);
            for (int trial = 0; trial < n_trials; ++trial) {
                const std::uint64_t trial_seed =
                    mix_seed(seed, (p + 1) * 1000000 + (t + 1) * 1000 + static_cast<std::uint64_t>(trial));
                const TrialResult r =
                    run_trial(policies[p].second, tasks[t], goal, cfg, disc, ecfg, trial_seed);
                result.rows.push_back({policies[p].first, tasks[t].name, trial, r.success, r.steps_used,
                                       r.iou_trace.back()});
                if (!out_dir.empty()) {
                    char buf[128];
                    std::snprintf(buf, sizeof buf, "%s,%s,%d,%d,%d,%.6f\n", policies[p].first.c_str(),
                                  tasks[t].name.c_str(), trial, r.success ? 1 : 0, r.steps_used,
                                  r.iou_trace.back());
                    csv << buf;
                    for (std::size_t s = 0; s < r.iou_trace.size(); ++s) {
                        std::snprintf(buf, sizeof buf, "%s,%s,%d,%zu,%.6f\n", policies[p].first.c_str(),
                                      tasks[t].name.c_str(), trial, s, r.iou_trace[s]);
                        traces << buf;
                    }
                    std::snprintf(buf, sizeof buf, "strips/%s_%s_trial%02d.png", policies[p].first.c_str(),
                                  tasks[t].name.c_str(), trial);
                    write_png((fs::path(out_dir) / buf).string(), hstack_with_divider(r.frames, goal.obs));
                }
            }
        }
    }
    return result;
}

const GeneralizationRow& GeneralizationReport::row(const std::string& goal, const std::string& disc) const {
    for (const GeneralizationRow& r : rows)
        if (r.goal_name == goal && r.disc_name == disc) return r;
    throw std::out_of_range("generalization report: no row " + goal + "/" + disc);
}

GeneralizationReport generalization_eval(const QNetwork& net, const WorkspaceConfig& cfg,
                                         const ActionDiscretization& coarse,
                                         const ActionDiscretization& fine, const EvalConfig& ecfg,
                                         std::uint64_t seed, const std::string& out_dir) {
    // Crafted goals requiring an angle / distance absent from the coarse bins.
    const double o = (cfg.side_m - cfg.fabric_side_m) / 2.0;
    const double cy = cfg.side_m / 2.0;
    struct Crafted {
        std::string name;
        WorldAction fold;
    };
    const std::vector<Crafted> goals = {
        {"angle_22_5deg", {{o, o}, wrap_angle(kTwoPi * 22.5 / 360.0), 0.13}},
        {"distance_19_5cm", {{o, cy}, 0.0, 0.195}},
    };

    GeneralizationReport report;
    std::uint64_t run_index = 0;
    for (const Crafted& g : goals) {
        FabricState goal_state = execute_fold(make_flat_state(cfg), g.fold, cfg);
        GoalPack goal{render(goal_state, cfg), std::move(goal_state)};
        TaskSpec pseudo{g.name, {}};
        for (const auto& [disc_name, disc] :
             std::vector<std::pair<std::string, ActionDiscretization>>{{"coarse", coarse}, {"fine", fine}}) {
            const TrialResult r = run_trial(greedy_policy(net, disc, cfg.background_color), pseudo, goal,
                                            cfg, disc, ecfg, mix_seed(seed, 0xeea1 + run_index++));
            report.rows.push_back({g.name, disc_name, r.success, r.iou_trace.back(), r.actions});
        }
    }

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        std::ofstream csv(fs::path(out_dir) / "generalization.csv", std::ios::binary);
        csv << "goal,discretization,success,final_iou,actions\n";
        for (const GeneralizationRow& r : report.rows) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "%s,%s,%d,%.6f,%zu\n", r.goal_name.c_str(), r.disc_name.c_str(),
                          r.success ? 1 : 0, r.final_iou, r.actions.size());
            csv << buf;
        }
    }
    return report;
}

}  // namespace foldcraft
