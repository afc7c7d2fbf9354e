#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "foldcraft/action_space.hpp"
#include "foldcraft/cloth_sim.hpp"
#include "foldcraft/dataset.hpp"
#include "foldcraft/qfcn.hpp"

namespace foldcraft {

struct EvalConfig {
    int max_episode_steps = 8;
    double start_jitter_m = 0.0033;  // initial cloth placement jitter per axis
    int trials = 10;
};

// One scripted fold: pick point in meters plus discretized direction/distance.
struct ScriptStep {
    Vec2 pick_m;
    int rot_bin = 0;
    int scale_bin = 0;
};

struct TaskSpec {
    std::string name;
    std::vector<ScriptStep> script;
};

// The six folding goals; scripts are expressible in the coarse discretization.
std::vector<TaskSpec> standard_tasks(const WorkspaceConfig& cfg);
TaskSpec task_by_name(const WorkspaceConfig& cfg, const std::string& name);  // throws listing valid names
std::vector<std::string> task_names();

struct GoalPack {
    Image obs;
    FabricState state;
};

// Executes the task script in a fresh simulator from flat centered cloth.
// Throws when a scripted grasp fails (task definition bug).
GoalPack build_goal(const TaskSpec& task, const WorkspaceConfig& cfg, const ActionDiscretization& disc);

// A policy maps (observation, goal, fabric mask, step index) to an action.
using PolicyFn = std::function<ActionIndex(const Image&, const Image&, const BitMask&, int)>;
using PolicyFactory = std::function<PolicyFn(std::uint64_t trial_seed)>;

PolicyFactory greedy_policy(const QNetwork& net, const ActionDiscretization& disc, Rgb background);
PolicyFactory noscale_policy(const QNetwork& net, const ActionDiscretization& disc, Rgb background);
// The collection-time random policy: uniform mask pixel, uniform distance,
// center-biased heading.
PolicyFactory random_policy(const WorkspaceConfig& cfg, const ActionDiscretization& disc);
PolicyFactory scripted_policy(const TaskSpec& task, const WorkspaceConfig& cfg);

struct TrialResult {
    std::string task;
    bool success = false;
    int steps_used = 0;
    std::vector<double> iou_trace;  // length steps_used + 1
    std::vector<ActionIndex> actions;
    std::vector<Image> frames;  // initial obs, then one per action
    std::string diagnostic;     // non-empty when the trial aborted on error
};

TrialResult run_trial(const PolicyFactory& policy, const TaskSpec& task, const GoalPack& goal,
                      const WorkspaceConfig& cfg, const ActionDiscretization& disc, const EvalConfig& ecfg,
                      std::uint64_t seed);

struct SuiteRow {
    std::string policy;
    std::string task;
    int trial = 0;
    bool success = false;
    int steps = 0;
    double final_iou = 0.0;
};

struct SuiteResult {
    std::vector<SuiteRow> rows;
    int successes(const std::string& policy, const std::string& task) const;
};

// Success counts per (policy, task) over n trials; writes results.csv,
// iou_traces.csv and per-trial render strips when out_dir is non-empty.
SuiteResult run_suite(const std::vector<std::pair<std::string, PolicyFactory>>& policies,
                      const std::vector<TaskSpec>& tasks, int n_trials, const WorkspaceConfig& cfg,
                      const ActionDiscretization& disc, const EvalConfig& ecfg, std::uint64_t seed,
                      const std::string& out_dir = "");

// Test-time action-resolution study: crafted off-bin goals (a 22.5 degree
// fold and a 19.5 cm fold) attempted under two discretizations with the same
// checkpoint; no training occurs.
struct GeneralizationRow {
    std::string goal_name;
    std::string disc_name;
    bool success = false;
    double final_iou = 0.0;
    std::vector<ActionIndex> actions;
};

struct GeneralizationReport {
    std::vector<GeneralizationRow> rows;
    const GeneralizationRow& row(const std::string& goal, const std::string& disc) const;
};

GeneralizationReport generalization_eval(const QNetwork& net, const WorkspaceConfig& cfg,
                                         const ActionDiscretization& coarse,
                                         const ActionDiscretization& fine, const EvalConfig& ecfg,
                                         std::uint64_t seed, const std::string& out_dir = "");

}  // namespace foldcraft
