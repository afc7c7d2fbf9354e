#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "foldcraft/action_space.hpp"
#include "foldcraft/dataset.hpp"
#include "foldcraft/qfcn.hpp"

namespace foldcraft {

struct TrainConfig {
    double gamma = 0.5;
    double lr = 1e-4;
    int batch_size = 10;
    double early_stop_loss = 0.05;
    int early_stop_window = 200;  // consecutive steps of the running mean
    int max_steps = 25000;
    int target_sync_period = 500;
    std::uint64_t seed = 0;
    bool no_scale = false;  // train the per-distance-head ablation variant

    void validate() const;
};

struct TrainReport {
    int steps = 0;
    std::vector<float> loss_curve;    // per-step Huber mean
    std::vector<float> mean_q_curve;  // per-step mean batch prediction
    std::string stop_reason;          // early_stop | max_steps | nan_loss
    std::string checkpoint_path;      // empty when no out_dir was given
};

// Eq.-style TD target: reward-1 transitions are terminal (y = 1, no
// bootstrap); otherwise gamma * max target-Q over all mask-valid actions on
// the transformed (next_obs || goal). Empty mask -> the bare reward.
double q_target(int reward, const Image& next_obs, const Image& goal, const QModel& target_model,
                const BitMask& mask, double gamma);

// Offline DQN loop over HER batches with single-pixel Huber backprop, Adam
// updates and periodic hard target sync. Deterministic for a fixed seed.
// When out_dir is non-empty, writes checkpoint.bin, train_log.csv and
// config_echo.json there.
TrainReport train(const Dataset& ds, QNetwork& net, const TrainConfig& cfg, const AugmentConfig& aug,
                  const std::string& out_dir = "");

// Heatmap value at the stored action's pixel under its (rot, scale)
// transform; the argmax of this over actions matches select_action.
float evaluate_q(const QNetwork& net, const Image& obs, const Image& goal, const ActionIndex& action,
                 const ActionDiscretization& disc, Rgb background);

}  // namespace foldcraft
