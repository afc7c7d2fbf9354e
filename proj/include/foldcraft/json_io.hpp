#pragma once

#include <json.hpp>

#include "foldcraft/action_space.hpp"
#include "foldcraft/cloth_sim.hpp"
#include "foldcraft/dataset.hpp"
#include "foldcraft/eval.hpp"
#include "foldcraft/trainer.hpp"

// JSON (de)serialization for the config structs; keys double as the
// documented config-file schema.
namespace foldcraft {

inline void to_json(nlohmann::json& j, const Rgb& c) { j = {c.r, c.g, c.b}; }
inline void from_json(const nlohmann::json& j, Rgb& c) {
    c = {j.at(0).get<std::uint8_t>(), j.at(1).get<std::uint8_t>(), j.at(2).get<std::uint8_t>()};
}

inline void to_json(nlohmann::json& j, const WorkspaceConfig& c) {
    j = nlohmann::json{{"side_m", c.side_m},
                       {"image_px", c.image_px},
                       {"fabric_side_m", c.fabric_side_m},
                       {"grid_n", c.grid_n},
                       {"grasp_radius_m", c.grasp_radius_m},
                       {"fabric_color", c.fabric_color},
                       {"background_color", c.background_color},
                       {"pbd_iterations", c.pbd_iterations},
                       {"stretch_limit", c.stretch_limit},
                       {"substep_m", c.substep_m},
                       {"lift_height_m", c.lift_height_m},
                       {"drop_height_m", c.drop_height_m},
                       {"table_friction", c.table_friction},
                       {"layer_brightness", c.layer_brightness},
                       {"mask_threshold", c.mask_threshold}};
}
inline void from_json(const nlohmann::json& j, WorkspaceConfig& c) {
    c.side_m = j.value("side_m", c.side_m);
    c.image_px = j.value("image_px", c.image_px);
    c.fabric_side_m = j.value("fabric_side_m", c.fabric_side_m);
    c.grid_n = j.value("grid_n", c.grid_n);
    c.grasp_radius_m = j.value("grasp_radius_m", c.grasp_radius_m);
    c.fabric_color = j.value("fabric_color", c.fabric_color);
    c.background_color = j.value("background_color", c.background_color);
    c.pbd_iterations = j.value("pbd_iterations", c.pbd_iterations);
    c.stretch_limit = j.value("stretch_limit", c.stretch_limit);
    c.substep_m = j.value("substep_m", c.substep_m);
    c.lift_height_m = j.value("lift_height_m", c.lift_height_m);
    c.drop_height_m = j.value("drop_height_m", c.drop_height_m);
    c.table_friction = j.value("table_friction", c.table_friction);
    c.layer_brightness = j.value("layer_brightness", c.layer_brightness);
    c.mask_threshold = j.value("mask_threshold", c.mask_threshold);
}

inline void to_json(nlohmann::json& j, const ActionDiscretization& d) {
    j = nlohmann::json{{"rotation_bins", d.rotation_bins},
                       {"scale_factors", d.scale_factors},
                       {"unit_distance_m", d.unit_distance_m}};
}
inline void from_json(const nlohmann::json& j, ActionDiscretization& d) {
    d.rotation_bins = j.value("rotation_bins", d.rotation_bins);
    d.scale_factors = j.value("scale_factors", d.scale_factors);
    d.unit_distance_m = j.value("unit_distance_m", d.unit_distance_m);
}

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = nlohmann::json{{"gamma", c.gamma},
                       {"lr", c.lr},
                       {"batch_size", c.batch_size},
                       {"early_stop_loss", c.early_stop_loss},
                       {"early_stop_window", c.early_stop_window},
                       {"max_steps", c.max_steps},
                       {"target_sync_period", c.target_sync_period},
                       {"seed", c.seed},
                       {"no_scale", c.no_scale}};
}
inline void from_json(const nlohmann::json& j, TrainConfig& c) {
    c.gamma = j.value("gamma", c.gamma);
    c.lr = j.value("lr", c.lr);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.early_stop_loss = j.value("early_stop_loss", c.early_stop_loss);
    c.early_stop_window = j.value("early_stop_window", c.early_stop_window);
    c.max_steps = j.value("max_steps", c.max_steps);
    c.target_sync_period = j.value("target_sync_period", c.target_sync_period);
    c.seed = j.value("seed", c.seed);
    c.no_scale = j.value("no_scale", c.no_scale);
}

inline void to_json(nlohmann::json& j, const AugmentConfig& c) {
    j = nlohmann::json{{"max_shift_px", c.max_shift_px}, {"max_rot_deg", c.max_rot_deg}};
}
inline void from_json(const nlohmann::json& j, AugmentConfig& c) {
    c.max_shift_px = j.value("max_shift_px", c.max_shift_px);
    c.max_rot_deg = j.value("max_rot_deg", c.max_rot_deg);
}

inline void to_json(nlohmann::json& j, const EvalConfig& c) {
    j = nlohmann::json{{"max_episode_steps", c.max_episode_steps},
                       {"start_jitter_m", c.start_jitter_m},
                       {"trials", c.trials}};
}
inline void from_json(const nlohmann::json& j, EvalConfig& c) {
    c.max_episode_steps = j.value("max_episode_steps", c.max_episode_steps);
    c.start_jitter_m = j.value("start_jitter_m", c.start_jitter_m);
    c.trials = j.value("trials", c.trials);
}

}  // namespace foldcraft
