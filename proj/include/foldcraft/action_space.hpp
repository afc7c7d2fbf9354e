#pragma once

#include <vector>

#include "foldcraft/cloth_sim.hpp"
#include "foldcraft/geometry.hpp"
#include "foldcraft/image.hpp"
#include "foldcraft/qfcn.hpp"
#include "foldcraft/tensor.hpp"

namespace foldcraft {

// Discrete action space: pixel x rotation bin x scale bin. Rotation bin k
// turns the input image by 2*pi*k/K before the forward pass; the canonical
// unit action is a fold to the right in that rotated frame, so the executed
// world heading is the negative of the applied rotation. Scaling the input
// by beta makes the unit action correspond to a fold of unit_distance / beta.
struct ActionDiscretization {
    int rotation_bins = 8;
    std::vector<double> scale_factors = {2.0, 1.0, 0.5};
    double unit_distance_m = 0.13;

    double rotation_angle(int bin) const { return kTwoPi * bin / rotation_bins; }
    int num_scales() const { return static_cast<int>(scale_factors.size()); }

    static ActionDiscretization coarse() { return {}; }
    static ActionDiscretization fine() {
        return {16, {2.0, 1.5, 1.0, 2.0 / 3.0, 0.5}, 0.13};
    }

    void validate() const;  // throws std::invalid_argument
};

struct ActionIndex {
    int row = 0, col = 0;  // pixel in the original observation frame
    int rot_bin = 0;
    int scale_bin = 0;
    float q_value = 0.0f;
};

// Resulting fold distance for a scale bin: unit_distance / beta, exactly.
double fold_distance(int scale_bin, const ActionDiscretization& disc);

// State RGB || goal RGB, normalized to [0,1].
Tensor make_input(const Image& state, const Image& goal);

// Forward affine applied to image content by (rot_bin, scale_bin): rotate
// about the center, then scale about the center.
Affine action_transform(int rot_bin, int scale_bin, const ActionDiscretization& disc, int image_px);

// Warps all channels by the given content transform; samples falling outside
// the input are padded per channel.
Tensor warp_tensor(const Tensor& in, const Affine& fwd, const std::vector<float>& pad, Sampling mode);

// Rotates state and goal channels by the bin angle, then scales by beta.
Tensor transform_input(const Tensor& state_goal, int rot_bin, int scale_bin,
                       const ActionDiscretization& disc, Rgb background,
                       Sampling mode = Sampling::bilinear);

// Maps a discrete action to the world-frame pick / heading / travel.
WorldAction to_world(const ActionIndex& action, const ActionDiscretization& disc, const WorkspaceConfig& cfg);

// No-scale variant: one heatmap per distance bin from an unscaled input.
// Requires a network with num_scales head channels.
Tensor ablation_forward(const QNetwork& net, const Tensor& input);

// Evaluation semantics over a Q-network: the scaled action space by default,
// or the no-scale variant (per-distance head channels, rotations only).
struct QModel {
    const QNetwork* net = nullptr;
    ActionDiscretization disc;
    Rgb background;
    Sampling sampling = Sampling::bilinear;
    bool no_scale = false;

    // Heatmap value at the action's pixel under its (rot, scale) transform.
    float value_at(const Image& state, const Image& goal, const ActionIndex& action) const;

    // Greedy argmax over all mask-valid actions, ties broken lexicographically
    // by (rot_bin, scale_bin, row, col). Throws std::runtime_error when no
    // masked pixel is expressible under any transform.
    ActionIndex select(const Image& state, const Image& goal, const BitMask& mask) const;

    // Max Q over all mask-valid actions (the Bellman backup sweep).
    float max_q(const Image& state, const Image& goal, const BitMask& mask) const;
};

// Spec-level convenience wrapper around QModel::select.
ActionIndex select_action(const QNetwork& net, const Image& state, const Image& goal,
                          const ActionDiscretization& disc, const BitMask& mask, Rgb background,
                          Sampling sampling = Sampling::bilinear);

// Debug visualization: the full rotation x scale heatmap grid, globally
// normalized, with the argmax pixel highlighted.
Image render_heatmap_grid(const QNetwork& net, const Image& state, const Image& goal,
                          const ActionDiscretization& disc, const BitMask& mask, Rgb background);

}  // namespace foldcraft
