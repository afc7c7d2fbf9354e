#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "foldcraft/geometry.hpp"
#include "foldcraft/image.hpp"

namespace foldcraft {

struct WorkspaceConfig {
    double side_m = 0.33;          // square workspace edge
    int image_px = 200;            // observation edge; desk-scale runs use 64
    double fabric_side_m = 0.30;   // cloth edge
    int grid_n = 25;               // particles per cloth edge
    double grasp_radius_m = 0.02;  // pick capture radius
    Rgb fabric_color{204, 72, 60};
    Rgb background_color{28, 28, 32};

    // Simulation tuning.
    int pbd_iterations = 30;          // constraint projection sweeps per substep
    double stretch_limit = 1.15;      // max edge length as multiple of rest length
    double substep_m = 0.01;          // gripper travel per substep
    double lift_height_m = 0.035;     // fold carry height
    double drop_height_m = 0.08;      // soft-reset carry height
    double table_friction = 0.22;     // projection weight of on-table particles
    double layer_brightness = 0.08;   // per-layer shade offset
    double mask_threshold = 30.0;     // RGB distance from background, 8-bit units

    double meters_per_pixel() const { return side_m / image_px; }
    void validate() const;  // throws std::invalid_argument on bad geometry
};

// Particle-grid cloth configuration; immutable snapshot between operations.
struct FabricState {
    int grid_n = 0;
    double rest_length_m = 0.0;
    std::vector<Vec3> positions;   // grid_n^2, row-major; z is stacking height
    std::vector<int> layer_rank;   // draw order, higher on top
    std::uint64_t rng_seed = 0;    // seed of the last stochastic drop

    int index(int i, int j) const { return i * grid_n + j; }
    Vec2 centroid_xy() const;
};

struct WorldAction {
    Vec2 pick_xy;              // meters, workspace frame
    double direction_rad = 0;  // fold heading, [0, 2pi)
    double distance_m = 0;     // fold travel
};

// Flat cloth centered in the workspace, optionally offset.
FabricState make_flat_state(const WorkspaceConfig& cfg, Vec2 center_offset = {0.0, 0.0});

// Pick-lift-drag-drop fold. Deterministic; failed grasp returns the state
// unchanged. Throws std::invalid_argument on non-finite input or a travel
// distance beyond the workspace diagonal.
FabricState execute_fold(const FabricState& state, const WorldAction& action, const WorkspaceConfig& cfg);

// Orthographic top-down rasterization; pure function of (state, cfg).
Image render(const FabricState& state, const WorkspaceConfig& cfg);

// Pixels covered by any cloth face: the renderer's own ground-truth mask.
BitMask render_coverage(const FabricState& state, const WorkspaceConfig& cfg);

// Color-threshold mask; equals render_coverage exactly on simulator renders.
BitMask fabric_mask(const Image& obs, const WorkspaceConfig& cfg);

// Grasp the particle nearest the centroid, carry it to the workspace center,
// drop with seeded randomness. Deterministic per seed.
FabricState soft_reset(const FabricState& state, const WorkspaceConfig& cfg, std::uint64_t seed);

// Flat binary snapshot (header + little-endian floats); layout in README.
void save_state(const std::string& path, const FabricState& state);
FabricState load_state(const std::string& path);

// Max edge length over structural constraints, as a multiple of rest length.
double max_edge_stretch(const FabricState& state);

}  // namespace foldcraft
