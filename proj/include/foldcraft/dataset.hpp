#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "foldcraft/action_space.hpp"
#include "foldcraft/cloth_sim.hpp"
#include "foldcraft/image.hpp"
#include "foldcraft/rng.hpp"

namespace foldcraft {

struct StoredAction {
    ActionIndex index;
    WorldAction world;  // echo of the executed world-frame action
};

struct Transition {
    int episode_id = 0;
    int step_id = 0;  // contiguous within the episode
    StoredAction action;
};

// Reference to one stored observation.
struct ObsRef {
    int episode = 0;
    int step = 0;
};

// Collected experience: per-episode observation sequences plus the transition
// records tying them together. Immutable after collection; masks are
// precomputed for the HER sampler.
struct Dataset {
    WorkspaceConfig workspace;
    ActionDiscretization disc;
    std::uint64_t seed = 0;
    std::vector<std::vector<Image>> episode_obs;      // episode -> steps+1 images
    std::vector<std::vector<BitMask>> episode_masks;  // parallel to episode_obs
    std::vector<Transition> transitions;
    std::vector<ObsRef> obs_refs;  // flat index over all stored observations

    const Image& obs(const ObsRef& r) const { return episode_obs[r.episode][r.step]; }
    const BitMask& mask(const ObsRef& r) const { return episode_masks[r.episode][r.step]; }
    ObsRef obs_of(const Transition& t) const { return {t.episode_id, t.step_id}; }
    ObsRef next_obs_of(const Transition& t) const { return {t.episode_id, t.step_id + 1}; }
    int obs_count() const { return static_cast<int>(obs_refs.size()); }

    void rebuild_caches();  // masks + obs_refs from episode_obs
};

// Rotation bin whose executed heading points closest to the workspace center
// from the given pick point (the collection-time center bias).
int center_bias_rot_bin(const Vec2& pick_m, const WorkspaceConfig& cfg, const ActionDiscretization& disc);

// Random-policy self-supervised collection: picks uniform over the fabric
// mask, scale bin uniform, rotation bin aimed at the workspace center, with a
// soft reset every `episode_len` actions. Deterministic for a fixed seed.
Dataset collect(const WorkspaceConfig& cfg, const ActionDiscretization& disc, int n_transitions,
                std::uint64_t seed, int episode_len = 10);

// Directory layout: manifest.jsonl (header record, then one record per
// transition) + obs/epNNN_stepMMM.png. Distances in meters, angles in radians.
void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);  // throws naming the offending record

// Goal equivalence: fabric-mask IoU >= 0.9 and mean absolute pixel difference
// within the union mask <= 0.08. Reflexive and symmetric.
bool goal_equal(const Image& a, const Image& b, const WorkspaceConfig& cfg);
bool goal_equal_masked(const Image& a, const Image& b, const BitMask& mask_a, const BitMask& mask_b);

struct HerSample {
    int transition_index = 0;
    ObsRef goal;
    int reward = 0;  // 1 iff goal is goal-equivalent to the achieved next_obs
};

// HER batch: goal = own next observation or a uniformly random stored
// observation, with equal probability; sampling with replacement.
std::vector<HerSample> her_sample(const Dataset& ds, int batch_size, Rng& rng);

struct AugmentConfig {
    double max_shift_px = 5.0;
    double max_rot_deg = 5.0;
};

struct Augmented {
    Image obs;
    Image goal;
    Affine obs_transform;  // content transform applied to obs; remaps actions
};

// Independent rigid perturbation of obs and goal (uniform translation and
// rotation, bilinear, background padding).
Augmented augment(const Image& obs, const Image& goal, const AugmentConfig& cfg, Rgb background, Rng& rng);

// Action pixel remap under an augmentation transform, clamped in-bounds.
void remap_pixel(const Affine& transform, int px, int& row, int& col);

}  // namespace foldcraft
