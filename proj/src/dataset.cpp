#include "foldcraft/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace foldcraft {

namespace fs = std::filesystem;
using nlohmann::json;

void Dataset::rebuild_caches() {
    episode_masks.clear();
    obs_refs.clear();
    for (std::size_t e = 0; e < episode_obs.size(); ++e) {
        std::vector<BitMask> masks;
        masks.reserve(episode_obs[e].size());
        for (std::size_t s = 0; s < episode_obs[e].size(); ++s) {
            masks.push_back(fabric_mask(episode_obs[e][s], workspace));
            obs_refs.push_back({static_cast<int>(e), static_cast<int>(s)});
        }
        episode_masks.push_back(std::move(masks));
    }
}

int center_bias_rot_bin(const Vec2& pick_m, const WorkspaceConfig& cfg, const ActionDiscretization& disc) {
    const Vec2 center{cfg.side_m / 2.0, cfg.side_m / 2.0};
    const double heading = std::atan2(center.y - pick_m.y, center.x - pick_m.x);
    // Executed direction of bin k is -angle(k); want -angle(k) ~ heading.
    const double bin_width = kTwoPi / disc.rotation_bins;
    const long k = std::lround(wrap_angle(-heading) / bin_width);
    return static_cast<int>(k % disc.rotation_bins);
}

namespace {

std::string obs_filename(int episode, int step) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "obs/ep%03d_step%03d.png", episode, step);
    return buf;
}

}  // namespace

Dataset collect(const WorkspaceConfig& cfg, const ActionDiscretization& disc, int n_transitions,
                std::uint64_t seed, int episode_len) {
    if (n_transitions < 1) throw std::invalid_argument("collect: need at least one transition");
    if (episode_len < 1) throw std::invalid_argument("collect: episode length must be positive");
    cfg.validate();
    disc.validate();

    Dataset ds;
    ds.workspace = cfg;
    ds.disc = disc;
    ds.seed = seed;

    Rng rng(mix_seed(seed, 0xc011));
    FabricState state = make_flat_state(cfg);
    ds.episode_obs.push_back({render(state, cfg)});
    int episode = 0;

    for (int t = 0; t < n_transitions; ++t) {
        if (t > 0 && t % episode_len == 0) {
            ++episode;
            state = soft_reset(state, cfg, mix_seed(seed, 0xe50 + static_cast<std::uint64_t>(episode)));
            ds.episode_obs.push_back({render(state, cfg)});
        }
        const Image& obs = ds.episode_obs[episode].back();
        const BitMask mask = fabric_mask(obs, cfg);

        std::vector<int> on;
        on.reserve(mask.bits.size());
        for (std::size_t i = 0; i < mask.bits.size(); ++i)
            if (mask.bits[i]) on.push_back(static_cast<int>(i));
        if (on.empty()) throw std::runtime_error("collect: fabric left the view (empty mask)");

        const int pix = on[rng.uniform_int(static_cast<int>(on.size()))];
        ActionIndex a;
        a.row = pix / mask.width;
        a.col = pix % mask.width;
        a.scale_bin = rng.uniform_int(disc.num_scales());
        const double mpp = cfg.meters_per_pixel();
        a.rot_bin = center_bias_rot_bin({(a.col + 0.5) * mpp, (a.row + 0.5) * mpp}, cfg, disc);

        const WorldAction world = to_world(a, disc, cfg);
        state = execute_fold(state, world, cfg);
        ds.episode_obs[episode].push_back(render(state, cfg));
        ds.transitions.push_back({episode, static_cast<int>(ds.episode_obs[episode].size()) - 2, {a, world}});
    }

    ds.rebuild_caches();
    return ds;
}

// ---------------------------------------------------------------------------
// Persistence

void save_dataset(const Dataset& ds, const std::string& dir) {
    fs::create_directories(fs::path(dir) / "obs");
    for (std::size_t e = 0; e < ds.episode_obs.size(); ++e)
        for (std::size_t s = 0; s < ds.episode_obs[e].size(); ++s)
            write_png((fs::path(dir) / obs_filename(static_cast<int>(e), static_cast<int>(s))).string(),
                      ds.episode_obs[e][s]);

    std::ofstream out(fs::path(dir) / "manifest.jsonl", std::ios::binary);
    if (!out) throw std::runtime_error("save_dataset: cannot write manifest in " + dir);

    json header;
    header["type"] = "header";
    header["seed"] = ds.seed;
    header["transition_count"] = ds.transitions.size();
    header["workspace"] = {{"side_m", ds.workspace.side_m},
                           {"image_px", ds.workspace.image_px},
                           {"fabric_side_m", ds.workspace.fabric_side_m},
                           {"grid_n", ds.workspace.grid_n},
                           {"grasp_radius_m", ds.workspace.grasp_radius_m},
                           {"fabric_color", {ds.workspace.fabric_color.r, ds.workspace.fabric_color.g,
                                             ds.workspace.fabric_color.b}},
                           {"background_color", {ds.workspace.background_color.r, ds.workspace.background_color.g,
                                                 ds.workspace.background_color.b}}};
    header["discretization"] = {{"rotation_bins", ds.disc.rotation_bins},
                                {"scale_factors", ds.disc.scale_factors},
                                {"unit_distance_m", ds.disc.unit_distance_m}};
    out << header.dump() << "\n";

    for (const Transition& t : ds.transitions) {
        json rec;
        rec["episode_id"] = t.episode_id;
        rec["step_id"] = t.step_id;
        rec["action"] = {{"row", t.action.index.row},
                         {"col", t.action.index.col},
                         {"rot_bin", t.action.index.rot_bin},
                         {"scale_bin", t.action.index.scale_bin},
                         {"q_value", t.action.index.q_value}};
        rec["world"] = {{"pick_x_m", t.action.world.pick_xy.x},
                        {"pick_y_m", t.action.world.pick_xy.y},
                        {"direction_rad", t.action.world.direction_rad},
                        {"distance_m", t.action.world.distance_m}};
        rec["obs"] = obs_filename(t.episode_id, t.step_id);
        rec["next_obs"] = obs_filename(t.episode_id, t.step_id + 1);
        out << rec.dump() << "\n";
    }
}

Dataset load_dataset(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "manifest.jsonl", std::ios::binary);
    if (!in) throw std::runtime_error("load_dataset: missing manifest.jsonl in " + dir);

    Dataset ds;
    std::string line;
    int line_no = 0;
    std::size_t declared = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw std::runtime_error("load_dataset: manifest record " + std::to_string(line_no) +
                                     " is not valid JSON: " + e.what());
        }
        if (line_no == 1) {
            if (rec.value("type", "") != "header")
                throw std::runtime_error("load_dataset: manifest record 1 must be the header");
            ds.seed = rec.at("seed").get<std::uint64_t>();
            declared = rec.at("transition_count").get<std::size_t>();
            const json& w = rec.at("workspace");
            ds.workspace.side_m = w.at("side_m").get<double>();
            ds.workspace.image_px = w.at("image_px").get<int>();
            ds.workspace.fabric_side_m = w.at("fabric_side_m").get<double>();
            ds.workspace.grid_n = w.at("grid_n").get<int>();
            ds.workspace.grasp_radius_m = w.at("grasp_radius_m").get<double>();
            const auto fc = w.at("fabric_color");
            const auto bc = w.at("background_color");
            ds.workspace.fabric_color = {fc[0].get<std::uint8_t>(), fc[1].get<std::uint8_t>(),
                                         fc[2].get<std::uint8_t>()};
            ds.workspace.background_color = {bc[0].get<std::uint8_t>(), bc[1].get<std::uint8_t>(),
                                             bc[2].get<std::uint8_t>()};
            const json& d = rec.at("discretization");
            ds.disc.rotation_bins = d.at("rotation_bins").get<int>();
            ds.disc.scale_factors = d.at("scale_factors").get<std::vector<double>>();
            ds.disc.unit_distance_m = d.at("unit_distance_m").get<double>();
            continue;
        }
        try {
            Transition t;
            t.episode_id = rec.at("episode_id").get<int>();
            t.step_id = rec.at("step_id").get<int>();
            const json& a = rec.at("action");
            t.action.index.row = a.at("row").get<int>();
            t.action.index.col = a.at("col").get<int>();
            t.action.index.rot_bin = a.at("rot_bin").get<int>();
            t.action.index.scale_bin = a.at("scale_bin").get<int>();
            t.action.index.q_value = a.at("q_value").get<float>();
            const json& w = rec.at("world");
            t.action.world.pick_xy = {w.at("pick_x_m").get<double>(), w.at("pick_y_m").get<double>()};
            t.action.world.direction_rad = w.at("direction_rad").get<double>();
            t.action.world.distance_m = w.at("distance_m").get<double>();

            const std::string obs_file = rec.at("obs").get<std::string>();
            const std::string next_file = rec.at("next_obs").get<std::string>();
            while (ds.episode_obs.size() <= static_cast<std::size_t>(t.episode_id)) ds.episode_obs.push_back({});
            auto& ep = ds.episode_obs[t.episode_id];
            if (static_cast<int>(ep.size()) != t.step_id)
                throw std::runtime_error("non-contiguous step_id");
            if (ep.empty()) ep.push_back(read_png((fs::path(dir) / obs_file).string()));
            ep.push_back(read_png((fs::path(dir) / next_file).string()));
            ds.transitions.push_back(t);
        } catch (const std::exception& e) {
            throw std::runtime_error("load_dataset: bad manifest record " + std::to_string(line_no) + ": " +
                                     e.what());
        }
    }
    if (line_no == 0) throw std::runtime_error("load_dataset: empty manifest in " + dir);
    if (ds.transitions.size() != declared)
        throw std::runtime_error("load_dataset: header declares " + std::to_string(declared) +
                                 " transitions, manifest holds " + std::to_string(ds.transitions.size()));
    ds.rebuild_caches();
    return ds;
}

// ---------------------------------------------------------------------------
// Goal predicate, HER, augmentation

bool goal_equal_masked(const Image& a, const Image& b, const BitMask& mask_a, const BitMask& mask_b) {
    if (mask_iou(mask_a, mask_b) < 0.9) return false;
    BitMask uni(mask_a.width, mask_a.height);
    for (std::size_t i = 0; i < uni.bits.size(); ++i) uni.bits[i] = mask_a.bits[i] | mask_b.bits[i];
    return masked_mean_abs_diff(a, b, uni) <= 0.08;
}

bool goal_equal(const Image& a, const Image& b, const WorkspaceConfig& cfg) {
    if (a.width != b.width || a.height != b.height)
        throw std::invalid_argument("goal_equal: resolution mismatch");
    return goal_equal_masked(a, b, fabric_mask(a, cfg), fabric_mask(b, cfg));
}

std::vector<HerSample> her_sample(const Dataset& ds, int batch_size, Rng& rng) {
    if (ds.transitions.empty()) throw std::invalid_argument("her_sample: empty dataset");
    std::vector<HerSample> batch;
    batch.reserve(batch_size);
    for (int i = 0; i < batch_size; ++i) {
        HerSample s;
        s.transition_index = rng.uniform_int(static_cast<int>(ds.transitions.size()));
        const Transition& t = ds.transitions[s.transition_index];
        const ObsRef achieved = ds.next_obs_of(t);
        s.goal = rng.coin() ? achieved : ds.obs_refs[rng.uniform_int(ds.obs_count())];
        s.reward = goal_equal_masked(ds.obs(s.goal), ds.obs(achieved), ds.mask(s.goal), ds.mask(achieved))
                       ? 1
                       : 0;
        batch.push_back(s);
    }
    return batch;
}

namespace {
Affine rigid_about_center(int px, double rot_rad, double dx, double dy) {
    const Vec2 c{px / 2.0, px / 2.0};
    return Affine::rotate_scale_about(c, rot_rad, 1.0).then(Affine::translation(dx, dy));
}
}  // namespace

Augmented augment(const Image& obs, const Image& goal, const AugmentConfig& cfg, Rgb background, Rng& rng) {
    const double to_rad = kTwoPi / 360.0;
    Augmented out;
    const double odx = rng.uniform(-cfg.max_shift_px, cfg.max_shift_px);
    const double ody = rng.uniform(-cfg.max_shift_px, cfg.max_shift_px);
    const double orot = rng.uniform(-cfg.max_rot_deg, cfg.max_rot_deg) * to_rad;
    const double gdx = rng.uniform(-cfg.max_shift_px, cfg.max_shift_px);
    const double gdy = rng.uniform(-cfg.max_shift_px, cfg.max_shift_px);
    const double grot = rng.uniform(-cfg.max_rot_deg, cfg.max_rot_deg) * to_rad;

    if (cfg.max_shift_px == 0.0 && cfg.max_rot_deg == 0.0) {
        out.obs = obs;
        out.goal = goal;
        out.obs_transform = Affine::identity();
        return out;
    }
    out.obs_transform = rigid_about_center(obs.width, orot, odx, ody);
    out.obs = warp(obs, out.obs_transform, background, Sampling::bilinear);
    out.goal = warp(goal, rigid_about_center(goal.width, grot, gdx, gdy), background, Sampling::bilinear);
    return out;
}

void remap_pixel(const Affine& transform, int px, int& row, int& col) {
    const Vec2 q = transform.apply({col + 0.5, row + 0.5});
    col = std::clamp(static_cast<int>(std::lround(q.x - 0.5)), 0, px - 1);
    row = std::clamp(static_cast<int>(std::lround(q.y - 0.5)), 0, px - 1);
}

}  // namespace foldcraft
