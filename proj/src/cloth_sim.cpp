#include "foldcraft/cloth_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <stdexcept>

#include "foldcraft/rng.hpp"

namespace foldcraft {

namespace {

constexpr double kFallPerSubstep = 0.008;   // free-fall travel per substep
constexpr double kContactZ = 0.0015;        // below this a particle is "on the table"
constexpr double kReleaseZ = 0.004;         // gripper height at release
constexpr double kLayerGap = 0.0006;        // nominal stack height per layer
constexpr int kSettleSubsteps = 24;

struct Edge {
    int a, b;
    double rest;
};

std::vector<Edge> build_edges(int n, double rest) {
    std::vector<Edge> edges;
    edges.reserve(static_cast<std::size_t>(4 * n * n));
    const double diag = rest * std::sqrt(2.0);
    auto idx = [n](int i, int j) { return i * n + j; };
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (j + 1 < n) edges.push_back({idx(i, j), idx(i, j + 1), rest});
            if (i + 1 < n) edges.push_back({idx(i, j), idx(i + 1, j), rest});
            if (i + 1 < n && j + 1 < n) {
                edges.push_back({idx(i, j), idx(i + 1, j + 1), diag});
                edges.push_back({idx(i, j + 1), idx(i + 1, j), diag});
            }
        }
    }
    return edges;
}

class ClothSolver {
public:
    ClothSolver(FabricState state, const WorkspaceConfig& cfg)
        : cfg_(cfg), state_(std::move(state)), edges_(build_edges(state_.grid_n, state_.rest_length_m)) {
        weight_.assign(state_.positions.size(), 1.0);
    }

    FabricState take() && { return std::move(state_); }
    const FabricState& state() const { return state_; }
    std::vector<Vec3>& positions() { return state_.positions; }

    // Particles within grasp radius (horizontal distance) of the pick point.
    std::vector<int> capture(const Vec2& pick) const {
        std::vector<int> grabbed;
        for (std::size_t p = 0; p < state_.positions.size(); ++p) {
            if ((state_.positions[p].xy() - pick).norm() <= cfg_.grasp_radius_m)
                grabbed.push_back(static_cast<int>(p));
        }
        return grabbed;
    }

    // Carries `grabbed` rigidly along a straight gripper path. The gripper
    // starts at the grasp point with z = 0 and visits each waypoint in turn.
    void carry(const std::vector<int>& grabbed, const Vec2& pick, const std::vector<Vec3>& waypoints) {
        std::vector<Vec3> offset(grabbed.size());
        Vec3 grip{pick.x, pick.y, 0.0};
        for (std::size_t k = 0; k < grabbed.size(); ++k)
            offset[k] = state_.positions[grabbed[k]] - grip;
        for (const Vec3& target : waypoints) {
            const double travel = (target - grip).norm();
            const int steps = std::max(1, static_cast<int>(std::ceil(travel / cfg_.substep_m)));
            const Vec3 delta = (target - grip) * (1.0 / steps);
            for (int s = 0; s < steps; ++s) {
                grip += delta;
                for (std::size_t k = 0; k < grabbed.size(); ++k)
                    state_.positions[grabbed[k]] = grip + offset[k];
                substep(grabbed);
            }
        }
    }

    void settle(int substeps = kSettleSubsteps) {
        static const std::vector<int> none;
        for (int s = 0; s < substeps; ++s) substep(none);
    }

    // Flattens z onto the layer stack implied by layer_rank.
    void stack_z() {
        for (std::size_t p = 0; p < state_.positions.size(); ++p)
            state_.positions[p].z = state_.layer_rank[p] * kLayerGap;
    }

private:
    void substep(const std::vector<int>& grabbed) {
        for (std::size_t p = 0; p < weight_.size(); ++p) weight_[p] = 1.0;
        for (int g : grabbed) weight_[g] = 0.0;
        // Gravity, then contact friction via projection weights.
        for (std::size_t p = 0; p < state_.positions.size(); ++p) {
            if (weight_[p] == 0.0) continue;
            Vec3& pos = state_.positions[p];
            pos.z = std::max(0.0, pos.z - kFallPerSubstep);
            if (pos.z < kContactZ) weight_[p] = cfg_.table_friction;
        }
        for (int it = 0; it < cfg_.pbd_iterations; ++it) {
            for (const Edge& e : edges_) {
                Vec3& pa = state_.positions[e.a];
                Vec3& pb = state_.positions[e.b];
                const Vec3 d = pb - pa;
                const double len = d.norm();
                if (len <= e.rest || len < 1e-12) continue;  // stretch-only: cloth buckles freely
                const double wa = weight_[e.a], wb = weight_[e.b];
                const double wsum = wa + wb;
                if (wsum == 0.0) continue;
                const Vec3 corr = d * ((len - e.rest) / (len * wsum));
                pa += corr * wa;
                pb -= corr * wb;
                if (pa.z < 0.0) pa.z = 0.0;
                if (pb.z < 0.0) pb.z = 0.0;
            }
        }
    }

    const WorkspaceConfig& cfg_;
    FabricState state_;
    std::vector<Edge> edges_;
    std::vector<double> weight_;
};

// Signed area of the local parameter frame at (i, j); flips when the material
// around the particle has been mirrored by a fold.
double orient_sign(const FabricState& s, int i, int j) {
    const int n = s.grid_n;
    const int i0 = std::max(i - 1, 0), i1 = std::min(i + 1, n - 1);
    const int j0 = std::max(j - 1, 0), j1 = std::min(j + 1, n - 1);
    const Vec2 u = s.positions[s.index(i, j1)].xy() - s.positions[s.index(i, j0)].xy();
    const Vec2 v = s.positions[s.index(i1, j)].xy() - s.positions[s.index(i0, j)].xy();
    return u.x * v.y - u.y * v.x;
}

// Updates layer ranks after a fold: particles whose orientation flipped are
// stacked above whatever non-flipped material they landed on, with the flap's
// internal order inverted (the top of a flipped stack ends up lowest).
void restack_layers(FabricState& s, const std::vector<double>& sign_before) {
    const int n = s.grid_n;
    const double eps = 0.04 * s.rest_length_m * s.rest_length_m;
    std::vector<char> toggled(s.positions.size(), 0);
    bool any = false;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const int p = s.index(i, j);
            const double after = orient_sign(s, i, j);
            if (std::abs(after) < eps || std::abs(sign_before[p]) < eps) continue;
            if (after * sign_before[p] < 0.0) {
                toggled[p] = 1;
                any = true;
            }
        }
    }
    if (!any) return;

    int flap_max_rank = 0;
    for (std::size_t p = 0; p < toggled.size(); ++p)
        if (toggled[p]) flap_max_rank = std::max(flap_max_rank, s.layer_rank[p]);

    const double near = 0.8 * s.rest_length_m;
    const double near2 = near * near;
    std::vector<int> new_rank = s.layer_rank;
    for (std::size_t p = 0; p < toggled.size(); ++p) {
        if (!toggled[p]) continue;
        int base = -1;
        const Vec2 at = s.positions[p].xy();
        for (std::size_t q = 0; q < toggled.size(); ++q) {
            if (toggled[q]) continue;
            const Vec2 d = s.positions[q].xy() - at;
            if (d.x * d.x + d.y * d.y <= near2) base = std::max(base, s.layer_rank[q]);
        }
        new_rank[p] = base + 1 + (flap_max_rank - s.layer_rank[p]);
    }
    s.layer_rank = std::move(new_rank);
}

std::vector<double> all_signs(const FabricState& s) {
    std::vector<double> signs(s.positions.size());
    for (int i = 0; i < s.grid_n; ++i)
        for (int j = 0; j < s.grid_n; ++j) signs[s.index(i, j)] = orient_sign(s, i, j);
    return signs;
}

Rgb layer_color(const WorkspaceConfig& cfg, int rank) {
    const double f = 1.0 + cfg.layer_brightness * rank;
    auto ch = [f](std::uint8_t c) {
        const long v = std::lround(c * f);
        return static_cast<std::uint8_t>(v < 0 ? 0 : (v > 255 ? 255 : v));
    };
    return {ch(cfg.fabric_color.r), ch(cfg.fabric_color.g), ch(cfg.fabric_color.b)};
}

struct RasterOut {
    Image image;
    BitMask coverage;
};

RasterOut rasterize(const FabricState& s, const WorkspaceConfig& cfg) {
    const int px = cfg.image_px;
    RasterOut out{Image(px, px, cfg.background_color), BitMask(px, px)};
    std::vector<int> rank_buf(static_cast<std::size_t>(px) * px, -1);
    const double mpp = cfg.meters_per_pixel();
    const int n = s.grid_n;

    auto shade = [&](int rank) { return layer_color(cfg, rank); };

    for (int i = 0; i + 1 < n; ++i) {
        for (int j = 0; j + 1 < n; ++j) {
            const int q00 = s.index(i, j), q01 = s.index(i, j + 1);
            const int q10 = s.index(i + 1, j), q11 = s.index(i + 1, j + 1);
            const int corners[2][3] = {{q00, q01, q11}, {q00, q11, q10}};
            for (const auto& tri : corners) {
                Vec2 a = s.positions[tri[0]].xy();
                Vec2 b = s.positions[tri[1]].xy();
                Vec2 c = s.positions[tri[2]].xy();
                const int rank = std::max({s.layer_rank[tri[0]], s.layer_rank[tri[1]], s.layer_rank[tri[2]]});
                double area2 = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
                if (area2 < 0.0) {
                    std::swap(b, c);
                    area2 = -area2;
                }
                if (area2 < 1e-14) continue;
                const double xmin = std::min({a.x, b.x, c.x}), xmax = std::max({a.x, b.x, c.x});
                const double ymin = std::min({a.y, b.y, c.y}), ymax = std::max({a.y, b.y, c.y});
                const int c0 = std::max(0, static_cast<int>(std::floor(xmin / mpp - 0.5)));
                const int c1 = std::min(px - 1, static_cast<int>(std::ceil(xmax / mpp)));
                const int r0 = std::max(0, static_cast<int>(std::floor(ymin / mpp - 0.5)));
                const int r1 = std::min(px - 1, static_cast<int>(std::ceil(ymax / mpp)));
                const Rgb color = shade(rank);
                for (int r = r0; r <= r1; ++r) {
                    const double y = (r + 0.5) * mpp;
                    for (int col = c0; col <= c1; ++col) {
                        const double x = (col + 0.5) * mpp;
                        const double e0 = (b.x - a.x) * (y - a.y) - (b.y - a.y) * (x - a.x);
                        const double e1 = (c.x - b.x) * (y - b.y) - (c.y - b.y) * (x - b.x);
                        const double e2 = (a.x - c.x) * (y - c.y) - (a.y - c.y) * (x - c.x);
                        if (e0 < 0.0 || e1 < 0.0 || e2 < 0.0) continue;
                        const std::size_t pix = static_cast<std::size_t>(r) * px + col;
                        out.coverage.bits[pix] = 1;
                        if (rank > rank_buf[pix]) {
                            rank_buf[pix] = rank;
                            out.image.set(r, col, color);
                        }
                    }
                }
            }
        }
    }
    return out;
}

}  // namespace

void WorkspaceConfig::validate() const {
    if (!(side_m > fabric_side_m) || !(fabric_side_m > 0.0))
        throw std::invalid_argument("workspace: need side_m > fabric_side_m > 0");
    if (image_px < 32) throw std::invalid_argument("workspace: image_px must be >= 32");
    if (grid_n < 8) throw std::invalid_argument("workspace: grid_n must be >= 8");
    if (!(meters_per_pixel() > 0.0)) throw std::invalid_argument("workspace: bad meters-per-pixel");
}

Vec2 FabricState::centroid_xy() const {
    Vec2 c;
    for (const Vec3& p : positions) c += p.xy();
    return c * (1.0 / static_cast<double>(positions.size()));
}

FabricState make_flat_state(const WorkspaceConfig& cfg, Vec2 center_offset) {
    cfg.validate();
    FabricState s;
    s.grid_n = cfg.grid_n;
    s.rest_length_m = cfg.fabric_side_m / (cfg.grid_n - 1);
    s.positions.resize(static_cast<std::size_t>(cfg.grid_n) * cfg.grid_n);
    s.layer_rank.assign(s.positions.size(), 0);
    const double origin = (cfg.side_m - cfg.fabric_side_m) / 2.0;
    for (int i = 0; i < cfg.grid_n; ++i) {
        for (int j = 0; j < cfg.grid_n; ++j) {
            s.positions[s.index(i, j)] = {origin + j * s.rest_length_m + center_offset.x,
                                          origin + i * s.rest_length_m + center_offset.y, 0.0};
        }
    }
    return s;
}

FabricState execute_fold(const FabricState& state, const WorldAction& action, const WorkspaceConfig& cfg) {
    if (!std::isfinite(action.pick_xy.x) || !std::isfinite(action.pick_xy.y) ||
        !std::isfinite(action.direction_rad) || !std::isfinite(action.distance_m))
        throw std::invalid_argument("execute_fold: non-finite action");
    if (action.distance_m < 0.0) throw std::invalid_argument("execute_fold: negative distance");
    const double diag = cfg.side_m * std::sqrt(2.0);
    if (action.distance_m > diag) throw std::invalid_argument("execute_fold: distance exceeds workspace diagonal");
    if (action.pick_xy.x < 0.0 || action.pick_xy.x > cfg.side_m || action.pick_xy.y < 0.0 ||
        action.pick_xy.y > cfg.side_m)
        throw std::invalid_argument("execute_fold: pick outside workspace");

    ClothSolver solver(state, cfg);
    const std::vector<int> grabbed = solver.capture(action.pick_xy);
    if (grabbed.empty()) return state;  // failed grasp: scene unchanged

    const std::vector<double> sign_before = all_signs(state);

    const double lift = std::min(cfg.lift_height_m, 0.5 * action.distance_m + 0.003);
    const Vec2 dir{std::cos(action.direction_rad), std::sin(action.direction_rad)};
    const Vec2 target_xy = action.pick_xy + dir * action.distance_m;
    const std::vector<Vec3> waypoints = {
        {action.pick_xy.x, action.pick_xy.y, lift},
        {target_xy.x, target_xy.y, lift},
        {target_xy.x, target_xy.y, kReleaseZ},
    };
    solver.carry(grabbed, action.pick_xy, waypoints);
    solver.settle();

    FabricState next = std::move(solver).take();
    restack_layers(next, sign_before);
    ClothSolver flatten(std::move(next), cfg);
    flatten.stack_z();
    return std::move(flatten).take();
}

Image render(const FabricState& state, const WorkspaceConfig& cfg) {
    return rasterize(state, cfg).image;
}

BitMask render_coverage(const FabricState& state, const WorkspaceConfig& cfg) {
    return rasterize(state, cfg).coverage;
}

BitMask fabric_mask(const Image& obs, const WorkspaceConfig& cfg) {
    BitMask m(obs.width, obs.height);
    const double thr2 = cfg.mask_threshold * cfg.mask_threshold;
    const Rgb bg = cfg.background_color;
    for (int r = 0; r < obs.height; ++r) {
        for (int c = 0; c < obs.width; ++c) {
            const Rgb p = obs.get(r, c);
            const double dr = static_cast<double>(p.r) - bg.r;
            const double dg = static_cast<double>(p.g) - bg.g;
            const double db = static_cast<double>(p.b) - bg.b;
            m.set(r, c, dr * dr + dg * dg + db * db > thr2);
        }
    }
    return m;
}

FabricState soft_reset(const FabricState& state, const WorkspaceConfig& cfg, std::uint64_t seed) {
    const Vec2 center{cfg.side_m / 2.0, cfg.side_m / 2.0};

    // Grasp nearest the centroid and carry the cloth to the workspace center.
    const Vec2 centroid = state.centroid_xy();
    int nearest = 0;
    double best = 1e18;
    for (std::size_t p = 0; p < state.positions.size(); ++p) {
        const double d = (state.positions[p].xy() - centroid).norm();
        if (d < best) {
            best = d;
            nearest = static_cast<int>(p);
        }
    }
    const Vec2 pick = state.positions[nearest].xy();

    ClothSolver solver(state, cfg);
    std::vector<int> grabbed = solver.capture(pick);
    if (grabbed.empty()) grabbed.push_back(nearest);
    solver.carry(grabbed, pick,
                 {{pick.x, pick.y, cfg.drop_height_m}, {center.x, center.y, cfg.drop_height_m}});

    // Drop: the fabric spins, bunches toward the grasp point and crumples a
    // little differently per seed. The contraction keeps the landed cloth
    // within the table no matter how it spins.
    Rng rng(mix_seed(seed, 0xd20f));
    const double spin = rng.uniform(0.0, kTwoPi);
    const double contraction = rng.uniform(0.18, 0.30);
    const double co = std::cos(spin) * (1.0 - contraction);
    const double si = std::sin(spin) * (1.0 - contraction);
    auto& pos = solver.positions();
    for (Vec3& p : pos) {
        const double dx = p.x - center.x, dy = p.y - center.y;
        p.x = center.x + co * dx - si * dy;
        p.y = center.y + si * dx + co * dy;
    }
    for (Vec3& p : pos) {
        p.x += rng.uniform(-0.012, 0.012);
        p.y += rng.uniform(-0.012, 0.012);
    }
    solver.settle(kSettleSubsteps + 8);

    FabricState next = std::move(solver).take();

    // Keep the centroid in the central third and every particle on the table.
    Vec2 c = next.centroid_xy();
    const double lo3 = cfg.side_m / 3.0, hi3 = 2.0 * cfg.side_m / 3.0;
    Vec2 shift{std::clamp(c.x, lo3, hi3) - c.x, std::clamp(c.y, lo3, hi3) - c.y};
    for (Vec3& p : next.positions) {
        p.x += shift.x;
        p.y += shift.y;
    }
    const double margin = 0.004;
    Vec2 lo{1e18, 1e18}, hi{-1e18, -1e18};
    for (const Vec3& p : next.positions) {
        lo.x = std::min(lo.x, p.x);
        lo.y = std::min(lo.y, p.y);
        hi.x = std::max(hi.x, p.x);
        hi.y = std::max(hi.y, p.y);
    }
    Vec2 fix{0.0, 0.0};
    if (lo.x < margin) fix.x = margin - lo.x;
    if (hi.x > cfg.side_m - margin) fix.x = cfg.side_m - margin - hi.x;
    if (lo.y < margin) fix.y = margin - lo.y;
    if (hi.y > cfg.side_m - margin) fix.y = cfg.side_m - margin - hi.y;
    for (Vec3& p : next.positions) {
        p.x += fix.x;
        p.y += fix.y;
    }

    // Ranks from scratch: mirrored material sits one layer up.
    for (int i = 0; i < next.grid_n; ++i)
        for (int j = 0; j < next.grid_n; ++j)
            next.layer_rank[next.index(i, j)] = orient_sign(next, i, j) < 0.0 ? 1 : 0;
    for (std::size_t p = 0; p < next.positions.size(); ++p)
        next.positions[p].z = next.layer_rank[p] * kLayerGap;

    next.rng_seed = seed;
    return next;
}

double max_edge_stretch(const FabricState& state) {
    double worst = 0.0;
    const int n = state.grid_n;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (j + 1 < n) {
                const double len = (state.positions[state.index(i, j + 1)] - state.positions[state.index(i, j)]).norm();
                worst = std::max(worst, len / state.rest_length_m);
            }
            if (i + 1 < n) {
                const double len = (state.positions[state.index(i + 1, j)] - state.positions[state.index(i, j)]).norm();
                worst = std::max(worst, len / state.rest_length_m);
            }
        }
    }
    return worst;
}

void save_state(const std::string& path, const FabricState& state) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("save_state: cannot open " + path);
    const char magic[4] = {'F', 'C', 'S', 'T'};
    const std::uint32_t version = 1;
    const std::uint32_t n = static_cast<std::uint32_t>(state.grid_n);
    const float rest = static_cast<float>(state.rest_length_m);
    std::fwrite(magic, 1, 4, f);
    std::fwrite(&version, 4, 1, f);
    std::fwrite(&n, 4, 1, f);
    std::fwrite(&rest, 4, 1, f);
    std::fwrite(&state.rng_seed, 8, 1, f);
    for (const Vec3& p : state.positions) {
        const float xyz[3] = {static_cast<float>(p.x), static_cast<float>(p.y), static_cast<float>(p.z)};
        std::fwrite(xyz, 4, 3, f);
    }
    for (int r : state.layer_rank) {
        const std::int32_t v = r;
        std::fwrite(&v, 4, 1, f);
    }
    std::fclose(f);
}

FabricState load_state(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("load_state: cannot open " + path);
    char magic[4];
    std::uint32_t version = 0, n = 0;
    float rest = 0;
    FabricState s;
    bool ok = std::fread(magic, 1, 4, f) == 4 && std::memcmp(magic, "FCST", 4) == 0 &&
              std::fread(&version, 4, 1, f) == 1 && version == 1 && std::fread(&n, 4, 1, f) == 1 &&
              std::fread(&rest, 4, 1, f) == 1 && std::fread(&s.rng_seed, 8, 1, f) == 1;
    if (ok) {
        s.grid_n = static_cast<int>(n);
        s.rest_length_m = rest;
        s.positions.resize(static_cast<std::size_t>(n) * n);
        s.layer_rank.resize(s.positions.size());
        for (Vec3& p : s.positions) {
            float xyz[3];
            ok = ok && std::fread(xyz, 4, 3, f) == 3;
            p = {xyz[0], xyz[1], xyz[2]};
        }
        for (int& r : s.layer_rank) {
            std::int32_t v = 0;
            ok = ok && std::fread(&v, 4, 1, f) == 1;
            r = v;
        }
    }
    std::fclose(f);
    if (!ok) throw std::runtime_error("load_state: malformed file " + path);
    return s;
}

}  // namespace foldcraft
