#include "foldcraft/action_space.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "foldcraft/parallel.hpp"

namespace foldcraft {

void ActionDiscretization::validate() const {
    if (rotation_bins < 1) throw std::invalid_argument("discretization: rotation_bins must be >= 1");
    if (scale_factors.empty()) throw std::invalid_argument("discretization: need at least one scale factor");
    for (double b : scale_factors)
        if (!(b > 0.0)) throw std::invalid_argument("discretization: scale factors must be positive");
    if (!(unit_distance_m > 0.0)) throw std::invalid_argument("discretization: unit distance must be positive");
}

double fold_distance(int scale_bin, const ActionDiscretization& disc) {
    if (scale_bin < 0 || scale_bin >= disc.num_scales())
        throw std::invalid_argument("fold_distance: scale bin out of range");
    return disc.unit_distance_m / disc.scale_factors[scale_bin];
}

Tensor make_input(const Image& state, const Image& goal) {
    if (state.width != goal.width || state.height != goal.height)
        throw std::invalid_argument("make_input: state/goal resolution mismatch");
    Tensor t(6, state.height, state.width);
    const std::size_t plane = static_cast<std::size_t>(state.width) * state.height;
    for (std::size_t i = 0; i < plane; ++i) {
        t.v[i] = state.data[3 * i] / 255.0f;
        t.v[plane + i] = state.data[3 * i + 1] / 255.0f;
        t.v[2 * plane + i] = state.data[3 * i + 2] / 255.0f;
        t.v[3 * plane + i] = goal.data[3 * i] / 255.0f;
        t.v[4 * plane + i] = goal.data[3 * i + 1] / 255.0f;
        t.v[5 * plane + i] = goal.data[3 * i + 2] / 255.0f;
    }
    return t;
}

Affine action_transform(int rot_bin, int scale_bin, const ActionDiscretization& disc, int image_px) {
    const Vec2 center{image_px / 2.0, image_px / 2.0};
    return Affine::rotate_scale_about(center, disc.rotation_angle(rot_bin), disc.scale_factors[scale_bin]);
}

Tensor warp_tensor(const Tensor& in, const Affine& fwd, const std::vector<float>& pad, Sampling mode) {
    if (pad.size() != static_cast<std::size_t>(in.ch))
        throw std::invalid_argument("warp_tensor: one pad value per channel required");
    Tensor out(in.ch, in.h, in.w);
    const Affine inv = fwd.inverse();
    for (int y = 0; y < in.h; ++y) {
        for (int x = 0; x < in.w; ++x) {
            const Vec2 src = inv.apply({x + 0.5, y + 0.5});
            if (mode == Sampling::nearest) {
                const int sc = static_cast<int>(std::lround(src.x - 0.5));
                const int sr = static_cast<int>(std::lround(src.y - 0.5));
                const bool inside = sr >= 0 && sr < in.h && sc >= 0 && sc < in.w;
                for (int c = 0; c < in.ch; ++c)
                    out.at(c, y, x) = inside ? in.at(c, sr, sc) : pad[c];
            } else {
                const double gx = src.x - 0.5, gy = src.y - 0.5;
                const int x0 = static_cast<int>(std::floor(gx));
                const int y0 = static_cast<int>(std::floor(gy));
                const double fx = gx - x0, fy = gy - y0;
                const double w[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
                const int cs[4] = {x0, x0 + 1, x0, x0 + 1};
                const int rs[4] = {y0, y0, y0 + 1, y0 + 1};
                for (int c = 0; c < in.ch; ++c) {
                    double acc = 0.0;
                    for (int k = 0; k < 4; ++k) {
                        const bool inside = rs[k] >= 0 && rs[k] < in.h && cs[k] >= 0 && cs[k] < in.w;
                        acc += w[k] * (inside ? in.at(c, rs[k], cs[k]) : pad[c]);
                    }
                    out.at(c, y, x) = static_cast<float>(acc);
                }
            }
        }
    }
    return out;
}

namespace {

std::vector<float> background_pad(Rgb bg) {
    const float r = bg.r / 255.0f, g = bg.g / 255.0f, b = bg.b / 255.0f;
    return {r, g, b, r, g, b};
}

}  // namespace

Tensor transform_input(const Tensor& state_goal, int rot_bin, int scale_bin,
                       const ActionDiscretization& disc, Rgb background, Sampling mode) {
    disc.validate();
    if (rot_bin < 0 || rot_bin >= disc.rotation_bins || scale_bin < 0 || scale_bin >= disc.num_scales())
        throw std::invalid_argument("transform_input: bin out of range");
    if (disc.rotation_angle(rot_bin) == 0.0 && disc.scale_factors[scale_bin] == 1.0)
        return state_goal;  // identity bin: exact
    const Affine fwd = action_transform(rot_bin, scale_bin, disc, state_goal.w);
    return warp_tensor(state_goal, fwd, background_pad(background), mode);
}

WorldAction to_world(const ActionIndex& action, const ActionDiscretization& disc, const WorkspaceConfig& cfg) {
    const double mpp = cfg.meters_per_pixel();
    WorldAction w;
    w.pick_xy = {(action.col + 0.5) * mpp, (action.row + 0.5) * mpp};
    w.direction_rad = wrap_angle(-disc.rotation_angle(action.rot_bin));
    w.distance_m = fold_distance(action.scale_bin, disc);
    return w;
}

Tensor ablation_forward(const QNetwork& net, const Tensor& input) {
    if (net.head_channels < 2)
        throw std::invalid_argument("ablation_forward: network lacks per-distance head channels");
    return net.forward(input);
}

// ---------------------------------------------------------------------------
// QModel

namespace {

struct TransformSlot {
    Affine fwd;
    int rot_bin;
    int scale_bin;   // -1 in no-scale mode (all scale bins share the heatmap)
    Tensor heatmap;
};

// One forward pass per transform; slots are filled in parallel and reduced
// in index order by the callers, so results do not depend on thread count.
std::vector<TransformSlot> run_transforms(const QModel& m, const Image& state, const Image& goal) {
    m.disc.validate();
    const Tensor input = make_input(state, goal);
    std::vector<TransformSlot> slots;
    if (m.no_scale) {
        if (m.net->head_channels != m.disc.num_scales())
            throw std::invalid_argument("no-scale model: head channels must match distance bins");
        for (int k = 0; k < m.disc.rotation_bins; ++k)
            slots.push_back({Affine::rotate_scale_about({state.width / 2.0, state.height / 2.0},
                                                        m.disc.rotation_angle(k), 1.0),
                             k, -1, {}});
    } else {
        if (m.net->head_channels != 1)
            throw std::invalid_argument("scaled model: network must have a single head channel");
        for (int k = 0; k < m.disc.rotation_bins; ++k)
            for (int j = 0; j < m.disc.num_scales(); ++j)
                slots.push_back({action_transform(k, j, m.disc, state.width), k, j, {}});
    }
    const std::vector<float> pad = background_pad(m.background);
    parallel_for(static_cast<int>(slots.size()), [&](int i) {
        TransformSlot& s = slots[i];
        const bool identity = m.disc.rotation_angle(s.rot_bin) == 0.0 &&
                              (s.scale_bin < 0 || m.disc.scale_factors[s.scale_bin] == 1.0);
        const Tensor warped = identity ? input : warp_tensor(input, s.fwd, pad, m.sampling);
        s.heatmap = m.net->forward(warped);
    });
    return slots;
}

// Heatmap pixel hit by an original-frame pixel under a transform, or false
// when it maps outside the image.
inline bool map_pixel(const Affine& fwd, int row, int col, int px, int& out_row, int& out_col) {
    const Vec2 q = fwd.apply({col + 0.5, row + 0.5});
    out_col = static_cast<int>(std::lround(q.x - 0.5));
    out_row = static_cast<int>(std::lround(q.y - 0.5));
    return out_row >= 0 && out_row < px && out_col >= 0 && out_col < px;
}

}  // namespace

float QModel::value_at(const Image& state, const Image& goal, const ActionIndex& action) const {
    disc.validate();
    const Tensor input = make_input(state, goal);
    const int px = state.width;
    Affine fwd;
    int heat_channel = 0;
    Tensor warped;
    if (no_scale) {
        fwd = Affine::rotate_scale_about({px / 2.0, px / 2.0}, disc.rotation_angle(action.rot_bin), 1.0);
        heat_channel = action.scale_bin;
        warped = disc.rotation_angle(action.rot_bin) == 0.0
                     ? input
                     : warp_tensor(input, fwd, background_pad(background), sampling);
    } else {
        fwd = action_transform(action.rot_bin, action.scale_bin, disc, px);
        warped = transform_input(input, action.rot_bin, action.scale_bin, disc, background, sampling);
    }
    const Tensor heat = net->forward(warped);
    int qr, qc;
    if (!map_pixel(fwd, action.row, action.col, px, qr, qc)) {
        // Stored random actions may fall outside the transformed frame; read
        // the nearest border value.
        const Vec2 q = fwd.apply({action.col + 0.5, action.row + 0.5});
        qc = std::clamp(static_cast<int>(std::lround(q.x - 0.5)), 0, px - 1);
        qr = std::clamp(static_cast<int>(std::lround(q.y - 0.5)), 0, px - 1);
    }
    return heat.at(heat_channel, qr, qc);
}

ActionIndex QModel::select(const Image& state, const Image& goal, const BitMask& mask) const {
    const std::vector<TransformSlot> slots = run_transforms(*this, state, goal);
    const int px = state.width;

    ActionIndex best;
    float best_v = -std::numeric_limits<float>::infinity();
    bool found = false;
    // Lexicographic tie-breaking on (rot_bin, scale_bin, row, col): iterate in
    // that order and replace only on strict improvement.
    const int n_scales = no_scale ? disc.num_scales() : 1;
    for (const TransformSlot& s : slots) {
        for (int jj = 0; jj < n_scales; ++jj) {
            const int scale_bin = no_scale ? jj : s.scale_bin;
            const int channel = no_scale ? jj : 0;
            for (int row = 0; row < px; ++row) {
                for (int col = 0; col < px; ++col) {
                    if (!mask.get(row, col)) continue;
                    int qr, qc;
                    if (!map_pixel(s.fwd, row, col, px, qr, qc)) continue;
                    const float v = s.heatmap.at(channel, qr, qc);
                    if (v > best_v) {
                        best_v = v;
                        best = {row, col, s.rot_bin, scale_bin, v};
                        found = true;
                    }
                }
            }
        }
    }
    if (!found) throw std::runtime_error("select_action: no valid action (mask empty or off-frame)");
    return best;
}

float QModel::max_q(const Image& state, const Image& goal, const BitMask& mask) const {
    const std::vector<TransformSlot> slots = run_transforms(*this, state, goal);
    const int px = state.width;
    float best_v = -std::numeric_limits<float>::infinity();
    bool found = false;
    const int channels = no_scale ? disc.num_scales() : 1;
    for (const TransformSlot& s : slots) {
        for (int channel = 0; channel < channels; ++channel) {
            for (int row = 0; row < px; ++row) {
                for (int col = 0; col < px; ++col) {
                    if (!mask.get(row, col)) continue;
                    int qr, qc;
                    if (!map_pixel(s.fwd, row, col, px, qr, qc)) continue;
                    const float v = s.heatmap.at(channel, qr, qc);
                    if (v > best_v) {
                        best_v = v;
                        found = true;
                    }
                }
            }
        }
    }
    if (!found) throw std::runtime_error("max_q: no valid action (mask empty or off-frame)");
    return best_v;
}

ActionIndex select_action(const QNetwork& net, const Image& state, const Image& goal,
                          const ActionDiscretization& disc, const BitMask& mask, Rgb background,
                          Sampling sampling) {
    QModel m{&net, disc, background, sampling, false};
    return m.select(state, goal, mask);
}

Image render_heatmap_grid(const QNetwork& net, const Image& state, const Image& goal,
                          const ActionDiscretization& disc, const BitMask& mask, Rgb background) {
    QModel m{&net, disc, background, Sampling::bilinear, false};
    const std::vector<TransformSlot> slots = run_transforms(m, state, goal);
    const ActionIndex best = m.select(state, goal, mask);

    float lo = std::numeric_limits<float>::infinity();
    float hi = -std::numeric_limits<float>::infinity();
    for (const auto& s : slots) {
        for (float v : s.heatmap.v) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    const float span = hi - lo > 1e-12f ? hi - lo : 1.0f;

    const int px = state.width;
    const int sep = 2;
    const int rows = disc.rotation_bins, cols = disc.num_scales();
    Image grid(cols * (px + sep) + sep, rows * (px + sep) + sep, Rgb{64, 64, 64});
    for (const auto& s : slots) {
        const int gy = sep + s.rot_bin * (px + sep);
        const int gx = sep + s.scale_bin * (px + sep);
        for (int y = 0; y < px; ++y) {
            for (int x = 0; x < px; ++x) {
                const float t = (s.heatmap.at(0, y, x) - lo) / span;
                const auto v = static_cast<std::uint8_t>(std::lround(255.0f * t));
                grid.set(gy + y, gx + x, {v, v, v});
            }
        }
    }
    // Crosshair on the argmax, drawn in the winning panel at the transformed
    // pixel location.
    const TransformSlot& win = slots[static_cast<std::size_t>(best.rot_bin) * disc.num_scales() + best.scale_bin];
    int qr, qc;
    map_pixel(win.fwd, best.row, best.col, px, qr, qc);
    const int gy = sep + best.rot_bin * (px + sep);
    const int gx = sep + best.scale_bin * (px + sep);
    for (int d = -3; d <= 3; ++d) {
        if (qc + d >= 0 && qc + d < px) grid.set(gy + qr, gx + qc + d, {255, 32, 32});
        if (qr + d >= 0 && qr + d < px) grid.set(gy + qr + d, gx + qc, {255, 32, 32});
    }
    return grid;
}

}  // namespace foldcraft
