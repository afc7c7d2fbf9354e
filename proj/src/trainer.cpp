#include "foldcraft/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "foldcraft/json_io.hpp"
#include "foldcraft/parallel.hpp"

namespace foldcraft {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
    if (gamma < 0.0 || gamma >= 1.0) throw std::invalid_argument("train: gamma must be in [0, 1)");
    if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    if (!(lr > 0.0) || !(early_stop_loss > 0.0) || early_stop_window < 1 || target_sync_period < 1)
        throw std::invalid_argument("train: thresholds must be positive");
    if (max_steps < 0) throw std::invalid_argument("train: max_steps must be >= 0");
}

double q_target(int reward, const Image& next_obs, const Image& goal, const QModel& target_model,
                const BitMask& mask, double gamma) {
    if (reward == 1) return 1.0;  // terminal: no bootstrap past a success
    if (mask.count() == 0) return static_cast<double>(reward);
    return gamma * static_cast<double>(target_model.max_q(next_obs, goal, mask));
}

float evaluate_q(const QNetwork& net, const Image& obs, const Image& goal, const ActionIndex& action,
                 const ActionDiscretization& disc, Rgb background) {
    QModel m{&net, disc, background, Sampling::bilinear, false};
    return m.value_at(obs, goal, action);
}

namespace {

// Per-sample work product of one training step.
struct SampleSlot {
    Image obs, goal;  // augmented
    int row = 0, col = 0, channel = 0;
    int rot_bin = 0, scale_bin = 0;
    int reward = 0;
    int transition_index = 0;
    float pred = 0.0f;
    double target = 0.0;
    ForwardCache cache;
    int heat_row = 0, heat_col = 0;
};

}  // namespace

TrainReport train(const Dataset& ds, QNetwork& net, const TrainConfig& cfg, const AugmentConfig& aug,
                  const std::string& out_dir) {
    cfg.validate();
    if (ds.transitions.empty()) throw std::invalid_argument("train: empty dataset");
    const Rgb bg = ds.workspace.background_color;
    if (cfg.no_scale && net.head_channels != ds.disc.num_scales())
        throw std::invalid_argument("train: no-scale run needs one head channel per distance bin");
    if (!cfg.no_scale && net.head_channels != 1)
        throw std::invalid_argument("train: scaled run needs a single head channel");

    TrainReport report;
    Rng rng(mix_seed(cfg.seed, 0x7124));
    QNetwork target = net;
    AdamState adam(net);
    const QModel target_model{&target, ds.disc, bg, Sampling::bilinear, cfg.no_scale};

    std::vector<double> window(static_cast<std::size_t>(cfg.early_stop_window), 0.0);
    double window_sum = 0.0;
    int window_fill = 0;

    const int B = cfg.batch_size;
    std::vector<SampleSlot> slots(B);
    std::vector<QNetworkGrads> grad_slots;

    for (int step = 0; step < cfg.max_steps; ++step) {
        // Sequential sampling + augmentation keeps the RNG stream fixed.
        const std::vector<HerSample> batch = her_sample(ds, B, rng);
        for (int i = 0; i < B; ++i) {
            const HerSample& h = batch[i];
            const Transition& t = ds.transitions[h.transition_index];
            Augmented a = augment(ds.obs(ds.obs_of(t)), ds.obs(h.goal), aug, bg, rng);
            SampleSlot& s = slots[i];
            s.obs = std::move(a.obs);
            s.goal = std::move(a.goal);
            s.row = t.action.index.row;
            s.col = t.action.index.col;
            remap_pixel(a.obs_transform, s.obs.width, s.row, s.col);
            s.rot_bin = t.action.index.rot_bin;
            s.scale_bin = t.action.index.scale_bin;
            s.channel = cfg.no_scale ? t.action.index.scale_bin : 0;
            s.reward = h.reward;
            s.transition_index = h.transition_index;
        }

        // Forward the online net at each stored action and compute targets
        // with the frozen net. Slot-indexed parallelism; reductions below run
        // in sample order, so the result is independent of the thread count.
        parallel_for(B, [&](int i) {
            SampleSlot& s = slots[i];
            const Tensor input = make_input(s.obs, s.goal);
            const Affine fwd = cfg.no_scale
                                   ? Affine::rotate_scale_about({s.obs.width / 2.0, s.obs.height / 2.0},
                                                                ds.disc.rotation_angle(s.rot_bin), 1.0)
                                   : action_transform(s.rot_bin, s.scale_bin, ds.disc, s.obs.width);
            Tensor warped;
            if (cfg.no_scale)
                warped = ds.disc.rotation_angle(s.rot_bin) == 0.0
                             ? input
                             : warp_tensor(input, fwd,
                                           {bg.r / 255.0f, bg.g / 255.0f, bg.b / 255.0f, bg.r / 255.0f,
                                            bg.g / 255.0f, bg.b / 255.0f},
                                           Sampling::bilinear);
            else
                warped = transform_input(input, s.rot_bin, s.scale_bin, ds.disc, bg);
            const Tensor heat = net.forward(warped, s.cache);
            const Vec2 q = fwd.apply({s.col + 0.5, s.row + 0.5});
            s.heat_col = std::clamp(static_cast<int>(std::lround(q.x - 0.5)), 0, heat.w - 1);
            s.heat_row = std::clamp(static_cast<int>(std::lround(q.y - 0.5)), 0, heat.h - 1);
            s.pred = heat.at(s.channel, s.heat_row, s.heat_col);

            const Transition& t = ds.transitions[s.transition_index];
            const ObsRef next_ref = ds.next_obs_of(t);
            s.target = q_target(s.reward, ds.obs(next_ref), s.goal, target_model, ds.mask(next_ref),
                                cfg.gamma);
        });

        double loss_sum = 0.0;
        double q_sum = 0.0;
        for (int i = 0; i < B; ++i) {
            loss_sum += nn::huber_loss(static_cast<double>(slots[i].pred), slots[i].target).first;
            q_sum += slots[i].pred;
        }
        const float loss = static_cast<float>(loss_sum / B);
        if (!std::isfinite(loss)) {
            report.stop_reason = "nan_loss";
            report.steps = step;
            break;
        }
        report.loss_curve.push_back(loss);
        report.mean_q_curve.push_back(static_cast<float>(q_sum / B));

        // Single-pixel backprop per sample, mean-reduced over the batch.
        grad_slots.assign(B, net.zero_grads());
        parallel_for(B, [&](int i) {
            SampleSlot& s = slots[i];
            const float g =
                nn::huber_loss(s.pred, static_cast<float>(s.target)).second / static_cast<float>(B);
            grad_slots[i] = net.backward(s.cache, s.channel, s.heat_row, s.heat_col, g);
            s.cache = ForwardCache{};  // release activations
        });
        QNetworkGrads total = std::move(grad_slots[0]);
        for (int i = 1; i < B; ++i) {
            for (int l = 0; l < kNumConvLayers; ++l) {
                for (std::size_t k = 0; k < total.w[l].v.size(); ++k) total.w[l].v[k] += grad_slots[i].w[l].v[k];
                for (std::size_t k = 0; k < total.b[l].size(); ++k) total.b[l][k] += grad_slots[i].b[l][k];
            }
        }
        adam_step(net, total, adam, static_cast<float>(cfg.lr));
        report.steps = step + 1;

        if ((step + 1) % cfg.target_sync_period == 0) target = net;

        const int w_idx = step % cfg.early_stop_window;
        if (window_fill == cfg.early_stop_window) window_sum -= window[w_idx];
        window[w_idx] = loss;
        window_sum += loss;
        if (window_fill < cfg.early_stop_window) ++window_fill;
        if (window_fill == cfg.early_stop_window &&
            window_sum / cfg.early_stop_window < cfg.early_stop_loss) {
            report.stop_reason = "early_stop";
            break;
        }
    }
    if (report.stop_reason.empty()) report.stop_reason = "max_steps";

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        if (report.stop_reason != "nan_loss") {
            report.checkpoint_path = (fs::path(out_dir) / "checkpoint.bin").string();
            save_checkpoint(report.checkpoint_path, net, ds.workspace.image_px);
        }
        std::ofstream csv(fs::path(out_dir) / "train_log.csv", std::ios::binary);
        csv << "step,loss,mean_q\n";
        char buf[96];
        for (std::size_t i = 0; i < report.loss_curve.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%zu,%.8f,%.8f\n", i, static_cast<double>(report.loss_curve[i]),
                          static_cast<double>(report.mean_q_curve[i]));
            csv << buf;
        }
        nlohmann::json echo;
        echo["train"] = cfg;
        echo["augment"] = aug;
        echo["workspace"] = ds.workspace;
        echo["discretization"] = ds.disc;
        echo["stop_reason"] = report.stop_reason;
        echo["steps"] = report.steps;
        std::ofstream ej(fs::path(out_dir) / "config_echo.json", std::ios::binary);
        ej << echo.dump(2) << "\n";
    }
    return report;
}

}  // namespace foldcraft
