#pragma once

#include <cstdint>
#include <string>

#include "foldcraft/dataset.hpp"
#include "foldcraft/eval.hpp"
#include "foldcraft/trainer.hpp"

namespace foldcraft {

// One config file drives every subcommand; CLI flags override fields.
struct RunConfig {
    WorkspaceConfig workspace;
    ActionDiscretization disc = ActionDiscretization::coarse();
    ActionDiscretization fine_disc = ActionDiscretization::fine();
    TrainConfig train;
    AugmentConfig augment;
    EvalConfig eval;
    std::string dataset_dir = "dataset";
    std::string checkpoint_path;
    std::string out_dir = "out";
    std::uint64_t seed = 1;
};

RunConfig load_run_config(const std::string& path);
void save_run_config(const std::string& path, const RunConfig& rc);
std::string run_config_to_string(const RunConfig& rc);  // canonical serialized form

}  // namespace foldcraft
