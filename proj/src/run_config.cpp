#include "foldcraft/run_config.hpp"

#include <fstream>
#include <stdexcept>

#include "foldcraft/json_io.hpp"

namespace foldcraft {

using nlohmann::json;

namespace {

json to_tree(const RunConfig& rc) {
    json j;
    j["workspace"] = rc.workspace;
    j["discretization"] = rc.disc;
    j["fine_discretization"] = rc.fine_disc;
    j["train"] = rc.train;
    j["augment"] = rc.augment;
    j["eval"] = rc.eval;
    j["dataset_dir"] = rc.dataset_dir;
    j["checkpoint_path"] = rc.checkpoint_path;
    j["out_dir"] = rc.out_dir;
    j["seed"] = rc.seed;
    return j;
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("config: " + path + " is not valid JSON: " + e.what());
    }
    RunConfig rc;
    if (j.contains("workspace")) j.at("workspace").get_to(rc.workspace);
    if (j.contains("discretization")) j.at("discretization").get_to(rc.disc);
    if (j.contains("fine_discretization")) j.at("fine_discretization").get_to(rc.fine_disc);
    if (j.contains("train")) j.at("train").get_to(rc.train);
    if (j.contains("augment")) j.at("augment").get_to(rc.augment);
    if (j.contains("eval")) j.at("eval").get_to(rc.eval);
    rc.dataset_dir = j.value("dataset_dir", rc.dataset_dir);
    rc.checkpoint_path = j.value("checkpoint_path", rc.checkpoint_path);
    rc.out_dir = j.value("out_dir", rc.out_dir);
    rc.seed = j.value("seed", rc.seed);
    return rc;
}

void save_run_config(const std::string& path, const RunConfig& rc) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("config: cannot write " + path);
    out << run_config_to_string(rc);
}

std::string run_config_to_string(const RunConfig& rc) { return to_tree(rc).dump(2) + "\n"; }

}  // namespace foldcraft
