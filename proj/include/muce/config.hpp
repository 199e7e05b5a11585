#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "muce/clnet.hpp"
#include "muce/dnet.hpp"

namespace muce::cfg {

// Everything a run needs, with the experiment's standard constants as
// defaults. A config file overrides any subset; unknown keys are rejected.
struct ExperimentConfig {
    uint64_t seed = 1;
    std::string out = "runs/default";

    // scene
    double area = 100.0;  // square side, meters
    int64_t n_scatterers = 50;

    sim::SystemConfig system;

    // data
    int64_t n_contrastive = 4979;
    int64_t n_downstream = 1500;
    int64_t n_test = 500;
    double snr_db = 20.0;

    // feature extractor
    cl::ContrastiveConfig contrastive;
    int64_t clnet_epochs = 40;
    double clnet_lr = 1e-4;
    double weight_decay = 0.01;
    int64_t feature_dim = 112;
    int64_t dense_hidden = 128;

    // downstream estimators
    int64_t q_max = 3;
    int64_t dsnet_epochs = 60;
    double dsnet_lr = 1e-4;
    int64_t group_batch = 32;

    // joint refinement
    dn::JointConfig joint;
    int64_t joint_epochs = 20;
    int64_t retrain_epochs = 20;
    double joint_lr = 1e-4;

    // baselines
    int64_t baseline_epochs = 60;
    double baseline_lr = 1e-4;
    int64_t jomp_grid = 112;
    int64_t jomp_sparsity = 8;
    double jomp_tol = 1e-6;

    // evaluation
    int64_t k_users = 5;
    std::vector<double> snr_axis = {0, 5, 10, 15, 20, 25};
    std::vector<int64_t> label_axis = {250, 500, 1000, 1500};
    std::vector<int64_t> pilot_axis = {16, 24, 32};
    int64_t similarity_pairs = 20000;

    void validate() const;
    cl::CLNetArch clnet_arch() const;
};

ExperimentConfig parse_config_text(const std::string& json_text);
ExperimentConfig parse_config(const std::string& path);

}  // namespace muce::cfg
