#pragma once

#include <string>
#include <vector>

#include "muce/baselines.hpp"
#include "muce/config.hpp"
#include "muce/pipeline.hpp"

namespace muce::exp {

// Every trained method for one run. The CLI persists exactly this; the
// in-memory path exists so sweeps and tests can retrain without touching disk.
struct TrainedSuite {
    dn::StageModels separate;  // pretrained extractor + per-size estimators
    double separate_floor = 0.0;
    dn::StageModels joint;  // refined extractor + retrained estimators
    double joint_floor = 0.0;
    base::RawNet single_user;
    std::vector<base::RawNet> location;  // location[q-2] serves groups of size q
};

// First n samples of a dataset (shared positions/noise prefix).
sim::Dataset prefix_labels(const sim::Dataset& ds, int64_t n);

// Median intra-group pairwise similarity of a clustering: the grouping floor
// persisted for test-time dispatch. No pairs (all singletons) -> 0.
double grouping_floor(const num::Tensor& features, const std::vector<dn::ClusterGroup>& groups);

// Everything downstream of a trained extractor: per-size estimators, joint
// refinement, and the raw-measurement baselines. Streams "cli/dsnet" q,
// "cli/joint", "cli/single", "cli/location" q under `seed`.
TrainedSuite train_estimators(const cfg::ExperimentConfig& cfg, const sim::Dataset& downstream,
                              const num::ModelParams& theta, const cl::CLNetArch& cl_arch,
                              uint64_t seed);

// Extractor (stream "cli/clnet") plus train_estimators on the same seed.
TrainedSuite train_suite(const cfg::ExperimentConfig& cfg, const sim::DatasetBundle& bundle,
                         uint64_t seed);

// Non-owning view of whichever methods a caller has available.
struct EvalModels {
    const dn::StageModels* joint = nullptr;
    double joint_floor = 0.0;
    const dn::StageModels* separate = nullptr;
    double separate_floor = 0.0;
    const base::RawNet* single_user = nullptr;
    const std::vector<base::RawNet>* location = nullptr;  // needs single_user for singletons
    bool use_jomp = false;

    static EvalModels of(const TrainedSuite& s, bool with_jomp = true);
};

struct MethodScore {
    std::string method;
    pipe::NmseResult score;
};

// Score every available method on a labeled test set, walking it in
// consecutive packs of cfg.k_users. Output order is fixed: proposed-joint,
// proposed-separate, single-user, location, jomp.
std::vector<MethodScore> evaluate_methods(const cfg::ExperimentConfig& cfg,
                                          const EvalModels& models, const sim::Dataset& test,
                                          const sim::PilotMatrix& pilot);

// CLI commands. Artifacts live under cfg.out: data/ (datasets), models/
// (parameters + grouping floors), traces/ (per-epoch loss), results/
// (CSV + SVG); manifest.json tracks content hashes of all of them.
void cmd_generate(const cfg::ExperimentConfig& cfg, bool force);
void cmd_train(const cfg::ExperimentConfig& cfg, const std::string& stage);
void cmd_evaluate(const cfg::ExperimentConfig& cfg, const std::string& axis);
void cmd_similarity_study(const cfg::ExperimentConfig& cfg);

}  // namespace muce::exp
