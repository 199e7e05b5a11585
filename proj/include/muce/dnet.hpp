#pragma once

#include <cstdint>
#include <vector>

#include "muce/clnet.hpp"

namespace muce::dn {

// Downstream estimator for groups of q users. Conv stack fixed:
// ker=[q,2,2,2,2], str=[2,1,1,1,1], pad=[1,1,1,0,0], cha=[8,16,32,64,64],
// then one dense layer emitting q*2*chan_dim reals (the stacked-real image of
// every user's channel).
struct DsnetArch {
    int64_t q = 1;
    int64_t m = 112;        // feature length per user
    int64_t chan_dim = 56;  // complex channel entries per user

    std::vector<net::ConvSpec> convs() const;
    std::vector<int64_t> conv_lengths() const;  // validates every stage
    int64_t in_len() const { return q * m; }
    int64_t out_len() const { return q * 2 * chan_dim; }
    int64_t flat_len() const;
};

num::ModelParams init_dsnet(const DsnetArch& arch, uint64_t seed);

// x: [B, q*m] node holding interleaved group features (element j of every
// member adjacent, so the first kernel of size q spans one element per user).
int dsnet_forward_graph(num::Graph& g, const net::GraphParams& gp, int x, const DsnetArch& arch);

// R holds one feature column per user (m x q); result is chan_dim x q, one
// estimated channel column per user. A wrong column count signals that the
// wrong subnetwork was picked for the group and raises DispatchError.
sim::CMat dsnet_forward(const num::ModelParams& phi, const DsnetArch& arch, const num::Tensor& R);

struct ClusterGroup {
    std::vector<int64_t> members;  // dataset indices, ascending
};

// Greedy agglomeration under the learned similarity: repeatedly seed a group
// with the closest unassigned pair, then grow it by the unassigned point with
// the highest mean similarity to the members until it reaches q; the final
// leftover (< q points) forms one smaller group. Groups whose minimum pairwise
// similarity falls below gamma_floor are split back into singletons (similarity
// is always positive, so the default floor never splits).
std::vector<ClusterGroup> cluster_by_similarity(const num::Tensor& features, int64_t q,
                                                double gamma_floor = 0.0);

// Mean squared reconstruction error over groups of size arch.q with features
// frozen: (1/T) * sum_t |H_t - dsnet(R_t)|_F^2 (complex Frobenius norm).
double mse_loss(const num::ModelParams& phi, const DsnetArch& arch, const num::Tensor& features,
                const sim::Dataset& ds, const std::vector<ClusterGroup>& groups);

// Negated pairwise similarity inside one group: -sum_{j<i} exp(r_i . r_j / tau).
// Zero for singleton groups.
double sim_regularizer(const num::Tensor& features, const ClusterGroup& group, double tau);

// [T*q rows gathered from `features`] -> [T, q*m] interleaved group inputs.
// member_rows lists, per group, the q feature-node rows of its members.
int group_input_graph(num::Graph& g, int features, const std::vector<std::vector<int64_t>>& member_rows,
                      int64_t q, int64_t m);

// (1/T) * sum_t ( alpha * sim_regularizer(t) + |H_t - estimate_t|_F^2 ) with
// gradients flowing into the features node (and through it into the extractor)
// as well as the estimator parameters. `targets` is a [T, out_len] node of
// stacked-real labels. alpha = 0 skips the regularizer term entirely.
int joint_loss_graph(num::Graph& g, int features,
                     const std::vector<std::vector<int64_t>>& member_rows,
                     const net::GraphParams& gp_phi, const DsnetArch& arch, int targets,
                     double alpha, double tau);

struct TrainedDsnet {
    num::ModelParams phi;
    DsnetArch arch;
    cl::TrainStats stats;
};

// Supervised Adam on mse_loss over minibatches of size-arch.q groups; features
// stay frozen. Deterministic in seed (streams "dsnet/init", "dsnet/epoch").
TrainedDsnet train_dsnet(const sim::Dataset& ds, const num::Tensor& features,
                         const std::vector<ClusterGroup>& groups, const DsnetArch& arch,
                         const num::AdamConfig& adam, int64_t epochs, uint64_t seed,
                         int64_t group_batch = 32);

struct JointConfig {
    double alpha = 0.8;  // regularizer weight
    // Similarity temperature. The regularizer is a raw -sum exp(dot/tau), so
    // tau must sit at the scale of the feature dot products or the exponential
    // overflows: trained feature norms run near sqrt(m*4) and intra-group dots
    // reach a few hundred at m=112. 256 keeps exp arguments order-one with
    // headroom while still rewarding cohesion.
    double tau = 256.0;
    int64_t group_batch = 16;

    void validate() const;
};

struct JointResult {
    num::ModelParams theta;
    num::ModelParams phi;
    cl::TrainStats stats;
};

// Joint refinement: Adam on joint_loss_graph over minibatches of size-arch.q
// groups, updating the extractor and the top estimator together (stream
// "joint/epoch"). Group membership stays fixed for the run.
JointResult train_joint(const sim::Dataset& ds, const num::ModelParams& theta0,
                        const cl::CLNetArch& cl_arch, const num::ModelParams& phi0,
                        const DsnetArch& arch, const std::vector<ClusterGroup>& groups,
                        const JointConfig& jcfg, const num::AdamConfig& adam, int64_t epochs,
                        uint64_t seed);

struct StageModels {
    num::ModelParams theta;
    cl::CLNetArch cl_arch;
    std::vector<TrainedDsnet> dsnets;  // dsnets[q-1] estimates groups of size q
};

// Full refinement stage: cluster with the pretrained features, jointly refine
// extractor + size-Q estimator, re-extract, recluster per size, and retrain
// the smaller estimators against the refined features.
StageModels joint_stage(const sim::Dataset& ds, const num::ModelParams& theta0,
                        const cl::CLNetArch& cl_arch, const TrainedDsnet& top,
                        const JointConfig& jcfg, const num::AdamConfig& adam,
                        int64_t joint_epochs, int64_t retrain_epochs, double gamma_floor,
                        uint64_t seed);

}  // namespace muce::dn
