#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "muce/dataset.hpp"
#include "muce/netcommon.hpp"

namespace muce::cl {

struct ContrastiveConfig {
    double d = 2.0;            // positive radius, meters
    double tau = 0.1;          // similarity temperature
    int64_t n_negatives = 16;  // per anchor
    int64_t positive_cap = 8;  // keep only the nearest when the d-ball is bigger
    int64_t anchor_batch = 64;

    void validate() const;
};

// Conv stack fixed: ker=[4,2,2,2], str=[2,1,1,1], pad=[1,1,1,0], cha=[8,16,16,32],
// then two dense layers ending at width m.
struct CLNetArch {
    int64_t input_len = 48;  // 2*n_rx*pilot_len*n_sc
    int64_t m = 112;         // 2*n_rx*n_tx*n_sc
    int64_t dense_hidden = 128;

    std::vector<net::ConvSpec> convs() const;
    std::vector<int64_t> conv_lengths() const;  // validates every stage
    int64_t flat_len() const;
};

num::ModelParams init_clnet(const CLNetArch& arch, uint64_t seed);

// Graph-building forward: x is a [B, input_len] node, result is [B, m].
int clnet_forward(num::Graph& g, const net::GraphParams& gp, int x, const CLNetArch& arch);

// Frozen-parameter batch evaluation.
num::Tensor extract_features(const num::ModelParams& theta, const CLNetArch& arch,
                             const num::Tensor& y);

// Feature matrix [count, m] covering every sample of a dataset.
num::Tensor dataset_features(const sim::Dataset& ds, const num::ModelParams& theta,
                             const CLNetArch& arch);

double pair_similarity(const double* ri, const double* rj, int64_t m, double tau);
double csi_similarity(const double* ri, const double* rj, int64_t m);  // 1/max(dist, 1e-12)

struct ContrastiveBatch {
    int64_t anchor = -1;
    std::vector<int64_t> positives;  // all within d of the anchor, capped to the nearest
    std::vector<int64_t> negatives;  // uniform draws without replacement beyond d
};

// Positions-only sampling; draws negatives from `rng`. Empty positive set is
// legal (anchor gets skipped by callers); an empty negative pool is not.
ContrastiveBatch sample_positives_negatives(const sim::Dataset& ds, int64_t i,
                                            const ContrastiveConfig& cfg, Rng& rng);

// Plain-double loss evaluation; `features` is [N, m] aligned with dataset rows.
// Batches with empty positives are skipped; `used` (if given) reports how many
// batches contributed. Throws TrainingError when every batch was skipped.
double contrastive_loss_value(const num::Tensor& features,
                              const std::vector<ContrastiveBatch>& batches, double tau,
                              int64_t* used = nullptr);

// Graph assembly of the same loss over a features node [R, m]; `row_of` maps a
// dataset index to its row in the features node. Numerically stabilized with a
// constant per-anchor shift; gradients stay exact.
int contrastive_loss_graph(num::Graph& g, int features, const std::vector<int64_t>& row_of,
                           const std::vector<ContrastiveBatch>& batches, double tau);

struct TrainStats {
    std::vector<double> epoch_loss;
    int64_t skipped_anchors = 0;  // across all epochs
};

struct TrainedCLNet {
    num::ModelParams theta;
    CLNetArch arch;
    TrainStats stats;
};

// Adam on the contrastive loss over anchor minibatches; deterministic in seed.
// Positives are fixed by geometry; negatives are redrawn every epoch.
TrainedCLNet train_clnet(const sim::Dataset& ds, const CLNetArch& arch,
                         const ContrastiveConfig& cfg, const num::AdamConfig& adam,
                         int64_t epochs, uint64_t seed);

struct SimilarityCurve {
    std::vector<double> bin_lo, bin_hi;
    std::vector<int64_t> count;
    std::vector<double> mean;  // standardized similarity; NaN marks an empty bin
};

// Pairwise similarity vs position distance, z-scored across all pairs used.
// theta == nullptr selects raw mode (inverse distance between the measurement
// vectors); otherwise features come from the trained network. n_pairs <= 0 or
// >= the total pair count means every pair (i < j) exactly once; otherwise
// that many pairs are sampled from derive_seed(seed, "simcurve").
SimilarityCurve similarity_curve(const sim::Dataset& ds, const num::ModelParams* theta,
                                 const CLNetArch* arch,
                                 const std::vector<std::pair<double, double>>& bins,
                                 int64_t n_pairs, uint64_t seed);

}  // namespace muce::cl
