#pragma once

#include <cstdint>
#include <vector>

#include "muce/dnet.hpp"

namespace muce::base {

// ---------------------------------------------------------------------------
// K-Means on user positions (Lloyd's algorithm, farthest-point seeded init).

struct KmeansResult {
    std::vector<int64_t> assign;       // point -> cluster index
    std::vector<sim::Vec2> centroids;  // k entries
    int64_t iterations = 0;            // Lloyd sweeps executed (capped at 100)
};

KmeansResult kmeans(const std::vector<sim::Vec2>& pts, int64_t k, uint64_t seed);

// ---------------------------------------------------------------------------
// Angular dictionary + simultaneous OMP over a shared support.

struct AngularDictionary {
    int64_t n_tx = 0;
    int64_t grid = 0;
    sim::CMat A;  // n_tx x grid steering columns on a uniform sin(theta) grid
};

// Column g steers toward sin(theta) = -1 + 2(g + 1/2)/G; entries are
// unit-modulus, so every column has norm sqrt(n_tx).
AngularDictionary make_dictionary(int64_t n_tx, int64_t grid);

struct JompConfig {
    int64_t sparsity = 8;
    double tol = 1e-6;  // stop once every residual norm falls below this
};

struct JompResult {
    std::vector<int64_t> support;                     // grid indices in selection order
    std::vector<std::vector<sim::cplx>> h;            // per user, n_tx entries
    std::vector<std::vector<double>> residual_norms;  // per user: initial, then one per iteration
    bool rank_deficient = false;  // some least-squares system needed the minimum-norm fallback
};

// Greedy recovery of a support shared by all users: score each unused column
// of Phi = S^T * A by the summed normalized correlation with the residuals,
// take the best, refit every user by least squares on the accumulated
// support, and repeat until `sparsity` atoms or all residuals drop under tol.
JompResult jomp(const std::vector<std::vector<sim::cplx>>& y, const sim::PilotMatrix& pilot,
                const AngularDictionary& dict, const JompConfig& cfg);

// ---------------------------------------------------------------------------
// Supervised CNN baselines on raw measurements (no learned features).

struct RawNet {
    num::ModelParams phi;
    dn::DsnetArch arch;  // arch.m = 2*meas_dim; arch.q = users served at once
    cl::TrainStats stats;
};

// Estimator-shaped CNN whose input is the group members' stacked-real
// measurements concatenated in member order. Groups must have exactly q
// members. Streams: "rawnet/init" q, "rawnet/epoch" e.
RawNet train_raw_net(const sim::Dataset& ds, const std::vector<dn::ClusterGroup>& groups,
                     int64_t q, const num::AdamConfig& adam, int64_t epochs, uint64_t seed,
                     int64_t group_batch = 32);

// Forward one group: y_rows is [q, 2*meas_dim]; column k of the result is the
// channel estimate for row k.
sim::CMat apply_raw_net(const RawNet& net, const num::Tensor& y_rows);

// Position clusters (stream "kmeans") chopped into groups of exactly q in
// index order; leftovers are pooled across clusters and chopped the same way,
// with a final partial group dropped. q = 1 skips K-Means entirely.
std::vector<dn::ClusterGroup> location_groups(const sim::Dataset& ds, int64_t q, uint64_t seed);

RawNet location_based_ce(const sim::Dataset& ds, int64_t q, const num::AdamConfig& adam,
                         int64_t epochs, uint64_t seed, int64_t group_batch = 32);

// Identical to location_based_ce with q = 1 (bit for bit, same seed).
RawNet single_user_ce(const sim::Dataset& ds, const num::AdamConfig& adam, int64_t epochs,
                      uint64_t seed, int64_t group_batch = 32);

}  // namespace muce::base
