#pragma once

#include <cstdint>
#include <vector>

#include "muce/dnet.hpp"

namespace muce::pipe {

struct UserGrouping {
    std::vector<std::vector<int64_t>> groups;  // user indices, ascending within a group
    std::vector<double> min_gamma;             // minimum pairwise similarity; +inf for singletons
};

// Label-free greedy grouping of K users by feature similarity, parts capped at
// `cap`; groups whose minimum pairwise similarity falls below gamma_floor are
// broken into singletons (an infinite floor therefore isolates everyone).
UserGrouping group_users(const num::Tensor& features, int64_t cap, double gamma_floor);

struct EstimationReport {
    std::vector<std::vector<sim::cplx>> h;  // per user, chan_dim entries, input order
    UserGrouping grouping;
    double seconds = 0.0;
};

// Cascade inference for K users: extract features, group up to the largest
// trained estimator, dispatch each group to the estimator of its size, and
// scatter the per-user columns back into input order.
EstimationReport estimate_multi_user(const dn::StageModels& models, const num::Tensor& y_rows,
                                     double gamma_floor);

struct NmseResult {
    double linear = 0.0;
    double db = 0.0;
    int64_t used = 0;
    int64_t skipped = 0;  // zero-norm truths excluded from the mean
};

// Mean over samples of |h - h_est|^2 / |h|^2, with the dB form alongside.
NmseResult nmse(const std::vector<std::vector<sim::cplx>>& truth,
                const std::vector<std::vector<sim::cplx>>& est);

}  // namespace muce::pipe
