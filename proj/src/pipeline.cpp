#include "muce/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "muce/clnet.hpp"
#include "muce/errors.hpp"

namespace muce::pipe {

UserGrouping group_users(const num::Tensor& features, int64_t cap, double gamma_floor) {
    if (cap < 1) throw ConfigError("group_users: cap must be >= 1");
    if (features.shape.size() != 2 || features.shape[0] < 1)
        throw DimensionError("group_users: features must be [K, m] with K >= 1");
    const int64_t k = features.shape[0];
    const int64_t m = features.shape[1];

    auto clusters = dn::cluster_by_similarity(features, std::min(cap, k), gamma_floor);

    UserGrouping out;
    out.groups.reserve(clusters.size());
    out.min_gamma.reserve(clusters.size());
    for (auto& c : clusters) {
        double lo = std::numeric_limits<double>::infinity();
        for (size_t a = 0; a < c.members.size(); ++a)
            for (size_t b = a + 1; b < c.members.size(); ++b)
                lo = std::min(lo, cl::csi_similarity(features.v.data() + c.members[a] * m,
                                                     features.v.data() + c.members[b] * m, m));
        out.groups.push_back(std::move(c.members));
        out.min_gamma.push_back(lo);
    }
    return out;
}

EstimationReport estimate_multi_user(const dn::StageModels& models, const num::Tensor& y_rows,
                                     double gamma_floor) {
    const auto t0 = std::chrono::steady_clock::now();
    if (models.dsnets.empty()) throw ConfigError("estimate_multi_user: no downstream estimators");
    if (models.theta.count() == 0) throw ConfigError("estimate_multi_user: feature extractor is untrained");
    if (y_rows.shape.size() != 2 || y_rows.shape[0] < 1)
        throw DimensionError("estimate_multi_user: measurements must be [K, input_len]");

    const int64_t k = y_rows.shape[0];
    const int64_t m = models.cl_arch.m;
    num::Tensor features = cl::extract_features(models.theta, models.cl_arch, y_rows);

    EstimationReport rep;
    rep.grouping = group_users(features, static_cast<int64_t>(models.dsnets.size()), gamma_floor);
    rep.h.resize(static_cast<size_t>(k));

    for (const auto& grp : rep.grouping.groups) {
        const int64_t q = static_cast<int64_t>(grp.size());
        const dn::TrainedDsnet& tn = models.dsnets[static_cast<size_t>(q - 1)];
        if (tn.phi.count() == 0)
            throw DispatchError("estimate_multi_user: no trained estimator for groups of size " +
                                std::to_string(q));
        num::Tensor r = num::Tensor::zeros({m, q});
        for (int64_t j = 0; j < m; ++j)
            for (int64_t c = 0; c < q; ++c) r.v[static_cast<size_t>(j * q + c)] = features.v[grp[static_cast<size_t>(c)] * m + j];
        sim::CMat est = dn::dsnet_forward(tn.phi, tn.arch, r);
        for (int64_t c = 0; c < q; ++c) {
            auto& dst = rep.h[static_cast<size_t>(grp[static_cast<size_t>(c)])];
            dst.resize(static_cast<size_t>(est.rows));
            for (int64_t rix = 0; rix < est.rows; ++rix) dst[static_cast<size_t>(rix)] = est.at(rix, c);
        }
    }

    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

NmseResult nmse(const std::vector<std::vector<sim::cplx>>& truth,
                const std::vector<std::vector<sim::cplx>>& est) {
    if (truth.size() != est.size()) throw DimensionError("nmse: truth/estimate count mismatch");
    if (truth.empty()) throw DimensionError("nmse: empty sample list");

    NmseResult r;
    double acc = 0.0;
    for (size_t n = 0; n < truth.size(); ++n) {
        if (truth[n].size() != est[n].size())
            throw DimensionError("nmse: channel length mismatch at sample " + std::to_string(n));
        double pow = 0.0, err = 0.0;
        for (size_t i = 0; i < truth[n].size(); ++i) {
            pow += std::norm(truth[n][i]);
            err += std::norm(truth[n][i] - est[n][i]);
        }
        if (pow == 0.0) {
            ++r.skipped;
            continue;
        }
        acc += err / pow;
        ++r.used;
    }
    if (r.used == 0) throw DomainError("nmse: every truth channel had zero norm");
    r.linear = acc / static_cast<double>(r.used);
    r.db = 10.0 * std::log10(r.linear);
    return r;
}

}  // namespace muce::pipe
