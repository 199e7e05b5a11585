#include "muce/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <string>

#include "muce/errors.hpp"
#include "muce/graph.hpp"
#include "muce/netcommon.hpp"

namespace muce::base {

using num::Graph;
using num::Tensor;
using sim::cplx;
using sim::Dataset;

KmeansResult kmeans(const std::vector<sim::Vec2>& pts, int64_t k, uint64_t seed) {
    const int64_t n = static_cast<int64_t>(pts.size());
    if (k < 1) throw ConfigError("kmeans: k must be >= 1");
    if (k > n) throw ConfigError("kmeans: k = " + std::to_string(k) + " exceeds " +
                                 std::to_string(n) + " points");

    KmeansResult r;
    r.centroids.reserve(static_cast<size_t>(k));

    // farthest-point init: one random point, then always the point farthest
    // from its nearest chosen centroid (ties to the lowest index)
    Rng rng = Rng::derive(seed, "kmeans");
    std::vector<double> d2(static_cast<size_t>(n), std::numeric_limits<double>::infinity());
    int64_t first = static_cast<int64_t>(rng.below(static_cast<uint64_t>(n)));
    r.centroids.push_back(pts[static_cast<size_t>(first)]);
    while (static_cast<int64_t>(r.centroids.size()) < k) {
        const sim::Vec2 latest = r.centroids.back();
        int64_t far = 0;
        double far_d = -1.0;
        for (int64_t i = 0; i < n; ++i) {
            const double d = sim::dist(pts[static_cast<size_t>(i)], latest);
            d2[static_cast<size_t>(i)] = std::min(d2[static_cast<size_t>(i)], d * d);
            if (d2[static_cast<size_t>(i)] > far_d) {
                far_d = d2[static_cast<size_t>(i)];
                far = i;
            }
        }
        r.centroids.push_back(pts[static_cast<size_t>(far)]);
    }

    r.assign.assign(static_cast<size_t>(n), -1);
    for (int64_t sweep = 0; sweep < 100; ++sweep) {
        bool changed = false;
        for (int64_t i = 0; i < n; ++i) {
            int64_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (int64_t c = 0; c < k; ++c) {
                const double d = sim::dist(pts[static_cast<size_t>(i)], r.centroids[static_cast<size_t>(c)]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (r.assign[static_cast<size_t>(i)] != best) {
                r.assign[static_cast<size_t>(i)] = best;
                changed = true;
            }
        }
        r.iterations = sweep + 1;
        if (!changed) break;

        std::vector<sim::Vec2> sum(static_cast<size_t>(k));
        std::vector<int64_t> cnt(static_cast<size_t>(k), 0);
        for (int64_t i = 0; i < n; ++i) {
            const auto c = static_cast<size_t>(r.assign[static_cast<size_t>(i)]);
            sum[c].x += pts[static_cast<size_t>(i)].x;
            sum[c].y += pts[static_cast<size_t>(i)].y;
            ++cnt[c];
        }
        for (int64_t c = 0; c < k; ++c)
            if (cnt[static_cast<size_t>(c)] > 0) {
                r.centroids[static_cast<size_t>(c)].x = sum[static_cast<size_t>(c)].x / double(cnt[static_cast<size_t>(c)]);
                r.centroids[static_cast<size_t>(c)].y = sum[static_cast<size_t>(c)].y / double(cnt[static_cast<size_t>(c)]);
            }
    }
    return r;
}

AngularDictionary make_dictionary(int64_t n_tx, int64_t grid) {
    if (n_tx < 1) throw ConfigError("dictionary: n_tx must be >= 1");
    if (grid < 1) throw ConfigError("dictionary: grid must be >= 1");
    AngularDictionary d;
    d.n_tx = n_tx;
    d.grid = grid;
    d.A = sim::CMat(n_tx, grid);
    for (int64_t g = 0; g < grid; ++g) {
        const double s = -1.0 + 2.0 * (double(g) + 0.5) / double(grid);
        for (int64_t n = 0; n < n_tx; ++n) {
            const double phase = -std::numbers::pi * double(n) * s;
            d.A.at(n, g) = cplx{std::cos(phase), std::sin(phase)};
        }
    }
    return d;
}

namespace {

// One-sided Jacobi orthogonalization of the columns of B (length-rows columns,
// t of them): B -> B*J with V accumulating J, so original B = B_final * V^H.
struct ColumnSvd {
    std::vector<std::vector<cplx>> b;  // U * Sigma as columns
    std::vector<std::vector<cplx>> v;  // t x t, column j = right singular vector
    std::vector<double> sigma;
    bool deficient = false;
};

ColumnSvd jacobi_svd(const std::vector<std::vector<cplx>>& cols) {
    ColumnSvd s;
    s.b = cols;
    const size_t t = cols.size();
    s.v.assign(t, std::vector<cplx>(t, cplx{0.0, 0.0}));
    for (size_t j = 0; j < t; ++j) s.v[j][j] = cplx{1.0, 0.0};

    for (int sweep = 0; sweep < 40; ++sweep) {
        bool rotated = false;
        for (size_t p = 0; p + 1 < t; ++p) {
            for (size_t q = p + 1; q < t; ++q) {
                double app = 0.0, aqq = 0.0;
                cplx apq{0.0, 0.0};
                for (size_t l = 0; l < s.b[p].size(); ++l) {
                    app += std::norm(s.b[p][l]);
                    aqq += std::norm(s.b[q][l]);
                    apq += std::conj(s.b[p][l]) * s.b[q][l];
                }
                const double off = std::abs(apq);
                if (!(off > 1e-15 * std::sqrt(app * aqq))) continue;
                rotated = true;

                const cplx phase = std::conj(apq) / off;  // makes b_p^H b_q real >= 0
                const double tau = (aqq - app) / (2.0 * off);
                const double tt = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double cs = 1.0 / std::sqrt(1.0 + tt * tt);
                const double sn = cs * tt;

                for (size_t l = 0; l < s.b[p].size(); ++l) {
                    const cplx bp = s.b[p][l];
                    const cplx bq = s.b[q][l] * phase;
                    s.b[p][l] = cs * bp - sn * bq;
                    s.b[q][l] = sn * bp + cs * bq;
                }
                for (size_t l = 0; l < t; ++l) {
                    const cplx vp = s.v[p][l];
                    const cplx vq = s.v[q][l] * phase;
                    s.v[p][l] = cs * vp - sn * vq;
                    s.v[q][l] = sn * vp + cs * vq;
                }
            }
        }
        if (!rotated) break;
    }

    s.sigma.resize(t);
    double smax = 0.0;
    for (size_t j = 0; j < t; ++j) {
        double acc = 0.0;
        for (const cplx& z : s.b[j]) acc += std::norm(z);
        s.sigma[j] = std::sqrt(acc);
        smax = std::max(smax, s.sigma[j]);
    }
    const double thresh = smax * 1e-12;
    for (size_t j = 0; j < t; ++j)
        if (!(s.sigma[j] > thresh)) s.deficient = true;
    return s;
}

// minimum-norm least-squares solution of (original B) x = y
std::vector<cplx> min_norm_solve(const ColumnSvd& s, const std::vector<cplx>& y) {
    const size_t t = s.b.size();
    std::vector<cplx> x(t, cplx{0.0, 0.0});
    double smax = 0.0;
    for (double sg : s.sigma) smax = std::max(smax, sg);
    if (smax == 0.0) return x;
    const double thresh = smax * 1e-12;
    for (size_t j = 0; j < t; ++j) {
        if (!(s.sigma[j] > thresh)) continue;
        cplx num{0.0, 0.0};
        for (size_t l = 0; l < y.size(); ++l) num += std::conj(s.b[j][l]) * y[l];
        const cplx coef = num / (s.sigma[j] * s.sigma[j]);  // (u_j^H y) / sigma_j
        for (size_t i = 0; i < t; ++i) x[i] += s.v[j][i] * coef;
    }
    return x;
}

}  // namespace

JompResult jomp(const std::vector<std::vector<cplx>>& y, const sim::PilotMatrix& pilot,
                const AngularDictionary& dict, const JompConfig& cfg) {
    const int64_t kk = static_cast<int64_t>(y.size());
    if (kk < 1) throw ConfigError("jomp: need at least one user");
    if (cfg.sparsity < 0) throw ConfigError("jomp: sparsity must be >= 0");
    if (!(cfg.tol >= 0)) throw ConfigError("jomp: tol must be >= 0");
    const int64_t n_tx = pilot.S.rows;
    const int64_t len = pilot.S.cols;
    if (dict.A.rows != n_tx)
        throw DimensionError("jomp: dictionary rows " + std::to_string(dict.A.rows) +
                             " do not match pilot rows " + std::to_string(n_tx));
    for (const auto& yk : y)
        if (static_cast<int64_t>(yk.size()) != len)
            throw DimensionError("jomp: measurement length does not match the pilot");

    const int64_t grid = dict.grid;
    // Phi = S^T A, kept as columns
    std::vector<std::vector<cplx>> phi(static_cast<size_t>(grid), std::vector<cplx>(static_cast<size_t>(len)));
    std::vector<double> col_norm(static_cast<size_t>(grid), 0.0);
    for (int64_t g = 0; g < grid; ++g) {
        double acc = 0.0;
        for (int64_t l = 0; l < len; ++l) {
            cplx z{0.0, 0.0};
            for (int64_t n = 0; n < n_tx; ++n) z += pilot.S.at(n, l) * dict.A.at(n, g);
            phi[static_cast<size_t>(g)][static_cast<size_t>(l)] = z;
            acc += std::norm(z);
        }
        col_norm[static_cast<size_t>(g)] = std::sqrt(acc);
    }

    JompResult out;
    std::vector<std::vector<cplx>> res = y;
    out.residual_norms.resize(static_cast<size_t>(kk));
    auto rnorm = [](const std::vector<cplx>& v) {
        double a = 0.0;
        for (const cplx& z : v) a += std::norm(z);
        return std::sqrt(a);
    };
    for (int64_t k = 0; k < kk; ++k) out.residual_norms[static_cast<size_t>(k)].push_back(rnorm(res[static_cast<size_t>(k)]));

    std::vector<char> chosen(static_cast<size_t>(grid), 0);
    std::vector<std::vector<cplx>> supcols;
    std::vector<std::vector<cplx>> coef(static_cast<size_t>(kk));

    while (static_cast<int64_t>(out.support.size()) < cfg.sparsity) {
        bool all_small = true;
        for (int64_t k = 0; k < kk; ++k)
            if (!(out.residual_norms[static_cast<size_t>(k)].back() < cfg.tol)) all_small = false;
        if (all_small) break;

        int64_t best = -1;
        double best_score = -1.0;
        for (int64_t g = 0; g < grid; ++g) {
            if (chosen[static_cast<size_t>(g)] || !(col_norm[static_cast<size_t>(g)] > 0)) continue;
            double score = 0.0;
            for (int64_t k = 0; k < kk; ++k) {
                cplx z{0.0, 0.0};
                const auto& pg = phi[static_cast<size_t>(g)];
                const auto& rk = res[static_cast<size_t>(k)];
                for (int64_t l = 0; l < len; ++l) z += std::conj(pg[static_cast<size_t>(l)]) * rk[static_cast<size_t>(l)];
                score += std::abs(z);
            }
            score /= col_norm[static_cast<size_t>(g)];
            if (score > best_score) {
                best_score = score;
                best = g;
            }
        }
        if (best < 0) break;  // every column used up

        chosen[static_cast<size_t>(best)] = 1;
        out.support.push_back(best);
        supcols.push_back(phi[static_cast<size_t>(best)]);

        ColumnSvd svd = jacobi_svd(supcols);
        if (svd.deficient) out.rank_deficient = true;
        for (int64_t k = 0; k < kk; ++k) {
            coef[static_cast<size_t>(k)] = min_norm_solve(svd, y[static_cast<size_t>(k)]);
            auto& rk = res[static_cast<size_t>(k)];
            rk = y[static_cast<size_t>(k)];
            for (size_t i = 0; i < supcols.size(); ++i)
                for (int64_t l = 0; l < len; ++l)
                    rk[static_cast<size_t>(l)] -= supcols[i][static_cast<size_t>(l)] * coef[static_cast<size_t>(k)][i];
            out.residual_norms[static_cast<size_t>(k)].push_back(rnorm(rk));
        }
    }

    out.h.assign(static_cast<size_t>(kk), std::vector<cplx>(static_cast<size_t>(n_tx), cplx{0.0, 0.0}));
    for (int64_t k = 0; k < kk; ++k) {
        if (coef[static_cast<size_t>(k)].empty()) continue;
        for (size_t i = 0; i < out.support.size(); ++i) {
            const cplx c = coef[static_cast<size_t>(k)][i];
            const int64_t g = out.support[i];
            for (int64_t n = 0; n < n_tx; ++n) out.h[static_cast<size_t>(k)][static_cast<size_t>(n)] += dict.A.at(n, g) * c;
        }
    }
    return out;
}

namespace {

void fill_raw_io(const Dataset& ds, const dn::DsnetArch& arch,
                 const std::vector<const dn::ClusterGroup*>& batch, Tensor& x, Tensor& tgt) {
    const int64_t q = arch.q, m = arch.m, C = arch.chan_dim;
    x = Tensor::zeros({static_cast<int64_t>(batch.size()), arch.in_len()});
    tgt = Tensor::zeros({static_cast<int64_t>(batch.size()), arch.out_len()});
    for (size_t t = 0; t < batch.size(); ++t) {
        for (int64_t k = 0; k < q; ++k) {
            const int64_t mem = batch[t]->members[static_cast<size_t>(k)];
            const double* row = ds.y_row(mem);
            double* xt = x.data() + static_cast<int64_t>(t) * arch.in_len() + k * m;
            for (int64_t j = 0; j < m; ++j) xt[j] = row[j];
            const cplx* h = ds.H_row(mem);
            double* tt = tgt.data() + static_cast<int64_t>(t) * arch.out_len() + k * 2 * C;
            for (int64_t c = 0; c < C; ++c) {
                tt[c] = h[c].real();
                tt[C + c] = h[c].imag();
            }
        }
    }
}

}  // namespace

RawNet train_raw_net(const Dataset& ds, const std::vector<dn::ClusterGroup>& groups, int64_t q,
                     const num::AdamConfig& adam, int64_t epochs, uint64_t seed,
                     int64_t group_batch) {
    if (!ds.labeled) throw UsageError("raw-measurement training needs a labeled dataset");
    if (q < 1) throw ConfigError("train_raw_net: group size must be >= 1");
    if (epochs < 0) throw ConfigError("train_raw_net: epochs must be >= 0");
    if (group_batch < 1) throw ConfigError("train_raw_net: group batch must be >= 1");

    RawNet out;
    out.arch.q = q;
    out.arch.m = 2 * ds.sys.meas_dim();
    out.arch.chan_dim = ds.sys.chan_dim();

    std::vector<const dn::ClusterGroup*> eligible;
    for (const auto& g : groups) {
        if (static_cast<int64_t>(g.members.size()) != q)
            throw ConfigError("train_raw_net: every group must have exactly " + std::to_string(q) +
                              " members");
        for (int64_t mem : g.members)
            if (mem < 0 || mem >= ds.count)
                throw DimensionError("train_raw_net: group member out of range");
        eligible.push_back(&g);
    }
    if (eligible.empty()) throw TrainingError("train_raw_net: no groups to train on");

    out.phi = dn::init_dsnet(out.arch, derive_seed(seed, "rawnet/init", static_cast<uint64_t>(q)));
    num::AdamState opt;
    opt.init(out.phi);

    const int64_t T = static_cast<int64_t>(eligible.size());
    for (int64_t epoch = 0; epoch < epochs; ++epoch) {
        Rng rng = Rng::derive(seed, "rawnet/epoch", static_cast<uint64_t>(epoch));
        for (int64_t i = T - 1; i > 0; --i)
            std::swap(eligible[static_cast<size_t>(i)], eligible[static_cast<size_t>(rng.below(static_cast<uint64_t>(i + 1)))]);
        double loss_acc = 0.0;
        for (int64_t start = 0; start < T; start += group_batch) {
            const int64_t stop = std::min(T, start + group_batch);
            std::vector<const dn::ClusterGroup*> batch(eligible.begin() + start,
                                                       eligible.begin() + stop);
            Tensor x, tgt;
            fill_raw_io(ds, out.arch, batch, x, tgt);
            Graph g;
            net::GraphParams gp = net::GraphParams::attach(g, out.phi, true);
            int o = dn::dsnet_forward_graph(g, gp, g.input(std::move(x), false), out.arch);
            int loss = g.scale(g.sum_sq_diff(o, g.input(std::move(tgt), false)),
                               1.0 / double(batch.size()));
            const double lv = g.val(loss).item();
            if (!std::isfinite(lv)) throw TrainingError(epoch, "baseline loss diverged");
            g.backward(loss);
            opt.update(out.phi, gp.grads(), adam);
            loss_acc += lv * double(batch.size());
        }
        out.stats.epoch_loss.push_back(loss_acc / double(T));
        if (!out.phi.all_finite()) throw TrainingError(epoch, "parameters diverged (non-finite)");
    }
    return out;
}

sim::CMat apply_raw_net(const RawNet& net, const Tensor& y_rows) {
    if (net.phi.count() == 0) throw UsageError("apply_raw_net: untrained model");
    if (y_rows.rank() != 2 || y_rows.shape[0] != net.arch.q || y_rows.shape[1] != net.arch.m)
        throw DimensionError("apply_raw_net: expected [" + std::to_string(net.arch.q) + "," +
                             std::to_string(net.arch.m) + "], got " + num::shape_str(y_rows.shape));

    Tensor x = Tensor::zeros({1, net.arch.in_len()});
    for (int64_t k = 0; k < net.arch.q; ++k)
        for (int64_t j = 0; j < net.arch.m; ++j)
            x.v[static_cast<size_t>(k * net.arch.m + j)] = y_rows.v[static_cast<size_t>(k * net.arch.m + j)];

    Graph g;
    net::GraphParams gp = net::GraphParams::attach(g, net.phi, false);
    const Tensor& o = g.val(dn::dsnet_forward_graph(g, gp, g.input(std::move(x), false), net.arch));

    const int64_t C = net.arch.chan_dim;
    sim::CMat est(C, net.arch.q);
    for (int64_t k = 0; k < net.arch.q; ++k) {
        const double* slice = o.data() + k * 2 * C;
        for (int64_t c = 0; c < C; ++c) est.at(c, k) = cplx{slice[c], slice[C + c]};
    }
    return est;
}

std::vector<dn::ClusterGroup> location_groups(const Dataset& ds, int64_t q, uint64_t seed) {
    if (q < 1) throw ConfigError("location_groups: group size must be >= 1");
    if (ds.count < q)
        throw ConfigError("location_groups: fewer samples than the group size");

    std::vector<dn::ClusterGroup> out;
    if (q == 1) {
        for (int64_t i = 0; i < ds.count; ++i) out.push_back({{i}});
        return out;
    }

    std::vector<sim::Vec2> pts(static_cast<size_t>(ds.count));
    for (int64_t i = 0; i < ds.count; ++i) pts[static_cast<size_t>(i)] = ds.pos(i);
    const int64_t k = std::max<int64_t>(1, ds.count / q);
    KmeansResult km = kmeans(pts, k, seed);

    std::vector<int64_t> leftover;
    for (int64_t c = 0; c < k; ++c) {
        std::vector<int64_t> members;
        for (int64_t i = 0; i < ds.count; ++i)
            if (km.assign[static_cast<size_t>(i)] == c) members.push_back(i);
        size_t full = members.size() / static_cast<size_t>(q) * static_cast<size_t>(q);
        for (size_t s = 0; s < full; s += static_cast<size_t>(q))
            out.push_back({{members.begin() + static_cast<int64_t>(s), members.begin() + static_cast<int64_t>(s + static_cast<size_t>(q))}});
        leftover.insert(leftover.end(), members.begin() + static_cast<int64_t>(full), members.end());
    }
    size_t full = leftover.size() / static_cast<size_t>(q) * static_cast<size_t>(q);
    for (size_t s = 0; s < full; s += static_cast<size_t>(q)) {
        dn::ClusterGroup g{{leftover.begin() + static_cast<int64_t>(s), leftover.begin() + static_cast<int64_t>(s + static_cast<size_t>(q))}};
        std::sort(g.members.begin(), g.members.end());
        out.push_back(std::move(g));
    }
    return out;
}

RawNet location_based_ce(const Dataset& ds, int64_t q, const num::AdamConfig& adam, int64_t epochs,
                         uint64_t seed, int64_t group_batch) {
    return train_raw_net(ds, location_groups(ds, q, seed), q, adam, epochs, seed, group_batch);
}

RawNet single_user_ce(const Dataset& ds, const num::AdamConfig& adam, int64_t epochs, uint64_t seed,
                      int64_t group_batch) {
    return location_based_ce(ds, 1, adam, epochs, seed, group_batch);
}

}  // namespace muce::base
