#include "muce/dnet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "muce/errors.hpp"

namespace muce::dn {

using num::Graph;
using num::ModelParams;
using num::Tensor;
using sim::Dataset;

std::vector<net::ConvSpec> DsnetArch::convs() const {
    if (q < 1 || m < 1 || chan_dim < 1) throw ConfigError("dsnet arch: sizes must be positive");
    return {{q, 2, 1, 8}, {2, 1, 1, 16}, {2, 1, 1, 32}, {2, 1, 0, 64}, {2, 1, 0, 64}};
}

std::vector<int64_t> DsnetArch::conv_lengths() const {
    return net::conv_stack_lengths(in_len(), convs());
}

int64_t DsnetArch::flat_len() const { return convs().back().ch * conv_lengths().back(); }

ModelParams init_dsnet(const DsnetArch& arch, uint64_t seed) {
    const int64_t flat = arch.flat_len();
    ModelParams params;
    Rng rng = Rng::derive(seed, "dsnet/init", uint64_t(arch.q));
    net::init_conv_stack(params, "", arch.convs(), rng);
    net::init_dense(params, "out", arch.out_len(), flat, rng);
    return params;
}

int dsnet_forward_graph(Graph& g, const net::GraphParams& gp, int x, const DsnetArch& arch) {
    const Tensor& xv = g.val(x);
    if (xv.rank() != 2 || xv.shape[1] != arch.in_len())
        throw DimensionError("dsnet_forward: expected [B," + std::to_string(arch.in_len()) +
                             "], got " + num::shape_str(xv.shape));
    const int64_t B = xv.shape[0];
    int h = g.reshape(x, {B, 1, arch.in_len()});
    h = net::forward_conv_stack(g, gp, "", h, arch.convs());
    h = g.reshape(h, {B, arch.flat_len()});
    return g.dense(h, gp.id("out.w"), gp.id("out.b"));
}

sim::CMat dsnet_forward(const ModelParams& phi, const DsnetArch& arch, const Tensor& R) {
    if (R.rank() != 2 || R.shape[1] != arch.q)
        throw DispatchError("dsnet_forward: estimator for groups of " + std::to_string(arch.q) +
                            " was handed " + num::shape_str(R.shape));
    if (R.shape[0] != arch.m)
        throw DimensionError("dsnet_forward: feature length " + std::to_string(R.shape[0]) +
                             ", expected " + std::to_string(arch.m));
    Graph g;
    net::GraphParams gp = net::GraphParams::attach(g, phi, false);
    Tensor x = Tensor::zeros({1, arch.in_len()});
    x.v = R.v;  // row-major m x q is already the interleaved layout
    const Tensor& out = g.val(dsnet_forward_graph(g, gp, g.input(std::move(x), false), arch));

    const int64_t C = arch.chan_dim;
    sim::CMat H(C, arch.q);
    for (int64_t k = 0; k < arch.q; ++k) {
        std::vector<double> slice(out.data() + k * 2 * C, out.data() + (k + 1) * 2 * C);
        std::vector<sim::cplx> h = sim::nu_inv(slice);
        for (int64_t c = 0; c < C; ++c) H.at(c, k) = h[size_t(c)];
    }
    return H;
}

namespace {

double gamma_of(const Tensor& f, int64_t i, int64_t j) {
    const int64_t m = f.shape[1];
    return cl::csi_similarity(f.data() + i * m, f.data() + j * m, m);
}

}  // namespace

std::vector<ClusterGroup> cluster_by_similarity(const Tensor& features, int64_t q,
                                                double gamma_floor) {
    if (q < 1) throw ConfigError("cluster_by_similarity: group size must be >= 1");
    if (features.rank() != 2) throw DimensionError("cluster_by_similarity: features must be [N,m]");
    const int64_t N = features.shape[0];
    if (N < q)
        throw ConfigError("cluster_by_similarity: " + std::to_string(N) +
                          " samples cannot fill a group of " + std::to_string(q));

    std::vector<ClusterGroup> out;
    if (q == 1) {
        for (int64_t i = 0; i < N; ++i) out.push_back({{i}});
        return out;
    }

    std::vector<double> gam(size_t(N) * size_t(N), 0.0);
    for (int64_t i = 0; i < N; ++i)
        for (int64_t j = i + 1; j < N; ++j)
            gam[size_t(i * N + j)] = gam[size_t(j * N + i)] = gamma_of(features, i, j);

    std::vector<int64_t> free;
    for (int64_t i = 0; i < N; ++i) free.push_back(i);
    auto take = [&](int64_t idx) { free.erase(free.begin() + idx); };

    while (!free.empty()) {
        ClusterGroup grp;
        if (free.size() == 1) {
            grp.members = {free[0]};
            free.clear();
        } else {
            size_t bi = 0, bj = 1;
            double best = -1.0;
            for (size_t a = 0; a < free.size(); ++a)
                for (size_t b = a + 1; b < free.size(); ++b)
                    if (gam[size_t(free[a] * N + free[b])] > best) {
                        best = gam[size_t(free[a] * N + free[b])];
                        bi = a;
                        bj = b;
                    }
            grp.members = {free[bi], free[bj]};
            take(bj);  // larger index first so bi stays valid
            take(bi);
            while (int64_t(grp.members.size()) < q && !free.empty()) {
                size_t pick = 0;
                double bestmean = -1.0;
                for (size_t a = 0; a < free.size(); ++a) {
                    double s = 0.0;
                    for (int64_t mem : grp.members) s += gam[size_t(free[a] * N + mem)];
                    if (s > bestmean) {
                        bestmean = s;
                        pick = a;
                    }
                }
                grp.members.push_back(free[pick]);
                take(pick);
            }
            std::sort(grp.members.begin(), grp.members.end());
        }
        out.push_back(std::move(grp));
    }

    if (gamma_floor > 0.0) {
        std::vector<ClusterGroup> kept;
        for (ClusterGroup& g : out) {
            double lo = std::numeric_limits<double>::infinity();
            for (size_t a = 0; a < g.members.size(); ++a)
                for (size_t b = a + 1; b < g.members.size(); ++b)
                    lo = std::min(lo, gam[size_t(g.members[a] * N + g.members[b])]);
            if (g.members.size() >= 2 && lo < gamma_floor)
                for (int64_t mem : g.members) kept.push_back({{mem}});
            else
                kept.push_back(std::move(g));
        }
        out = std::move(kept);
    }
    return out;
}

namespace {

std::vector<const ClusterGroup*> size_q_groups(const std::vector<ClusterGroup>& groups,
                                               const DsnetArch& arch, int64_t count) {
    std::vector<const ClusterGroup*> out;
    for (const ClusterGroup& g : groups) {
        for (int64_t mem : g.members)
            if (mem < 0 || mem >= count)
                throw DimensionError("group member " + std::to_string(mem) + " out of range");
        if (int64_t(g.members.size()) == arch.q) out.push_back(&g);
    }
    return out;
}

// Interleaved feature rows + stacked-real channel labels for a batch of groups.
void fill_group_io(const Dataset& ds, const Tensor& features, const DsnetArch& arch,
                   const std::vector<const ClusterGroup*>& batch, Tensor& x, Tensor& tgt) {
    const int64_t q = arch.q, m = arch.m, C = arch.chan_dim;
    x = Tensor::zeros({int64_t(batch.size()), arch.in_len()});
    tgt = Tensor::zeros({int64_t(batch.size()), arch.out_len()});
    for (size_t t = 0; t < batch.size(); ++t) {
        for (int64_t k = 0; k < q; ++k) {
            const int64_t mem = batch[t]->members[size_t(k)];
            const double* row = features.data() + mem * m;
            double* xt = x.data() + int64_t(t) * arch.in_len();
            for (int64_t j = 0; j < m; ++j) xt[j * q + k] = row[j];
            const sim::cplx* h = ds.H_row(mem);
            double* tt = tgt.data() + int64_t(t) * arch.out_len() + k * 2 * C;
            for (int64_t c = 0; c < C; ++c) {
                tt[c] = h[c].real();
                tt[C + c] = h[c].imag();
            }
        }
    }
}

void check_training_inputs(const Dataset& ds, const Tensor& features, const DsnetArch& arch) {
    if (!ds.labeled) throw UsageError("downstream training needs a labeled dataset");
    if (features.rank() != 2 || features.shape[0] != ds.count || features.shape[1] != arch.m)
        throw DimensionError("features must be [" + std::to_string(ds.count) + "," +
                             std::to_string(arch.m) + "], got " + num::shape_str(features.shape));
    if (arch.chan_dim != ds.sys.chan_dim())
        throw DimensionError("estimator emits " + std::to_string(arch.chan_dim) +
                             " channel entries, dataset has " + std::to_string(ds.sys.chan_dim()));
}

}  // namespace

double mse_loss(const ModelParams& phi, const DsnetArch& arch, const Tensor& features,
                const Dataset& ds, const std::vector<ClusterGroup>& groups) {
    check_training_inputs(ds, features, arch);
    std::vector<const ClusterGroup*> eligible = size_q_groups(groups, arch, ds.count);
    if (eligible.empty()) throw TrainingError("mse_loss: no groups of size " + std::to_string(arch.q));
    Tensor x, tgt;
    fill_group_io(ds, features, arch, eligible, x, tgt);
    Graph g;
    net::GraphParams gp = net::GraphParams::attach(g, phi, false);
    const Tensor& out = g.val(dsnet_forward_graph(g, gp, g.input(std::move(x), false), arch));
    double sse = 0.0;
    for (size_t i = 0; i < out.v.size(); ++i) {
        const double d = out.v[i] - tgt.v[i];
        sse += d * d;
    }
    return sse / double(eligible.size());
}

double sim_regularizer(const Tensor& features, const ClusterGroup& group, double tau) {
    const int64_t m = features.shape[1];
    double s = 0.0;
    for (size_t a = 0; a < group.members.size(); ++a)
        for (size_t b = a + 1; b < group.members.size(); ++b)
            s += cl::pair_similarity(features.data() + group.members[a] * m,
                                     features.data() + group.members[b] * m, m, tau);
    return -s;
}

int group_input_graph(Graph& g, int features, const std::vector<std::vector<int64_t>>& member_rows,
                      int64_t q, int64_t m) {
    if (member_rows.empty()) throw ConfigError("group_input_graph: no groups");
    std::vector<int64_t> order;
    for (const auto& grp : member_rows) {
        if (int64_t(grp.size()) != q)
            throw DimensionError("group_input_graph: group of " + std::to_string(grp.size()) +
                                 " members, expected " + std::to_string(q));
        order.insert(order.end(), grp.begin(), grp.end());
    }
    const int64_t T = int64_t(member_rows.size());
    int rows = g.gather_rows(features, order);  // [T*q, m]
    std::vector<int64_t> map(size_t(T * q * m));
    for (int64_t t = 0; t < T; ++t)
        for (int64_t j = 0; j < m; ++j)
            for (int64_t k = 0; k < q; ++k) map[size_t(t * q * m + j * q + k)] = (t * q + k) * m + j;
    return g.permute_flat(rows, std::move(map), {T, q * m});
}

int joint_loss_graph(Graph& g, int features, const std::vector<std::vector<int64_t>>& member_rows,
                     const net::GraphParams& gp_phi, const DsnetArch& arch, int targets,
                     double alpha, double tau) {
    if (alpha < 0) throw ConfigError("joint loss: alpha must be >= 0");
    const int64_t T = int64_t(member_rows.size());
    int x = group_input_graph(g, features, member_rows, arch.q, arch.m);
    int out = dsnet_forward_graph(g, gp_phi, x, arch);
    int total = g.sum_sq_diff(out, targets);
    if (alpha > 0) {
        std::vector<int64_t> pa, pb;
        for (const auto& grp : member_rows)
            for (size_t a = 0; a < grp.size(); ++a)
                for (size_t b = a + 1; b < grp.size(); ++b) {
                    pa.push_back(grp[a]);
                    pb.push_back(grp[b]);
                }
        if (!pa.empty()) {
            int s = g.sum(g.exp_(
                g.scale(g.row_dot(g.gather_rows(features, pa), g.gather_rows(features, pb)),
                        1.0 / tau)));
            total = g.add(total, g.scale(s, -alpha));
        }
    }
    return g.scale(total, 1.0 / double(T));
}

TrainedDsnet train_dsnet(const Dataset& ds, const Tensor& features,
                         const std::vector<ClusterGroup>& groups, const DsnetArch& arch,
                         const num::AdamConfig& adam, int64_t epochs, uint64_t seed,
                         int64_t group_batch) {
    check_training_inputs(ds, features, arch);
    if (epochs < 0) throw ConfigError("train_dsnet: epochs must be >= 0");
    if (group_batch < 1) throw ConfigError("train_dsnet: group batch must be >= 1");
    std::vector<const ClusterGroup*> eligible = size_q_groups(groups, arch, ds.count);
    if (eligible.empty())
        throw TrainingError("train_dsnet: no groups of size " + std::to_string(arch.q));

    TrainedDsnet out;
    out.arch = arch;
    out.phi = init_dsnet(arch, seed);
    num::AdamState opt;
    opt.init(out.phi);

    const int64_t T = int64_t(eligible.size());
    for (int64_t epoch = 0; epoch < epochs; ++epoch) {
        Rng rng = Rng::derive(seed, "dsnet/epoch", uint64_t(epoch));
        for (int64_t i = T - 1; i > 0; --i)
            std::swap(eligible[size_t(i)], eligible[size_t(rng.below(uint64_t(i + 1)))]);
        double loss_acc = 0.0;
        for (int64_t start = 0; start < T; start += group_batch) {
            const int64_t stop = std::min(T, start + group_batch);
            std::vector<const ClusterGroup*> batch(eligible.begin() + start,
                                                   eligible.begin() + stop);
            Tensor x, tgt;
            fill_group_io(ds, features, arch, batch, x, tgt);
            Graph g;
            net::GraphParams gp = net::GraphParams::attach(g, out.phi, true);
            int o = dsnet_forward_graph(g, gp, g.input(std::move(x), false), arch);
            int loss = g.scale(g.sum_sq_diff(o, g.input(std::move(tgt), false)),
                               1.0 / double(batch.size()));
            const double lv = g.val(loss).item();
            if (!std::isfinite(lv)) throw TrainingError(epoch, "estimator loss diverged");
            g.backward(loss);
            opt.update(out.phi, gp.grads(), adam);
            loss_acc += lv * double(batch.size());
        }
        out.stats.epoch_loss.push_back(loss_acc / double(T));
        if (!out.phi.all_finite()) throw TrainingError(epoch, "parameters diverged (non-finite)");
    }
    return out;
}

void JointConfig::validate() const {
    if (alpha < 0) throw ConfigError("joint config: alpha must be >= 0");
    if (!(tau > 0)) throw ConfigError("joint config: tau must be positive");
    if (group_batch < 1) throw ConfigError("joint config: group batch must be >= 1");
}

JointResult train_joint(const Dataset& ds, const ModelParams& theta0, const cl::CLNetArch& cl_arch,
                        const ModelParams& phi0, const DsnetArch& arch,
                        const std::vector<ClusterGroup>& groups, const JointConfig& jcfg,
                        const num::AdamConfig& adam, int64_t epochs, uint64_t seed) {
    jcfg.validate();
    if (!ds.labeled) throw UsageError("joint training needs a labeled dataset");
    if (cl_arch.m != arch.m)
        throw DimensionError("extractor emits " + std::to_string(cl_arch.m) +
                             "-dim features, estimator expects " + std::to_string(arch.m));
    if (cl_arch.input_len != 2 * ds.sys.meas_dim())
        throw DimensionError("extractor input length does not match the measurement length");
    if (epochs < 0) throw ConfigError("train_joint: epochs must be >= 0");
    std::vector<const ClusterGroup*> eligible = size_q_groups(groups, arch, ds.count);
    if (eligible.empty())
        throw TrainingError("train_joint: no groups of size " + std::to_string(arch.q));

    JointResult out;
    out.theta = theta0;
    out.phi = phi0;
    num::AdamState opt_t, opt_p;
    opt_t.init(out.theta);
    opt_p.init(out.phi);

    const int64_t T = int64_t(eligible.size());
    const int64_t C = arch.chan_dim;
    std::vector<int64_t> row_of(size_t(ds.count), -1);

    for (int64_t epoch = 0; epoch < epochs; ++epoch) {
        Rng rng = Rng::derive(seed, "joint/epoch", uint64_t(epoch));
        for (int64_t i = T - 1; i > 0; --i)
            std::swap(eligible[size_t(i)], eligible[size_t(rng.below(uint64_t(i + 1)))]);
        double loss_acc = 0.0;
        for (int64_t start = 0; start < T; start += jcfg.group_batch) {
            const int64_t stop = std::min(T, start + jcfg.group_batch);
            std::vector<int64_t> touched;
            std::vector<std::vector<int64_t>> member_rows;
            Tensor tgt = Tensor::zeros({stop - start, arch.out_len()});
            for (int64_t t = start; t < stop; ++t) {
                const ClusterGroup& grp = *eligible[size_t(t)];
                std::vector<int64_t> rows;
                for (int64_t k = 0; k < arch.q; ++k) {
                    const int64_t mem = grp.members[size_t(k)];
                    if (row_of[size_t(mem)] < 0) {
                        row_of[size_t(mem)] = int64_t(touched.size());
                        touched.push_back(mem);
                    }
                    rows.push_back(row_of[size_t(mem)]);
                    const sim::cplx* h = ds.H_row(mem);
                    double* tt = tgt.data() + (t - start) * arch.out_len() + k * 2 * C;
                    for (int64_t c = 0; c < C; ++c) {
                        tt[c] = h[c].real();
                        tt[C + c] = h[c].imag();
                    }
                }
                member_rows.push_back(std::move(rows));
            }
            Tensor y = Tensor::zeros({int64_t(touched.size()), cl_arch.input_len});
            for (size_t r = 0; r < touched.size(); ++r)
                std::copy_n(ds.y_row(touched[r]), size_t(cl_arch.input_len),
                            y.data() + int64_t(r) * cl_arch.input_len);

            Graph g;
            net::GraphParams gp_t = net::GraphParams::attach(g, out.theta, true);
            net::GraphParams gp_p = net::GraphParams::attach(g, out.phi, true);
            int feats = cl::clnet_forward(g, gp_t, g.input(std::move(y), false), cl_arch);
            int loss = joint_loss_graph(g, feats, member_rows, gp_p, arch,
                                        g.input(std::move(tgt), false), jcfg.alpha, jcfg.tau);
            const double lv = g.val(loss).item();
            if (!std::isfinite(lv)) throw TrainingError(epoch, "joint loss diverged");
            g.backward(loss);
            opt_t.update(out.theta, gp_t.grads(), adam);
            opt_p.update(out.phi, gp_p.grads(), adam);
            loss_acc += lv * double(member_rows.size());
            for (int64_t idx : touched) row_of[size_t(idx)] = -1;
        }
        out.stats.epoch_loss.push_back(loss_acc / double(T));
        if (!out.theta.all_finite() || !out.phi.all_finite())
            throw TrainingError(epoch, "parameters diverged (non-finite)");
    }
    return out;
}

StageModels joint_stage(const Dataset& ds, const ModelParams& theta0, const cl::CLNetArch& cl_arch,
                        const TrainedDsnet& top, const JointConfig& jcfg,
                        const num::AdamConfig& adam, int64_t joint_epochs, int64_t retrain_epochs,
                        double gamma_floor, uint64_t seed) {
    const int64_t Q = top.arch.q;
    Tensor features0 = cl::dataset_features(ds, theta0, cl_arch);
    std::vector<ClusterGroup> groups = cluster_by_similarity(features0, Q, gamma_floor);
    JointResult jr = train_joint(ds, theta0, cl_arch, top.phi, top.arch, groups, jcfg, adam,
                                 joint_epochs, derive_seed(seed, "stage/joint"));

    StageModels out;
    out.theta = std::move(jr.theta);
    out.cl_arch = cl_arch;
    out.dsnets.resize(size_t(Q));
    out.dsnets[size_t(Q - 1)] = {std::move(jr.phi), top.arch, std::move(jr.stats)};

    Tensor features1 = cl::dataset_features(ds, out.theta, cl_arch);
    for (int64_t q = 1; q < Q; ++q) {
        DsnetArch arch_q = top.arch;
        arch_q.q = q;
        std::vector<ClusterGroup> gq = cluster_by_similarity(features1, q, gamma_floor);
        out.dsnets[size_t(q - 1)] =
            train_dsnet(ds, features1, gq, arch_q, adam, retrain_epochs,
                        derive_seed(seed, "stage/retrain", uint64_t(q)), jcfg.group_batch);
    }
    return out;
}

}  // namespace muce::dn
