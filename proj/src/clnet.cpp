#include "muce/clnet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "muce/errors.hpp"

namespace muce::cl {

using num::Graph;
using num::ModelParams;
using num::Tensor;
using sim::Dataset;

void ContrastiveConfig::validate() const {
    if (!(d > 0)) throw ConfigError("contrastive config: d must be positive");
    if (!(tau > 0)) throw ConfigError("contrastive config: tau must be positive");
    if (n_negatives < 1) throw ConfigError("contrastive config: need at least one negative");
    if (positive_cap < 1) throw ConfigError("contrastive config: positive cap must be >= 1");
    if (anchor_batch < 1) throw ConfigError("contrastive config: anchor batch must be >= 1");
}

std::vector<net::ConvSpec> CLNetArch::convs() const {
    return {{4, 2, 1, 8}, {2, 1, 1, 16}, {2, 1, 1, 16}, {2, 1, 0, 32}};
}

std::vector<int64_t> CLNetArch::conv_lengths() const {
    if (input_len < 1 || m < 1 || dense_hidden < 1)
        throw ConfigError("clnet arch: sizes must be positive");
    return net::conv_stack_lengths(input_len, convs());
}

int64_t CLNetArch::flat_len() const { return convs().back().ch * conv_lengths().back(); }

ModelParams init_clnet(const CLNetArch& arch, uint64_t seed) {
    const int64_t flat = arch.flat_len();  // validates the stack
    ModelParams params;
    Rng rng = Rng::derive(seed, "clnet/init");
    net::init_conv_stack(params, "", arch.convs(), rng);
    net::init_dense(params, "dense0", arch.dense_hidden, flat, rng);
    net::init_dense(params, "out", arch.m, arch.dense_hidden, rng);
    return params;
}

int clnet_forward(Graph& g, const net::GraphParams& gp, int x, const CLNetArch& arch) {
    const Tensor& xv = g.val(x);
    if (xv.rank() != 2 || xv.shape[1] != arch.input_len)
        throw DimensionError("clnet_forward: expected [B," + std::to_string(arch.input_len) +
                             "], got " + num::shape_str(xv.shape));
    const int64_t B = xv.shape[0];
    int h = g.reshape(x, {B, 1, arch.input_len});
    h = net::forward_conv_stack(g, gp, "", h, arch.convs());
    h = g.reshape(h, {B, arch.flat_len()});
    h = g.leaky_relu(g.dense(h, gp.id("dense0.w"), gp.id("dense0.b")), 0.01);
    return g.dense(h, gp.id("out.w"), gp.id("out.b"));  // identity output
}

Tensor extract_features(const ModelParams& theta, const CLNetArch& arch, const Tensor& y) {
    Graph g;
    net::GraphParams gp = net::GraphParams::attach(g, theta, false);
    int x = g.input(y, false);
    return g.val(clnet_forward(g, gp, x, arch));
}

Tensor dataset_features(const Dataset& ds, const ModelParams& theta, const CLNetArch& arch) {
    Tensor y = Tensor::zeros({ds.count, arch.input_len});
    for (int64_t i = 0; i < ds.count; ++i)
        std::copy_n(ds.y_row(i), size_t(arch.input_len), y.data() + i * arch.input_len);
    return extract_features(theta, arch, y);
}

double pair_similarity(const double* ri, const double* rj, int64_t m, double tau) {
    if (!(tau > 0)) throw ConfigError("pair_similarity: tau must be positive");
    double dot = 0.0;
    for (int64_t k = 0; k < m; ++k) dot += ri[k] * rj[k];
    return std::exp(dot / tau);
}

double csi_similarity(const double* ri, const double* rj, int64_t m) {
    double sq = 0.0;
    for (int64_t k = 0; k < m; ++k) {
        const double d = ri[k] - rj[k];
        sq += d * d;
    }
    return 1.0 / std::max(std::sqrt(sq), 1e-12);
}

namespace {

double pos_dist(const Dataset& ds, int64_t i, int64_t j) {
    return sim::dist(ds.pos(i), ds.pos(j));
}

std::vector<int64_t> positives_of(const Dataset& ds, int64_t i, const ContrastiveConfig& cfg) {
    std::vector<std::pair<double, int64_t>> in_ball;
    for (int64_t j = 0; j < ds.count; ++j) {
        if (j == i) continue;
        const double d = pos_dist(ds, i, j);
        if (d <= cfg.d) in_ball.push_back({d, j});
    }
    std::sort(in_ball.begin(), in_ball.end());
    if (int64_t(in_ball.size()) > cfg.positive_cap) in_ball.resize(size_t(cfg.positive_cap));
    std::vector<int64_t> out;
    out.reserve(in_ball.size());
    for (auto& [d, j] : in_ball) out.push_back(j);
    return out;
}

std::vector<int64_t> draw_negatives(const Dataset& ds, int64_t i, const ContrastiveConfig& cfg,
                                    Rng& rng) {
    const int64_t N = ds.count;
    std::vector<int64_t> out;
    // Rejection sampling without replacement; the d-ball is tiny relative to
    // the scene, so this nearly always succeeds immediately.
    const int64_t max_attempts = 64 * (cfg.n_negatives + 1);
    for (int64_t a = 0; a < max_attempts && int64_t(out.size()) < cfg.n_negatives; ++a) {
        const int64_t j = int64_t(rng.below(uint64_t(N)));
        if (j == i || pos_dist(ds, i, j) <= cfg.d) continue;
        if (std::find(out.begin(), out.end(), j) != out.end()) continue;
        out.push_back(j);
    }
    if (int64_t(out.size()) < cfg.n_negatives) {
        // Dense fallback: enumerate the pool and take a partial shuffle.
        std::vector<int64_t> pool;
        for (int64_t j = 0; j < N; ++j)
            if (j != i && pos_dist(ds, i, j) > cfg.d &&
                std::find(out.begin(), out.end(), j) == out.end())
                pool.push_back(j);
        if (out.empty() && pool.empty())
            throw ConfigError("sample_positives_negatives: no negatives beyond d for anchor " +
                              std::to_string(i));
        const int64_t want = std::min<int64_t>(cfg.n_negatives - int64_t(out.size()),
                                               int64_t(pool.size()));
        for (int64_t t = 0; t < want; ++t) {
            const int64_t pick = t + int64_t(rng.below(uint64_t(pool.size() - size_t(t))));
            std::swap(pool[size_t(t)], pool[size_t(pick)]);
            out.push_back(pool[size_t(t)]);
        }
    }
    return out;
}

}  // namespace

ContrastiveBatch sample_positives_negatives(const Dataset& ds, int64_t i,
                                            const ContrastiveConfig& cfg, Rng& rng) {
    cfg.validate();
    if (ds.count < 2) throw ConfigError("sample_positives_negatives: need at least two samples");
    if (i < 0 || i >= ds.count)
        throw DimensionError("sample_positives_negatives: anchor index out of range");
    ContrastiveBatch b;
    b.anchor = i;
    b.positives = positives_of(ds, i, cfg);
    b.negatives = draw_negatives(ds, i, cfg, rng);
    return b;
}

double contrastive_loss_value(const Tensor& features, const std::vector<ContrastiveBatch>& batches,
                              double tau, int64_t* used_out) {
    if (features.rank() != 2) throw DimensionError("contrastive_loss: features must be [N,m]");
    const int64_t m = features.shape[1];
    auto row = [&](int64_t r) { return features.data() + r * m; };

    double total = 0.0;
    int64_t used = 0;
    for (const ContrastiveBatch& b : batches) {
        if (b.positives.empty()) continue;
        std::vector<double> dt;
        dt.reserve(b.positives.size() + b.negatives.size());
        for (int64_t j : b.positives) {
            double dot = 0.0;
            const double *ra = row(b.anchor), *rj = row(j);
            for (int64_t k = 0; k < m; ++k) dot += ra[k] * rj[k];
            dt.push_back(dot / tau);
        }
        for (int64_t j : b.negatives) {
            double dot = 0.0;
            const double *ra = row(b.anchor), *rj = row(j);
            for (int64_t k = 0; k < m; ++k) dot += ra[k] * rj[k];
            dt.push_back(dot / tau);
        }
        const double mx = *std::max_element(dt.begin(), dt.end());
        double z = 0.0;
        for (double v : dt) z += std::exp(v - mx);
        const double lse = mx + std::log(z);
        for (size_t a = 0; a < b.positives.size(); ++a) total -= dt[a] - lse;
        ++used;
    }
    if (used == 0) throw TrainingError("contrastive loss: every anchor was skipped");
    if (used_out) *used_out = used;
    return total / double(used);
}

int contrastive_loss_graph(Graph& g, int features, const std::vector<int64_t>& row_of,
                           const std::vector<ContrastiveBatch>& batches, double tau) {
    std::vector<int64_t> pair_anchor, pair_other, seg, pos_pos, pos_seg;
    int64_t n_used = 0;
    for (const ContrastiveBatch& b : batches) {
        if (b.positives.empty()) continue;
        const int64_t a_row = row_of[size_t(b.anchor)];
        for (size_t t = 0; t < b.positives.size() + b.negatives.size(); ++t) {
            const int64_t j =
                t < b.positives.size() ? b.positives[t] : b.negatives[t - b.positives.size()];
            if (t < b.positives.size()) {
                pos_pos.push_back(int64_t(pair_anchor.size()));
                pos_seg.push_back(n_used);
            }
            pair_anchor.push_back(a_row);
            pair_other.push_back(row_of[size_t(j)]);
            seg.push_back(n_used);
        }
        ++n_used;
    }
    if (n_used == 0) throw TrainingError("contrastive loss: every anchor was skipped");

    const int64_t P = int64_t(pair_anchor.size());
    int ra = g.gather_rows(features, pair_anchor);
    int rl = g.gather_rows(features, pair_other);
    int dt = g.scale(g.row_dot(ra, rl), 1.0 / tau);
    int mx = g.segment_max_stopgrad(dt, seg, n_used);
    int mxg = g.reshape(g.gather_rows(g.reshape(mx, {n_used, 1}), seg), {P});
    int ez = g.exp_(g.sub(dt, mxg));
    int lse = g.add(g.log_(g.segment_sum(ez, seg, n_used)), mx);
    int pos_dt = g.reshape(g.gather_rows(g.reshape(dt, {P, 1}), pos_pos), {int64_t(pos_pos.size())});
    int pos_lse =
        g.reshape(g.gather_rows(g.reshape(lse, {n_used, 1}), pos_seg), {int64_t(pos_seg.size())});
    return g.scale(g.sum(g.sub(pos_dt, pos_lse)), -1.0 / double(n_used));
}

TrainedCLNet train_clnet(const Dataset& ds, const CLNetArch& arch, const ContrastiveConfig& cfg,
                         const num::AdamConfig& adam, int64_t epochs, uint64_t seed) {
    cfg.validate();
    if (ds.count < 2) throw ConfigError("train_clnet: need at least two samples");
    if (arch.input_len != 2 * ds.sys.meas_dim())
        throw DimensionError("train_clnet: arch input length " + std::to_string(arch.input_len) +
                             " does not match measurement length " +
                             std::to_string(2 * ds.sys.meas_dim()));
    if (epochs < 0) throw ConfigError("train_clnet: epochs must be >= 0");

    TrainedCLNet out;
    out.arch = arch;
    out.theta = init_clnet(arch, seed);

    const int64_t N = ds.count;
    std::vector<std::vector<int64_t>> positives(static_cast<size_t>(N));
    for (int64_t i = 0; i < N; ++i) positives[size_t(i)] = positives_of(ds, i, cfg);

    num::AdamState opt;
    opt.init(out.theta);

    std::vector<int64_t> order(static_cast<size_t>(N));
    for (int64_t i = 0; i < N; ++i) order[size_t(i)] = i;
    std::vector<int64_t> row_of(size_t(N), -1);

    for (int64_t epoch = 0; epoch < epochs; ++epoch) {
        Rng rng = Rng::derive(seed, "clnet/epoch", uint64_t(epoch));
        for (int64_t i = N - 1; i > 0; --i)
            std::swap(order[size_t(i)], order[size_t(rng.below(uint64_t(i + 1)))]);

        double loss_acc = 0.0;
        int64_t used_acc = 0;
        for (int64_t start = 0; start < N; start += cfg.anchor_batch) {
            const int64_t stop = std::min(N, start + cfg.anchor_batch);
            std::vector<ContrastiveBatch> batches;
            std::vector<int64_t> touched;
            auto touch = [&](int64_t idx) {
                if (row_of[size_t(idx)] < 0) {
                    row_of[size_t(idx)] = int64_t(touched.size());
                    touched.push_back(idx);
                }
            };
            for (int64_t t = start; t < stop; ++t) {
                const int64_t i = order[size_t(t)];
                ContrastiveBatch b;
                b.anchor = i;
                b.positives = positives[size_t(i)];
                if (b.positives.empty()) {
                    out.stats.skipped_anchors++;
                    continue;
                }
                b.negatives = draw_negatives(ds, i, cfg, rng);
                touch(i);
                for (int64_t j : b.positives) touch(j);
                for (int64_t j : b.negatives) touch(j);
                batches.push_back(std::move(b));
            }
            if (batches.empty()) continue;

            Tensor rows = Tensor::zeros({int64_t(touched.size()), arch.input_len});
            for (size_t r = 0; r < touched.size(); ++r)
                std::copy_n(ds.y_row(touched[r]), size_t(arch.input_len),
                            rows.data() + int64_t(r) * arch.input_len);

            Graph g;
            net::GraphParams gp = net::GraphParams::attach(g, out.theta, true);
            int x = g.input(std::move(rows), false);
            int feats = clnet_forward(g, gp, x, arch);
            int loss = contrastive_loss_graph(g, feats, row_of, batches, cfg.tau);
            const double lv = g.val(loss).item();
            if (!std::isfinite(lv))
                throw TrainingError(epoch, "contrastive loss diverged (non-finite)");
            g.backward(loss);
            opt.update(out.theta, gp.grads(), adam);

            loss_acc += lv * double(batches.size());
            used_acc += int64_t(batches.size());
            for (int64_t idx : touched) row_of[size_t(idx)] = -1;
        }
        if (used_acc == 0) throw TrainingError(epoch, "every anchor was skipped");
        out.stats.epoch_loss.push_back(loss_acc / double(used_acc));
        if (!out.theta.all_finite())
            throw TrainingError(epoch, "parameters diverged (non-finite)");
    }
    return out;
}

SimilarityCurve similarity_curve(const Dataset& ds, const ModelParams* theta,
                                 const CLNetArch* arch,
                                 const std::vector<std::pair<double, double>>& bins,
                                 int64_t n_pairs, uint64_t seed) {
    if (bins.empty()) throw ConfigError("similarity_curve: need at least one bin");
    const int64_t N = ds.count;
    if (N < 2) throw ConfigError("similarity_curve: need at least two samples");

    int64_t m;
    Tensor mat;
    if (theta) {
        if (!arch) throw UsageError("similarity_curve: feature mode needs the architecture");
        mat = dataset_features(ds, *theta, *arch);
        m = arch->m;
    } else {
        m = 2 * ds.sys.meas_dim();
        mat = Tensor::zeros({N, m});
        for (int64_t i = 0; i < N; ++i)
            std::copy_n(ds.y_row(i), size_t(m), mat.data() + i * m);
    }

    std::vector<double> sims, dists;
    auto add_pair = [&](int64_t i, int64_t j) {
        sims.push_back(csi_similarity(mat.data() + i * m, mat.data() + j * m, m));
        dists.push_back(pos_dist(ds, i, j));
    };
    const int64_t total = N * (N - 1) / 2;
    if (n_pairs <= 0 || n_pairs >= total) {
        for (int64_t i = 0; i < N; ++i)
            for (int64_t j = i + 1; j < N; ++j) add_pair(i, j);
    } else {
        Rng rng = Rng::derive(seed, "simcurve");
        for (int64_t t = 0; t < n_pairs; ++t) {
            int64_t i = int64_t(rng.below(uint64_t(N))), j = int64_t(rng.below(uint64_t(N)));
            while (j == i) j = int64_t(rng.below(uint64_t(N)));
            add_pair(i, j);
        }
    }

    double mu = 0.0;
    for (double s : sims) mu += s;
    mu /= double(sims.size());
    double var = 0.0;
    for (double s : sims) var += (s - mu) * (s - mu);
    var /= double(sims.size());
    const double sd = std::sqrt(var);

    SimilarityCurve out;
    for (auto& [lo, hi] : bins) {
        out.bin_lo.push_back(lo);
        out.bin_hi.push_back(hi);
        out.count.push_back(0);
        out.mean.push_back(0.0);
    }
    for (size_t t = 0; t < sims.size(); ++t) {
        const double z = sd > 0.0 ? (sims[t] - mu) / sd : 0.0;
        for (size_t b = 0; b < bins.size(); ++b)
            if (dists[t] >= bins[b].first && dists[t] < bins[b].second) {
                out.mean[b] += z;
                out.count[b]++;
                break;
            }
    }
    for (size_t b = 0; b < bins.size(); ++b)
        out.mean[b] = out.count[b] > 0 ? out.mean[b] / double(out.count[b])
                                       : std::numeric_limits<double>::quiet_NaN();
    return out;
}

}  // namespace muce::cl
