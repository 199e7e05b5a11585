#include "muce/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <filesystem>
#include <utility>

#include "json.hpp"
#include "muce/csv.hpp"
#include "muce/errors.hpp"
#include "muce/io.hpp"
#include "muce/manifest.hpp"
#include "muce/svg.hpp"

namespace muce::exp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string join(const std::string& dir, const std::string& rel) { return dir + "/" + rel; }

void say(const std::string& line) { std::printf("%s\n", line.c_str()); }

void warn(const std::string& line) { std::fprintf(stderr, "%s\n", line.c_str()); }

num::AdamConfig adam_of(double lr, double weight_decay) {
    num::AdamConfig a;
    a.lr = lr;
    a.weight_decay = weight_decay;
    return a;
}

// Existence gets a guiding message; an existing file must also match the
// manifest so a tampered or stale artifact fails loudly.
void need_artifact(const std::string& out, const std::string& rel, const std::string& hint) {
    if (!io::file_exists(join(out, rel)))
        throw UsageError("missing " + rel + " under " + out + "; " + hint);
    man::check(out, rel);
}

void need_dataset(const std::string& out, const std::string& stem, const std::string& hint) {
    need_artifact(out, stem + ".meta", hint);
    need_artifact(out, stem + ".bin", hint);
}

void check_dims(const sim::Dataset& ds, const cfg::ExperimentConfig& cfg, const std::string& what) {
    const auto& a = ds.sys;
    const auto& b = cfg.system;
    if (a.n_tx != b.n_tx || a.n_rx != b.n_rx || a.n_sc != b.n_sc || a.pilot_len != b.pilot_len)
        throw ConfigError("stored " + what + " was generated for a different system size; regenerate");
}

void write_trace(const std::string& out, const std::string& rel,
                 const std::vector<double>& epoch_loss, std::vector<std::string>& rels) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(epoch_loss.size());
    for (size_t e = 0; e < epoch_loss.size(); ++e)
        rows.push_back({std::to_string(e), csv::num_field(epoch_loss[e])});
    csv::write(join(out, rel), {"epoch", "loss"}, rows);
    rels.push_back(rel);
}

void write_floor(const std::string& out, const std::string& rel, double floor,
                 std::vector<std::string>& rels) {
    json j;
    j["gamma_floor"] = floor;
    io::write_bytes(join(out, rel), j.dump(2) + "\n");
    rels.push_back(rel);
}

double read_floor(const std::string& out, const std::string& rel) {
    json j;
    try {
        j = json::parse(io::read_bytes(join(out, rel)));
    } catch (const json::exception& e) {
        throw IoError(join(out, rel), std::string("bad grouping file: ") + e.what());
    }
    if (!j.is_object() || !j.contains("gamma_floor") || !j["gamma_floor"].is_number())
        throw IoError(join(out, rel), "gamma_floor missing");
    return j["gamma_floor"].get<double>();
}

std::vector<std::string> params_files(const std::string& stem) {
    return {stem + ".meta", stem + ".bin"};
}

void save_model(const std::string& out, const std::string& stem, const num::ModelParams& p,
                std::vector<std::string>& rels) {
    num::save_params(p, join(out, stem));
    rels.push_back(stem + ".meta");
    rels.push_back(stem + ".bin");
}

void finish(const std::string& out, const std::vector<std::string>& rels) {
    man::record(out, rels);
    for (const auto& r : rels) say("wrote " + join(out, r));
}

std::string dsnet_stem(const std::string& prefix, int64_t q) {
    return prefix + std::to_string(q);
}

// --- persisted-model loading for evaluate -----------------------------------

struct ModelStore {
    num::ModelParams theta;  // pretrained extractor alone (labels axis)
    bool have_theta = false;
    dn::StageModels separate, joint;
    double separate_floor = 0.0, joint_floor = 0.0;
    bool have_separate = false, have_joint = false;
    base::RawNet single_user;
    std::vector<base::RawNet> location;
    bool have_single = false, have_location = false;
};

ModelStore load_models(const cfg::ExperimentConfig& cfg, std::vector<std::string>& missing) {
    ModelStore ms;
    const std::string& out = cfg.out;
    const int64_t Q = cfg.q_max;
    const int64_t chan = cfg.system.chan_dim();

    auto present = [&](const std::vector<std::string>& rels, std::string& first) {
        for (const auto& r : rels)
            if (!io::file_exists(join(out, r))) {
                first = r;
                return false;
            }
        return true;
    };
    auto checked = [&](const std::vector<std::string>& rels) {
        for (const auto& r : rels) man::check(out, r);
    };

    std::string miss;
    const auto cl_files = params_files("models/clnet");
    if (present(cl_files, miss)) {
        checked(cl_files);
        ms.theta = num::load_params(join(out, "models/clnet"));
        ms.have_theta = true;
    }

    auto sep_files = cl_files;
    for (int64_t q = 1; q <= Q; ++q)
        for (auto& f : params_files(dsnet_stem("models/dsnet", q))) sep_files.push_back(f);
    sep_files.push_back("models/separate.json");
    if (present(sep_files, miss)) {
        checked(sep_files);
        ms.separate.theta = ms.theta;
        ms.separate.cl_arch = cfg.clnet_arch();
        for (int64_t q = 1; q <= Q; ++q)
            ms.separate.dsnets.push_back(
                {num::load_params(join(out, dsnet_stem("models/dsnet", q))),
                 dn::DsnetArch{q, cfg.feature_dim, chan},
                 {}});
        ms.separate_floor = read_floor(out, "models/separate.json");
        ms.have_separate = true;
    } else {
        missing.push_back("proposed-separate unavailable: missing " + miss);
    }

    auto joint_files = params_files("models/joint_clnet");
    for (int64_t q = 1; q <= Q; ++q)
        for (auto& f : params_files(dsnet_stem("models/joint_dsnet", q))) joint_files.push_back(f);
    joint_files.push_back("models/joint.json");
    if (present(joint_files, miss)) {
        checked(joint_files);
        ms.joint.theta = num::load_params(join(out, "models/joint_clnet"));
        ms.joint.cl_arch = cfg.clnet_arch();
        for (int64_t q = 1; q <= Q; ++q)
            ms.joint.dsnets.push_back(
                {num::load_params(join(out, dsnet_stem("models/joint_dsnet", q))),
                 dn::DsnetArch{q, cfg.feature_dim, chan},
                 {}});
        ms.joint_floor = read_floor(out, "models/joint.json");
        ms.have_joint = true;
    } else {
        missing.push_back("proposed-joint unavailable: missing " + miss);
    }

    const dn::DsnetArch raw1{1, 2 * cfg.system.meas_dim(), chan};
    const auto single_files = params_files("models/single_user");
    if (present(single_files, miss)) {
        checked(single_files);
        ms.single_user = {num::load_params(join(out, "models/single_user")), raw1, {}};
        ms.have_single = true;
    } else {
        missing.push_back("single-user unavailable: missing " + miss);
    }

    auto loc_files = single_files;  // singleton groups fall back to the single-user net
    for (int64_t q = 2; q <= Q; ++q)
        for (auto& f : params_files(dsnet_stem("models/location", q))) loc_files.push_back(f);
    if (present(loc_files, miss)) {
        checked(loc_files);
        for (int64_t q = 2; q <= Q; ++q)
            ms.location.push_back({num::load_params(join(out, dsnet_stem("models/location", q))),
                                   dn::DsnetArch{q, 2 * cfg.system.meas_dim(), chan},
                                   {}});
        ms.have_location = true;
    } else {
        missing.push_back("location unavailable: missing " + miss);
    }
    return ms;
}

EvalModels view_of(const ModelStore& ms, bool with_jomp) {
    EvalModels em;
    if (ms.have_joint) {
        em.joint = &ms.joint;
        em.joint_floor = ms.joint_floor;
    }
    if (ms.have_separate) {
        em.separate = &ms.separate;
        em.separate_floor = ms.separate_floor;
    }
    if (ms.have_single) em.single_user = &ms.single_user;
    if (ms.have_location) em.location = &ms.location;
    em.use_jomp = with_jomp;
    return em;
}

// --- sweep plumbing ---------------------------------------------------------

void series_add(std::vector<svg::Series>& v, const std::string& label, double x, double y) {
    for (auto& s : v)
        if (s.label == label) {
            s.x.push_back(x);
            s.y.push_back(y);
            return;
        }
    v.push_back({label, {x}, {y}});
}

void add_scores(std::vector<std::vector<std::string>>& rows, std::vector<svg::Series>& series,
                const std::vector<MethodScore>& scores, const std::string& axis_val, double x,
                uint64_t seed) {
    for (const auto& s : scores) {
        rows.push_back({s.method, axis_val, csv::num_field(s.score.linear),
                        csv::num_field(s.score.db), std::to_string(s.score.used),
                        std::to_string(seed)});
        series_add(series, s.method, x, s.score.db);
        say("  " + s.method + ": nmse_db=" + csv::num_field(s.score.db));
    }
}

void write_sweep(const std::string& out, const std::string& stem, const std::string& axis_col,
                 const std::string& title, const std::string& xlabel,
                 const std::vector<std::vector<std::string>>& rows,
                 const std::vector<svg::Series>& series, std::vector<std::string>& rels) {
    csv::write(join(out, stem + ".csv"), {"method", axis_col, "nmse", "nmse_db", "n_test", "seed"},
               rows);
    svg::write_line_plot(join(out, stem + ".svg"), title, xlabel, "NMSE (dB)", series);
    rels.push_back(stem + ".csv");
    rels.push_back(stem + ".svg");
}

// --- axis handlers ----------------------------------------------------------

void eval_snr(const cfg::ExperimentConfig& cfg, const EvalModels& em, const sim::Dataset& test,
              const sim::PilotMatrix& pilot) {
    std::vector<std::vector<std::string>> rows;
    std::vector<svg::Series> series;
    for (size_t i = 0; i < cfg.snr_axis.size(); ++i) {
        const double snr = cfg.snr_axis[i];
        say("snr_db=" + csv::num_field(snr));
        sim::Dataset point = (snr == test.snr_db)
                                 ? test
                                 : sim::remeasure(test, pilot, snr,
                                                  derive_seed(cfg.seed, "eval/snr", uint64_t(i)),
                                                  "remeasure");
        add_scores(rows, series, evaluate_methods(cfg, em, point, pilot), csv::num_field(snr), snr,
                   cfg.seed);
    }
    std::vector<std::string> rels;
    write_sweep(cfg.out, "results/evaluate_snr", "snr_db", "NMSE vs SNR", "SNR (dB)", rows, series,
                rels);
    finish(cfg.out, rels);
}

void eval_labels(const cfg::ExperimentConfig& cfg, const ModelStore& ms, const sim::Dataset& test,
                 const sim::PilotMatrix& pilot) {
    const std::string& out = cfg.out;
    need_dataset(out, "data/downstream", "run generate first");
    sim::Dataset dsfull = sim::load_dataset(join(out, "data/downstream"));
    check_dims(dsfull, cfg, "downstream data");
    if (!ms.have_theta)
        warn("missing models/clnet: labels axis covers only the raw-measurement baselines");

    std::vector<std::vector<std::string>> rows;
    std::vector<svg::Series> series;
    for (size_t i = 0; i < cfg.label_axis.size(); ++i) {
        const int64_t n = cfg.label_axis[i];
        say("n_labels=" + std::to_string(n) + " (retraining)");
        sim::Dataset sub = prefix_labels(dsfull, n);
        const uint64_t seed_n = derive_seed(cfg.seed, "eval/labels", uint64_t(i));
        std::vector<MethodScore> scores;
        if (ms.have_theta) {
            TrainedSuite suite = train_estimators(cfg, sub, ms.theta, cfg.clnet_arch(), seed_n);
            scores = evaluate_methods(cfg, EvalModels::of(suite, false), test, pilot);
        } else {
            base::RawNet single = base::single_user_ce(
                sub, adam_of(cfg.baseline_lr, cfg.weight_decay), cfg.baseline_epochs,
                derive_seed(seed_n, "cli/single"), cfg.group_batch);
            std::vector<base::RawNet> location;
            for (int64_t q = 2; q <= cfg.q_max; ++q)
                location.push_back(base::location_based_ce(
                    sub, q, adam_of(cfg.baseline_lr, cfg.weight_decay), cfg.baseline_epochs,
                    derive_seed(seed_n, "cli/location", uint64_t(q)), cfg.group_batch));
            EvalModels em;
            em.single_user = &single;
            em.location = &location;
            scores = evaluate_methods(cfg, em, test, pilot);
        }
        add_scores(rows, series, scores, std::to_string(n), double(n), cfg.seed);
    }
    std::vector<std::string> rels;
    write_sweep(out, "results/evaluate_labels", "n_labels", "NMSE vs labeled samples",
                "labeled samples", rows, series, rels);
    finish(out, rels);
}

void eval_pilot(const cfg::ExperimentConfig& cfg) {
    std::vector<std::vector<std::string>> rows;
    std::vector<svg::Series> series;
    for (size_t i = 0; i < cfg.pilot_axis.size(); ++i) {
        const int64_t L = cfg.pilot_axis[i];
        cfg::ExperimentConfig cfgL = cfg;
        cfgL.system.pilot_len = L;
        cfgL.validate();
        say("pilot_len=" + std::to_string(L) + " (regenerating and retraining)");
        sim::Scene scene = sim::generate_scene(sim::Rect{0.0, 0.0, cfg.area, cfg.area},
                                               cfg.n_scatterers, cfg.seed);
        sim::DatasetBundle bundle =
            sim::build_datasets(scene, cfgL.system,
                                {cfg.n_contrastive, cfg.n_downstream, cfg.n_test}, cfg.snr_db,
                                cfg.seed);
        TrainedSuite suite =
            train_suite(cfgL, bundle, derive_seed(cfg.seed, "eval/pilot", uint64_t(L)));
        add_scores(rows, series,
                   evaluate_methods(cfgL, EvalModels::of(suite, true), bundle.test, bundle.pilot),
                   std::to_string(L), double(L), cfg.seed);
    }
    std::vector<std::string> rels;
    write_sweep(cfg.out, "results/evaluate_pilot", "pilot_len", "NMSE vs pilot length",
                "pilot length", rows, series, rels);
    finish(cfg.out, rels);
}

void eval_grid(const cfg::ExperimentConfig& cfg, const ModelStore& ms, const sim::Dataset& test) {
    const dn::StageModels* sm = nullptr;
    double floor = 0.0;
    if (ms.have_joint) {
        sm = &ms.joint;
        floor = ms.joint_floor;
    } else if (ms.have_separate) {
        warn("missing joint models: grid axis falls back to the separately trained stage");
        sm = &ms.separate;
        floor = ms.separate_floor;
    } else {
        throw UsageError("grid axis needs a trained multi-user stage; run train first");
    }

    const int64_t K = cfg.k_users;
    const int64_t meas2 = 2 * test.sys.meas_dim();
    const int64_t chan = test.sys.chan_dim();
    std::vector<std::vector<std::string>> rows;
    std::vector<double> xs, ys, vals;
    int64_t skipped = 0;
    for (int64_t lo = 0; lo < test.count; lo += K) {
        const int64_t hi = std::min(test.count, lo + K);
        num::Tensor y = num::Tensor::zeros({hi - lo, meas2});
        for (int64_t r = 0; r < hi - lo; ++r)
            std::copy_n(test.y_row(lo + r), size_t(meas2), y.v.begin() + r * meas2);
        pipe::EstimationReport rep = pipe::estimate_multi_user(*sm, y, floor);
        for (int64_t r = 0; r < hi - lo; ++r) {
            const int64_t u = lo + r;
            const sim::cplx* t = test.H_row(u);
            double nt = 0.0, err = 0.0;
            for (int64_t c = 0; c < chan; ++c) {
                nt += std::norm(t[c]);
                err += std::norm(t[c] - rep.h[size_t(r)][size_t(c)]);
            }
            if (nt == 0.0) {
                ++skipped;
                continue;
            }
            const double v = err / nt;
            const double db = v > 0.0 ? 10.0 * std::log10(v)
                                      : -std::numeric_limits<double>::infinity();
            const sim::Vec2 p = test.pos(u);
            rows.push_back(
                {csv::num_field(p.x), csv::num_field(p.y), csv::num_field(v), csv::num_field(db)});
            xs.push_back(p.x);
            ys.push_back(p.y);
            vals.push_back(10.0 * std::log10(std::max(v, 1e-300)));
        }
    }
    if (skipped > 0) warn(std::to_string(skipped) + " zero-channel users skipped");
    std::vector<std::string> rels;
    csv::write(join(cfg.out, "results/evaluate_grid.csv"), {"x", "y", "nmse", "nmse_db"}, rows);
    rels.push_back("results/evaluate_grid.csv");
    svg::write_position_map(join(cfg.out, "results/evaluate_grid.svg"), "Per-user NMSE (dB)", xs,
                            ys, vals);
    rels.push_back("results/evaluate_grid.svg");
    finish(cfg.out, rels);
}

}  // namespace

// --- public helpers ---------------------------------------------------------

sim::Dataset prefix_labels(const sim::Dataset& ds, int64_t n) {
    if (n < 1 || n > ds.count)
        throw ConfigError("label subset size " + std::to_string(n) + " out of range (dataset has " +
                          std::to_string(ds.count) + ")");
    sim::Dataset out = ds;
    out.count = n;
    out.positions.resize(size_t(2 * n));
    out.Y.resize(size_t(n * ds.sys.meas_dim()));
    if (ds.labeled) out.H.resize(size_t(n * ds.sys.chan_dim()));
    out.y_real.resize(size_t(n * 2 * ds.sys.meas_dim()));
    return out;
}

double grouping_floor(const num::Tensor& features, const std::vector<dn::ClusterGroup>& groups) {
    if (features.rank() != 2) throw DimensionError("grouping_floor: features must be [n, m]");
    const int64_t m = features.dim(1);
    std::vector<double> gammas;
    for (const auto& g : groups)
        for (size_t a = 0; a < g.members.size(); ++a)
            for (size_t b = a + 1; b < g.members.size(); ++b)
                gammas.push_back(cl::csi_similarity(features.v.data() + g.members[a] * m,
                                                    features.v.data() + g.members[b] * m, m));
    if (gammas.empty()) return 0.0;
    std::sort(gammas.begin(), gammas.end());
    const size_t n = gammas.size();
    return n % 2 == 1 ? gammas[n / 2] : 0.5 * (gammas[n / 2 - 1] + gammas[n / 2]);
}

TrainedSuite train_estimators(const cfg::ExperimentConfig& cfg, const sim::Dataset& downstream,
                              const num::ModelParams& theta, const cl::CLNetArch& cl_arch,
                              uint64_t seed) {
    const int64_t Q = cfg.q_max;
    const int64_t chan = downstream.sys.chan_dim();
    TrainedSuite s;
    num::Tensor features = cl::dataset_features(downstream, theta, cl_arch);
    s.separate.theta = theta;
    s.separate.cl_arch = cl_arch;
    std::vector<dn::ClusterGroup> top_groups;
    for (int64_t q = 1; q <= Q; ++q) {
        std::vector<dn::ClusterGroup> groups = dn::cluster_by_similarity(features, q, 0.0);
        s.separate.dsnets.push_back(dn::train_dsnet(
            downstream, features, groups, dn::DsnetArch{q, cl_arch.m, chan},
            adam_of(cfg.dsnet_lr, cfg.weight_decay), cfg.dsnet_epochs,
            derive_seed(seed, "cli/dsnet", uint64_t(q)), cfg.group_batch));
        if (q == Q) top_groups = std::move(groups);
    }
    s.separate_floor = grouping_floor(features, top_groups);

    s.joint = dn::joint_stage(downstream, theta, cl_arch, s.separate.dsnets[size_t(Q - 1)],
                              cfg.joint, adam_of(cfg.joint_lr, cfg.weight_decay), cfg.joint_epochs,
                              cfg.retrain_epochs, 0.0, derive_seed(seed, "cli/joint"));
    num::Tensor refined = cl::dataset_features(downstream, s.joint.theta, cl_arch);
    s.joint_floor = grouping_floor(refined, dn::cluster_by_similarity(refined, Q, 0.0));

    s.single_user =
        base::single_user_ce(downstream, adam_of(cfg.baseline_lr, cfg.weight_decay),
                             cfg.baseline_epochs, derive_seed(seed, "cli/single"), cfg.group_batch);
    for (int64_t q = 2; q <= Q; ++q)
        s.location.push_back(base::location_based_ce(
            downstream, q, adam_of(cfg.baseline_lr, cfg.weight_decay), cfg.baseline_epochs,
            derive_seed(seed, "cli/location", uint64_t(q)), cfg.group_batch));
    return s;
}

TrainedSuite train_suite(const cfg::ExperimentConfig& cfg, const sim::DatasetBundle& bundle,
                         uint64_t seed) {
    const cl::CLNetArch arch = cfg.clnet_arch();
    cl::TrainedCLNet tc =
        cl::train_clnet(bundle.contrastive, arch, cfg.contrastive,
                        adam_of(cfg.clnet_lr, cfg.weight_decay), cfg.clnet_epochs,
                        derive_seed(seed, "cli/clnet"));
    return train_estimators(cfg, bundle.downstream, tc.theta, arch, seed);
}

EvalModels EvalModels::of(const TrainedSuite& s, bool with_jomp) {
    EvalModels em;
    em.joint = &s.joint;
    em.joint_floor = s.joint_floor;
    em.separate = &s.separate;
    em.separate_floor = s.separate_floor;
    em.single_user = &s.single_user;
    em.location = &s.location;
    em.use_jomp = with_jomp;
    return em;
}

std::vector<MethodScore> evaluate_methods(const cfg::ExperimentConfig& cfg,
                                          const EvalModels& models, const sim::Dataset& test,
                                          const sim::PilotMatrix& pilot) {
    if (!test.labeled) throw UsageError("evaluation needs a labeled test set");
    if (test.count < 1) throw ConfigError("evaluation needs a non-empty test set");
    const int64_t K = cfg.k_users;
    const int64_t meas = test.sys.meas_dim();
    const int64_t chan = test.sys.chan_dim();

    std::vector<std::vector<sim::cplx>> truth(size_t(test.count));
    for (int64_t i = 0; i < test.count; ++i)
        truth[size_t(i)].assign(test.H_row(i), test.H_row(i) + chan);

    std::vector<std::pair<int64_t, int64_t>> packs;
    for (int64_t lo = 0; lo < test.count; lo += K)
        packs.emplace_back(lo, std::min(test.count, lo + K));

    auto pack_rows = [&](int64_t lo, int64_t hi) {
        num::Tensor y = num::Tensor::zeros({hi - lo, 2 * meas});
        for (int64_t r = 0; r < hi - lo; ++r)
            std::copy_n(test.y_row(lo + r), size_t(2 * meas), y.v.begin() + r * 2 * meas);
        return y;
    };

    std::vector<MethodScore> out;
    auto run_stage = [&](const dn::StageModels& sm, double floor, const char* name) {
        std::vector<std::vector<sim::cplx>> est(size_t(test.count));
        for (auto [lo, hi] : packs) {
            pipe::EstimationReport rep = pipe::estimate_multi_user(sm, pack_rows(lo, hi), floor);
            for (int64_t r = 0; r < hi - lo; ++r) est[size_t(lo + r)] = std::move(rep.h[size_t(r)]);
        }
        out.push_back({name, pipe::nmse(truth, est)});
    };
    if (models.joint) run_stage(*models.joint, models.joint_floor, "proposed-joint");
    if (models.separate) run_stage(*models.separate, models.separate_floor, "proposed-separate");

    if (models.single_user) {
        std::vector<std::vector<sim::cplx>> est(size_t(test.count));
        for (int64_t i = 0; i < test.count; ++i) {
            num::Tensor y = num::Tensor::zeros({1, 2 * meas});
            std::copy_n(test.y_row(i), size_t(2 * meas), y.v.begin());
            sim::CMat e = base::apply_raw_net(*models.single_user, y);
            est[size_t(i)].assign(e.v.begin(), e.v.end());
        }
        out.push_back({"single-user", pipe::nmse(truth, est)});
    }

    if (models.location && models.single_user) {
        const int64_t qcap = 1 + int64_t(models.location->size());
        std::vector<std::vector<sim::cplx>> est(size_t(test.count));
        for (auto [lo, hi] : packs) {
            const int64_t k = hi - lo;
            num::Tensor pos = num::Tensor::zeros({k, 2});
            for (int64_t r = 0; r < k; ++r) {
                const sim::Vec2 p = test.pos(lo + r);
                pos.v[size_t(2 * r)] = p.x;
                pos.v[size_t(2 * r + 1)] = p.y;
            }
            for (const auto& g : dn::cluster_by_similarity(pos, std::min(qcap, k), 0.0)) {
                const int64_t q = int64_t(g.members.size());
                const base::RawNet& net =
                    q == 1 ? *models.single_user : (*models.location)[size_t(q - 2)];
                num::Tensor y = num::Tensor::zeros({q, 2 * meas});
                for (int64_t c = 0; c < q; ++c)
                    std::copy_n(test.y_row(lo + g.members[size_t(c)]), size_t(2 * meas),
                                y.v.begin() + c * 2 * meas);
                sim::CMat e = base::apply_raw_net(net, y);
                for (int64_t c = 0; c < q; ++c) {
                    auto& slot = est[size_t(lo + g.members[size_t(c)])];
                    slot.resize(size_t(chan));
                    for (int64_t row = 0; row < chan; ++row) slot[size_t(row)] = e.at(row, c);
                }
            }
        }
        out.push_back({"location", pipe::nmse(truth, est)});
    }

    if (models.use_jomp) {
        if (test.sys.n_rx != 1 || test.sys.n_sc != 1)
            throw ConfigError(
                "compressed-sensing baseline needs single-antenna, single-carrier data");
        const base::AngularDictionary dict = base::make_dictionary(test.sys.n_tx, cfg.jomp_grid);
        const base::JompConfig jc{cfg.jomp_sparsity, cfg.jomp_tol};
        std::vector<std::vector<sim::cplx>> est(size_t(test.count));
        for (auto [lo, hi] : packs) {
            std::vector<std::vector<sim::cplx>> y(size_t(hi - lo));
            for (int64_t r = 0; r < hi - lo; ++r)
                y[size_t(r)].assign(test.Y_row(lo + r), test.Y_row(lo + r) + meas);
            base::JompResult jr = base::jomp(y, pilot, dict, jc);
            for (int64_t r = 0; r < hi - lo; ++r) est[size_t(lo + r)] = std::move(jr.h[size_t(r)]);
        }
        out.push_back({"jomp", pipe::nmse(truth, est)});
    }

    if (out.empty()) throw UsageError("no methods available to evaluate");
    return out;
}

// --- commands ---------------------------------------------------------------

void cmd_generate(const cfg::ExperimentConfig& cfg, bool force) {
    cfg.validate();
    const std::string& out = cfg.out;
    if (io::file_exists(join(out, "data/contrastive.meta")) && !force)
        throw UsageError("data already present under " + out + "; pass --force to regenerate");
    fs::create_directories(join(out, "data"));
    sim::Scene scene =
        sim::generate_scene(sim::Rect{0.0, 0.0, cfg.area, cfg.area}, cfg.n_scatterers, cfg.seed);
    sim::DatasetBundle bundle =
        sim::build_datasets(scene, cfg.system, {cfg.n_contrastive, cfg.n_downstream, cfg.n_test},
                            cfg.snr_db, cfg.seed);
    sim::save_dataset(bundle.contrastive, join(out, "data/contrastive"));
    sim::save_dataset(bundle.downstream, join(out, "data/downstream"));
    sim::save_dataset(bundle.test, join(out, "data/test"));
    say("scene: " + std::to_string(cfg.n_scatterers) + " scatterers; datasets: " +
        std::to_string(cfg.n_contrastive) + " contrastive / " + std::to_string(cfg.n_downstream) +
        " downstream / " + std::to_string(cfg.n_test) + " test");
    finish(out, {"data/contrastive.meta", "data/contrastive.bin", "data/downstream.meta",
                 "data/downstream.bin", "data/test.meta", "data/test.bin"});
}

void cmd_train(const cfg::ExperimentConfig& cfg, const std::string& stage) {
    cfg.validate();
    if (stage == "all") {
        cmd_train(cfg, "clnet");
        for (int64_t q = 1; q <= cfg.q_max; ++q) cmd_train(cfg, "dsnet:" + std::to_string(q));
        cmd_train(cfg, "joint");
        cmd_train(cfg, "baselines");
        return;
    }
    const std::string& out = cfg.out;
    const cl::CLNetArch arch = cfg.clnet_arch();
    const int64_t Q = cfg.q_max;
    fs::create_directories(join(out, "models"));
    fs::create_directories(join(out, "traces"));
    std::vector<std::string> rels;

    if (stage == "clnet") {
        need_dataset(out, "data/contrastive", "run generate first");
        sim::Dataset ds = sim::load_dataset(join(out, "data/contrastive"));
        check_dims(ds, cfg, "contrastive data");
        cl::TrainedCLNet tc =
            cl::train_clnet(ds, arch, cfg.contrastive, adam_of(cfg.clnet_lr, cfg.weight_decay),
                            cfg.clnet_epochs, derive_seed(cfg.seed, "cli/clnet"));
        if (tc.stats.skipped_anchors > 0)
            warn(std::to_string(tc.stats.skipped_anchors) + " anchors had no positives");
        save_model(out, "models/clnet", tc.theta, rels);
        write_trace(out, "traces/clnet_loss.csv", tc.stats.epoch_loss, rels);
        finish(out, rels);
        return;
    }

    if (stage.rfind("dsnet:", 0) == 0) {
        int64_t q = 0;
        try {
            size_t used = 0;
            q = std::stoll(stage.substr(6), &used);
            if (used != stage.size() - 6) q = 0;
        } catch (const std::exception&) {
            q = 0;
        }
        if (q < 1 || q > Q)
            throw UsageError("stage '" + stage + "': group size must be in 1.." +
                             std::to_string(Q));
        need_dataset(out, "data/downstream", "run generate first");
        need_artifact(out, "models/clnet.meta", "run train --stage clnet first");
        need_artifact(out, "models/clnet.bin", "run train --stage clnet first");
        sim::Dataset ds = sim::load_dataset(join(out, "data/downstream"));
        check_dims(ds, cfg, "downstream data");
        num::ModelParams theta = num::load_params(join(out, "models/clnet"));
        num::Tensor features = cl::dataset_features(ds, theta, arch);
        std::vector<dn::ClusterGroup> groups = dn::cluster_by_similarity(features, q, 0.0);
        dn::TrainedDsnet td = dn::train_dsnet(
            ds, features, groups, dn::DsnetArch{q, cfg.feature_dim, cfg.system.chan_dim()},
            adam_of(cfg.dsnet_lr, cfg.weight_decay), cfg.dsnet_epochs,
            derive_seed(cfg.seed, "cli/dsnet", uint64_t(q)), cfg.group_batch);
        save_model(out, dsnet_stem("models/dsnet", q), td.phi, rels);
        write_trace(out, dsnet_stem("traces/dsnet", q) + "_loss.csv", td.stats.epoch_loss, rels);
        if (q == Q) write_floor(out, "models/separate.json", grouping_floor(features, groups), rels);
        finish(out, rels);
        return;
    }

    if (stage == "joint") {
        need_dataset(out, "data/downstream", "run generate first");
        need_artifact(out, "models/clnet.meta", "run train --stage clnet first");
        need_artifact(out, "models/clnet.bin", "run train --stage clnet first");
        const std::string top_stem = dsnet_stem("models/dsnet", Q);
        need_artifact(out, top_stem + ".meta", "run train --stage dsnet:" + std::to_string(Q) + " first");
        need_artifact(out, top_stem + ".bin", "run train --stage dsnet:" + std::to_string(Q) + " first");
        sim::Dataset ds = sim::load_dataset(join(out, "data/downstream"));
        check_dims(ds, cfg, "downstream data");
        num::ModelParams theta = num::load_params(join(out, "models/clnet"));
        dn::TrainedDsnet top{num::load_params(join(out, top_stem)),
                             dn::DsnetArch{Q, cfg.feature_dim, cfg.system.chan_dim()},
                             {}};
        dn::StageModels sm = dn::joint_stage(ds, theta, arch, top, cfg.joint,
                                             adam_of(cfg.joint_lr, cfg.weight_decay),
                                             cfg.joint_epochs, cfg.retrain_epochs, 0.0,
                                             derive_seed(cfg.seed, "cli/joint"));
        num::Tensor refined = cl::dataset_features(ds, sm.theta, arch);
        const double floor =
            grouping_floor(refined, dn::cluster_by_similarity(refined, Q, 0.0));
        save_model(out, "models/joint_clnet", sm.theta, rels);
        for (int64_t q = 1; q <= Q; ++q)
            save_model(out, dsnet_stem("models/joint_dsnet", q), sm.dsnets[size_t(q - 1)].phi,
                       rels);
        write_floor(out, "models/joint.json", floor, rels);
        write_trace(out, "traces/joint_loss.csv", sm.dsnets[size_t(Q - 1)].stats.epoch_loss, rels);
        for (int64_t q = 1; q < Q; ++q)
            write_trace(out, dsnet_stem("traces/joint_dsnet", q) + "_loss.csv",
                        sm.dsnets[size_t(q - 1)].stats.epoch_loss, rels);
        finish(out, rels);
        return;
    }

    if (stage == "baselines") {
        need_dataset(out, "data/downstream", "run generate first");
        sim::Dataset ds = sim::load_dataset(join(out, "data/downstream"));
        check_dims(ds, cfg, "downstream data");
        base::RawNet single = base::single_user_ce(ds, adam_of(cfg.baseline_lr, cfg.weight_decay),
                                                   cfg.baseline_epochs,
                                                   derive_seed(cfg.seed, "cli/single"),
                                                   cfg.group_batch);
        save_model(out, "models/single_user", single.phi, rels);
        write_trace(out, "traces/single_user_loss.csv", single.stats.epoch_loss, rels);
        for (int64_t q = 2; q <= Q; ++q) {
            base::RawNet loc = base::location_based_ce(
                ds, q, adam_of(cfg.baseline_lr, cfg.weight_decay), cfg.baseline_epochs,
                derive_seed(cfg.seed, "cli/location", uint64_t(q)), cfg.group_batch);
            save_model(out, dsnet_stem("models/location", q), loc.phi, rels);
            write_trace(out, dsnet_stem("traces/location", q) + "_loss.csv", loc.stats.epoch_loss,
                        rels);
        }
        finish(out, rels);
        return;
    }

    throw UsageError("unknown stage '" + stage +
                     "' (expected clnet, dsnet:<q>, joint, baselines, or all)");
}

void cmd_evaluate(const cfg::ExperimentConfig& cfg, const std::string& axis) {
    cfg.validate();
    if (axis != "snr" && axis != "labels" && axis != "pilot" && axis != "grid")
        throw UsageError("unknown axis '" + axis + "' (expected snr, labels, pilot, or grid)");
    fs::create_directories(join(cfg.out, "results"));
    if (axis == "pilot") {
        eval_pilot(cfg);  // regenerates and retrains per point; touches no stored artifacts
        return;
    }
    need_dataset(cfg.out, "data/test", "run generate first");
    sim::Dataset test = sim::load_dataset(join(cfg.out, "data/test"));
    check_dims(test, cfg, "test data");
    const sim::PilotMatrix pilot = sim::generate_pilot(test.sys, test.pilot_seed);
    std::vector<std::string> missing;
    ModelStore ms = load_models(cfg, missing);
    for (const auto& line : missing) warn(line);
    if (axis == "snr")
        eval_snr(cfg, view_of(ms, true), test, pilot);
    else if (axis == "labels")
        eval_labels(cfg, ms, test, pilot);
    else
        eval_grid(cfg, ms, test);
}

void cmd_similarity_study(const cfg::ExperimentConfig& cfg) {
    cfg.validate();
    const std::string& out = cfg.out;
    need_dataset(out, "data/contrastive", "run generate first");
    need_artifact(out, "models/clnet.meta", "run train --stage clnet first");
    need_artifact(out, "models/clnet.bin", "run train --stage clnet first");
    sim::Dataset ds = sim::load_dataset(join(out, "data/contrastive"));
    check_dims(ds, cfg, "contrastive data");
    num::ModelParams theta = num::load_params(join(out, "models/clnet"));
    const cl::CLNetArch arch = cfg.clnet_arch();
    const std::vector<std::pair<double, double>> bins = {
        {0, 2}, {2, 4}, {4, 6}, {6, 10}, {10, 20}, {20, 40}, {40, 70}, {70, 150}};
    cl::SimilarityCurve feat =
        cl::similarity_curve(ds, &theta, &arch, bins, cfg.similarity_pairs, cfg.seed);
    cl::SimilarityCurve raw =
        cl::similarity_curve(ds, nullptr, nullptr, bins, cfg.similarity_pairs, cfg.seed);

    fs::create_directories(join(out, "results"));
    std::vector<std::vector<std::string>> rows;
    std::vector<svg::Series> series(2);
    series[0].label = "raw";
    series[1].label = "features";
    for (size_t b = 0; b < bins.size(); ++b) {
        rows.push_back({csv::num_field(feat.bin_lo[b]), csv::num_field(feat.bin_hi[b]),
                        std::to_string(feat.count[b]), csv::num_field(raw.mean[b]),
                        csv::num_field(feat.mean[b])});
        const double mid = 0.5 * (feat.bin_lo[b] + feat.bin_hi[b]);
        series[0].x.push_back(mid);
        series[0].y.push_back(raw.mean[b]);
        series[1].x.push_back(mid);
        series[1].y.push_back(feat.mean[b]);
        say("bin [" + csv::num_field(feat.bin_lo[b]) + ", " + csv::num_field(feat.bin_hi[b]) +
            "): n=" + std::to_string(feat.count[b]) + " raw=" + csv::num_field(raw.mean[b]) +
            " features=" + csv::num_field(feat.mean[b]));
    }
    std::vector<std::string> rels;
    csv::write(join(out, "results/similarity.csv"),
               {"bin_lo", "bin_hi", "count", "raw_mean", "feature_mean"}, rows);
    rels.push_back("results/similarity.csv");
    svg::write_line_plot(join(out, "results/similarity.svg"), "Similarity vs distance",
                         "distance (m)", "standardized similarity", series);
    rels.push_back("results/similarity.svg");
    finish(out, rels);
}

}  // namespace muce::exp
