#include "muce/config.hpp"

#include <cmath>
#include <set>

#include "json.hpp"
#include "muce/errors.hpp"
#include "muce/io.hpp"

namespace muce::cfg {

using nlohmann::json;

namespace {

// Tracks which keys of one JSON object were consumed, so leftovers can be
// rejected by name.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j.is_object()) throw ConfigError("config: " + path_ + " must be an object");
    }

    template <typename T>
    void get(const char* key, T& target) {
        auto it = j_.find(key);
        if (it == j_.end()) return;
        seen_.insert(key);
        try {
            target = it->get<T>();
        } catch (const json::exception&) {
            throw ConfigError("config: " + at(key) + " has the wrong type");
        }
    }

    json sub(const char* key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? json::object() : *it;
    }

    std::string at(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

    ~Section() noexcept(false) {
        if (std::uncaught_exceptions()) return;
        for (auto& [k, v] : j_.items())
            if (!seen_.count(k)) throw ConfigError("config: unknown key " + at(k.c_str()));
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void positive(double v, const char* what) {
    if (!(v > 0)) throw ConfigError(std::string("config: ") + what + " must be positive");
}

void at_least(int64_t v, int64_t lo, const char* what) {
    if (v < lo)
        throw ConfigError(std::string("config: ") + what + " must be at least " +
                          std::to_string(lo));
}

}  // namespace

void ExperimentConfig::validate() const {
    if (out.empty()) throw ConfigError("config: out must not be empty");
    positive(area, "scene.area");
    at_least(n_scatterers, 1, "scene.n_scatterers");
    at_least(system.n_tx, 1, "system.n_tx");
    at_least(system.pilot_len, 1, "system.pilot_len");
    positive(system.wavelength, "system.wavelength");
    at_least(n_contrastive, 1, "data.n_contrastive");
    at_least(n_downstream, 1, "data.n_downstream");
    at_least(n_test, 1, "data.n_test");
    contrastive.validate();
    at_least(clnet_epochs, 0, "contrastive.epochs");
    positive(clnet_lr, "contrastive.lr");
    if (weight_decay < 0) throw ConfigError("config: weight_decay must be >= 0");
    at_least(feature_dim, 1, "network.feature_dim");
    at_least(dense_hidden, 1, "network.dense_hidden");
    at_least(q_max, 1, "downstream.q_max");
    at_least(dsnet_epochs, 0, "downstream.epochs");
    positive(dsnet_lr, "downstream.lr");
    at_least(group_batch, 1, "downstream.group_batch");
    joint.validate();
    at_least(joint_epochs, 0, "joint.epochs");
    at_least(retrain_epochs, 0, "joint.retrain_epochs");
    positive(joint_lr, "joint.lr");
    at_least(baseline_epochs, 0, "baselines.epochs");
    positive(baseline_lr, "baselines.lr");
    at_least(jomp_grid, 1, "baselines.jomp_grid");
    at_least(jomp_sparsity, 0, "baselines.jomp_sparsity");
    if (jomp_tol < 0) throw ConfigError("config: baselines.jomp_tol must be >= 0");
    at_least(k_users, 1, "eval.k_users");
    if (snr_axis.empty() || label_axis.empty() || pilot_axis.empty())
        throw ConfigError("config: eval axes must not be empty");
    for (double v : snr_axis)
        if (std::isnan(v)) throw ConfigError("config: eval.snr_axis entries must be numbers");
    for (int64_t v : label_axis) at_least(v, 1, "eval.label_axis entries");
    for (int64_t v : pilot_axis) at_least(v, 1, "eval.pilot_axis entries");
    // the architectures must be constructible
    clnet_arch().conv_lengths();
}

cl::CLNetArch ExperimentConfig::clnet_arch() const {
    cl::CLNetArch a;
    a.input_len = 2 * system.meas_dim();
    a.m = feature_dim;
    a.dense_hidden = dense_hidden;
    return a;
}

ExperimentConfig parse_config_text(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: not valid JSON: ") + e.what());
    }

    ExperimentConfig c;
    {
        Section root(j, "");
        root.get("seed", c.seed);
        root.get("out", c.out);
        root.get("weight_decay", c.weight_decay);
        {
            json s = root.sub("scene");
            Section sec(s, "scene");
            sec.get("area", c.area);
            sec.get("n_scatterers", c.n_scatterers);
        }
        {
            json s = root.sub("system");
            Section sec(s, "system");
            sec.get("n_tx", c.system.n_tx);
            sec.get("pilot_len", c.system.pilot_len);
            sec.get("wavelength", c.system.wavelength);
            sec.get("bs_x", c.system.bs.x);
            sec.get("bs_y", c.system.bs.y);
        }
        {
            json s = root.sub("data");
            Section sec(s, "data");
            sec.get("n_contrastive", c.n_contrastive);
            sec.get("n_downstream", c.n_downstream);
            sec.get("n_test", c.n_test);
            sec.get("snr_db", c.snr_db);
        }
        {
            json s = root.sub("contrastive");
            Section sec(s, "contrastive");
            sec.get("d", c.contrastive.d);
            sec.get("tau", c.contrastive.tau);
            sec.get("n_negatives", c.contrastive.n_negatives);
            sec.get("positive_cap", c.contrastive.positive_cap);
            sec.get("anchor_batch", c.contrastive.anchor_batch);
            sec.get("epochs", c.clnet_epochs);
            sec.get("lr", c.clnet_lr);
        }
        {
            json s = root.sub("network");
            Section sec(s, "network");
            sec.get("feature_dim", c.feature_dim);
            sec.get("dense_hidden", c.dense_hidden);
        }
        {
            json s = root.sub("downstream");
            Section sec(s, "downstream");
            sec.get("q_max", c.q_max);
            sec.get("epochs", c.dsnet_epochs);
            sec.get("lr", c.dsnet_lr);
            sec.get("group_batch", c.group_batch);
        }
        {
            json s = root.sub("joint");
            Section sec(s, "joint");
            sec.get("alpha", c.joint.alpha);
            sec.get("tau", c.joint.tau);
            sec.get("group_batch", c.joint.group_batch);
            sec.get("epochs", c.joint_epochs);
            sec.get("retrain_epochs", c.retrain_epochs);
            sec.get("lr", c.joint_lr);
        }
        {
            json s = root.sub("baselines");
            Section sec(s, "baselines");
            sec.get("epochs", c.baseline_epochs);
            sec.get("lr", c.baseline_lr);
            sec.get("jomp_grid", c.jomp_grid);
            sec.get("jomp_sparsity", c.jomp_sparsity);
            sec.get("jomp_tol", c.jomp_tol);
        }
        {
            json s = root.sub("eval");
            Section sec(s, "eval");
            sec.get("k_users", c.k_users);
            sec.get("snr_axis", c.snr_axis);
            sec.get("label_axis", c.label_axis);
            sec.get("pilot_axis", c.pilot_axis);
            sec.get("similarity_pairs", c.similarity_pairs);
        }
    }
    c.validate();
    return c;
}

ExperimentConfig parse_config(const std::string& path) {
    return parse_config_text(io::read_bytes(path));
}

}  // namespace muce::cfg
