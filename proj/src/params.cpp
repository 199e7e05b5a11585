#include "muce/params.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "muce/errors.hpp"

namespace muce::num {

void ModelParams::add(const std::string& name, Tensor t) {
    if (name.empty() || name.find_first_of(" \t\n") != std::string::npos)
        throw ConfigError("parameter name must be non-empty and free of whitespace: '" + name + "'");
    if (has(name)) throw ConfigError("duplicate parameter name: " + name);
    items_.emplace_back(name, std::move(t));
}

bool ModelParams::has(const std::string& name) const {
    for (const auto& [n, t] : items_)
        if (n == name) return true;
    return false;
}

Tensor& ModelParams::at(const std::string& name) {
    for (auto& [n, t] : items_)
        if (n == name) return t;
    throw ConfigError("unknown parameter: " + name);
}

const Tensor& ModelParams::at(const std::string& name) const {
    for (const auto& [n, t] : items_)
        if (n == name) return t;
    throw ConfigError("unknown parameter: " + name);
}

bool ModelParams::all_finite() const {
    for (const auto& [n, t] : items_)
        if (!t.all_finite()) return false;
    return true;
}

int64_t ModelParams::total_size() const {
    int64_t total = 0;
    for (const auto& [n, t] : items_) total += t.size();
    return total;
}

Tensor init_uniform(Rng& rng, const Shape& shape, int64_t fan_in) {
    if (fan_in < 1) throw ConfigError("init_uniform: fan_in must be positive");
    const double limit = std::sqrt(1.0 / double(fan_in));
    Tensor t = Tensor::zeros(shape);
    for (double& e : t.v) e = rng.uniform(-limit, limit);
    return t;
}

void AdamState::init(const ModelParams& params) {
    step_ = 0;
    m_.clear();
    v_.clear();
    for (size_t i = 0; i < params.count(); ++i) {
        m_.push_back(Tensor::zeros(params.tensor(i).shape));
        v_.push_back(Tensor::zeros(params.tensor(i).shape));
    }
}

void AdamState::update(ModelParams& params, const std::vector<Tensor>& grads,
                       const AdamConfig& cfg) {
    if (m_.size() != params.count())
        throw ConfigError("AdamState: not initialised for this parameter set");
    if (grads.size() != params.count())
        throw DimensionError("AdamState: gradient count does not match parameter count");
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg.beta1, double(step_));
    const double bc2 = 1.0 - std::pow(cfg.beta2, double(step_));
    for (size_t p = 0; p < params.count(); ++p) {
        Tensor& t = params.tensor(p);
        const Tensor& g = grads[p];
        if (!t.same_shape(g))
            throw DimensionError("AdamState: gradient shape mismatch for " + params.name(p));
        double* tv = t.data();
        const double* gv = g.data();
        double* mv = m_[p].data();
        double* vv = v_[p].data();
        const size_t n = t.v.size();
        for (size_t i = 0; i < n; ++i) {
            mv[i] = cfg.beta1 * mv[i] + (1.0 - cfg.beta1) * gv[i];
            vv[i] = cfg.beta2 * vv[i] + (1.0 - cfg.beta2) * gv[i] * gv[i];
            const double mhat = mv[i] / bc1;
            const double vhat = vv[i] / bc2;
            tv[i] = tv[i] * (1.0 - cfg.lr * cfg.weight_decay) -
                    cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

void save_params(const ModelParams& params, const std::string& stem) {
    std::string payload;
    for (size_t i = 0; i < params.count(); ++i) {
        const Tensor& t = params.tensor(i);
        const size_t off = payload.size();
        payload.resize(off + t.v.size() * sizeof(double));
        std::memcpy(payload.data() + off, t.v.data(), t.v.size() * sizeof(double));
    }
    const uint64_t hash = fnv1a64(payload.data(), payload.size());

    std::ostringstream meta;
    meta << "muce_model 1\n";
    meta << "tensors " << params.count() << "\n";
    for (size_t i = 0; i < params.count(); ++i) {
        const Tensor& t = params.tensor(i);
        meta << "tensor " << params.name(i) << " " << t.rank();
        for (int64_t d : t.shape) meta << " " << d;
        meta << "\n";
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", (unsigned long long)hash);
    meta << "payload_fnv1a64 " << hex << "\n";

    {
        std::ofstream f(stem + ".meta", std::ios::binary | std::ios::trunc);
        if (!f) throw IoError(stem + ".meta", "cannot open for writing");
        f << meta.str();
        if (!f) throw IoError(stem + ".meta", "write failed");
    }
    {
        std::ofstream f(stem + ".bin", std::ios::binary | std::ios::trunc);
        if (!f) throw IoError(stem + ".bin", "cannot open for writing");
        f.write(payload.data(), std::streamsize(payload.size()));
        if (!f) throw IoError(stem + ".bin", "write failed");
    }
}

ModelParams load_params(const std::string& stem) {
    std::ifstream mf(stem + ".meta", std::ios::binary);
    if (!mf) throw IoError(stem + ".meta", "cannot open");
    std::string word;
    int version = 0;
    if (!(mf >> word >> version) || word != "muce_model" || version != 1)
        throw IoError(stem + ".meta", "not a model file (bad magic)");
    size_t count = 0;
    if (!(mf >> word >> count) || word != "tensors")
        throw IoError(stem + ".meta", "malformed header: expected tensor count");

    ModelParams params;
    for (size_t i = 0; i < count; ++i) {
        std::string name;
        int64_t rank = 0;
        if (!(mf >> word >> name >> rank) || word != "tensor" || rank < 1)
            throw IoError(stem + ".meta", "malformed tensor entry");
        Shape shape(static_cast<size_t>(rank));
        for (int64_t& d : shape)
            if (!(mf >> d)) throw IoError(stem + ".meta", "malformed tensor shape");
        params.add(name, Tensor::zeros(shape));
    }
    std::string hex;
    if (!(mf >> word >> hex) || word != "payload_fnv1a64" || hex.size() != 16)
        throw IoError(stem + ".meta", "malformed payload hash");
    const uint64_t expect = std::stoull(hex, nullptr, 16);

    std::ifstream bf(stem + ".bin", std::ios::binary);
    if (!bf) throw IoError(stem + ".bin", "cannot open");
    std::string payload((std::istreambuf_iterator<char>(bf)), std::istreambuf_iterator<char>());
    if (int64_t(payload.size()) != params.total_size() * int64_t(sizeof(double)))
        throw IoError(stem + ".bin", "payload size does not match header");
    if (fnv1a64(payload.data(), payload.size()) != expect)
        throw IoError(stem + ".bin", "payload hash mismatch (corrupt file)");

    size_t off = 0;
    for (size_t i = 0; i < params.count(); ++i) {
        Tensor& t = params.tensor(i);
        std::memcpy(t.v.data(), payload.data() + off, t.v.size() * sizeof(double));
        off += t.v.size() * sizeof(double);
    }
    return params;
}

}  // namespace muce::num
