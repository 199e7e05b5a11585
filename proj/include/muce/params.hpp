#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "muce/rng.hpp"
#include "muce/tensor.hpp"

namespace muce::num {

// Named parameter tensors in a fixed registration order. The order defines the
// layout of saved files and of the gradient vectors fed to the optimizer.
class ModelParams {
public:
    void add(const std::string& name, Tensor t);
    bool has(const std::string& name) const;
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;

    size_t count() const { return items_.size(); }
    const std::string& name(size_t i) const { return items_[i].first; }
    Tensor& tensor(size_t i) { return items_[i].second; }
    const Tensor& tensor(size_t i) const { return items_[i].second; }

    bool all_finite() const;
    int64_t total_size() const;

private:
    std::vector<std::pair<std::string, Tensor>> items_;
};

// Uniform init on ±sqrt(1/fan_in), filled in row-major order from `rng`.
Tensor init_uniform(Rng& rng, const Shape& shape, int64_t fan_in);

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

// Adam with decoupled weight decay:
//   theta <- theta*(1 - lr*wd) - lr * mhat / (sqrt(vhat) + eps)
class AdamState {
public:
    void init(const ModelParams& params);
    void update(ModelParams& params, const std::vector<Tensor>& grads, const AdamConfig& cfg);
    int64_t step() const { return step_; }

private:
    int64_t step_ = 0;
    std::vector<Tensor> m_, v_;
};

// Bit-exact model round-trip: <stem>.meta (text header) + <stem>.bin (raw
// little-endian float64 payload, with an FNV-1a hash recorded in the header).
void save_params(const ModelParams& params, const std::string& stem);
ModelParams load_params(const std::string& stem);

}  // namespace muce::num
