#pragma once

#include <string>
#include <vector>

#include "muce/graph.hpp"
#include "muce/params.hpp"

namespace muce::net {

struct ConvSpec {
    int64_t k, s, p, ch;
};

// Output lengths of a conv stack applied to a 1-channel signal of length
// in_len; throws ConfigError if any stage collapses below length 1.
std::vector<int64_t> conv_stack_lengths(int64_t in_len, const std::vector<ConvSpec>& specs);

// Registers weights for the stack under "<prefix>conv<i>.w/.b", fan_in = in_ch*k.
void init_conv_stack(num::ModelParams& params, const std::string& prefix,
                     const std::vector<ConvSpec>& specs, Rng& rng);
void init_dense(num::ModelParams& params, const std::string& name, int64_t out, int64_t in,
                Rng& rng);

// Binds a ModelParams to graph leaves in registration order.
struct GraphParams {
    num::Graph* g = nullptr;
    const num::ModelParams* params = nullptr;
    std::vector<int> ids;

    static GraphParams attach(num::Graph& g, const num::ModelParams& p, bool requires_grad);
    int id(const std::string& name) const;
    // Gradients in registration order (zeros for parameters the loss never touched).
    std::vector<num::Tensor> grads() const;
};

// x: [B, 1, N] node; applies conv+LeakyReLU for each spec. Returns [B, ch_last, N_last].
int forward_conv_stack(num::Graph& g, const GraphParams& gp, const std::string& prefix, int x,
                       const std::vector<ConvSpec>& specs, double slope = 0.01);

}  // namespace muce::net
