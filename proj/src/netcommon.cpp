#include "muce/netcommon.hpp"

#include "muce/errors.hpp"

namespace muce::net {

std::vector<int64_t> conv_stack_lengths(int64_t in_len, const std::vector<ConvSpec>& specs) {
    std::vector<int64_t> out;
    int64_t n = in_len;
    for (size_t i = 0; i < specs.size(); ++i) {
        const ConvSpec& c = specs[i];
        if (n + 2 * c.p < c.k)
            throw ConfigError("conv stack: layer " + std::to_string(i) + " input length " +
                              std::to_string(n) + " too short for kernel " + std::to_string(c.k));
        n = num::Graph::conv1d_out_len(n, c.k, c.s, c.p);
        if (n < 1)
            throw ConfigError("conv stack: layer " + std::to_string(i) + " output length " +
                              std::to_string(n));
        out.push_back(n);
    }
    return out;
}

void init_conv_stack(num::ModelParams& params, const std::string& prefix,
                     const std::vector<ConvSpec>& specs, Rng& rng) {
    int64_t in_ch = 1;
    for (size_t i = 0; i < specs.size(); ++i) {
        const ConvSpec& c = specs[i];
        const std::string base = prefix + "conv" + std::to_string(i);
        params.add(base + ".w", num::init_uniform(rng, {c.ch, in_ch, c.k}, in_ch * c.k));
        params.add(base + ".b", num::init_uniform(rng, {c.ch}, in_ch * c.k));
        in_ch = c.ch;
    }
}

void init_dense(num::ModelParams& params, const std::string& name, int64_t out, int64_t in,
                Rng& rng) {
    params.add(name + ".w", num::init_uniform(rng, {out, in}, in));
    params.add(name + ".b", num::init_uniform(rng, {out}, in));
}

GraphParams GraphParams::attach(num::Graph& g, const num::ModelParams& p, bool requires_grad) {
    GraphParams gp;
    gp.g = &g;
    gp.params = &p;
    gp.ids.reserve(p.count());
    for (size_t i = 0; i < p.count(); ++i) gp.ids.push_back(g.input(p.tensor(i), requires_grad));
    return gp;
}

int GraphParams::id(const std::string& name) const {
    for (size_t i = 0; i < params->count(); ++i)
        if (params->name(i) == name) return ids[i];
    throw ConfigError("GraphParams: unknown parameter " + name);
}

std::vector<num::Tensor> GraphParams::grads() const {
    std::vector<num::Tensor> out;
    out.reserve(ids.size());
    for (size_t i = 0; i < ids.size(); ++i) {
        num::Tensor& gr = g->grad(ids[i]);
        out.push_back(gr);
    }
    return out;
}

int forward_conv_stack(num::Graph& g, const GraphParams& gp, const std::string& prefix, int x,
                       const std::vector<ConvSpec>& specs, double slope) {
    int h = x;
    for (size_t i = 0; i < specs.size(); ++i) {
        const std::string base = prefix + "conv" + std::to_string(i);
        h = g.conv1d(h, gp.id(base + ".w"), gp.id(base + ".b"), int(specs[i].s), int(specs[i].p));
        h = g.leaky_relu(h, slope);
    }
    return h;
}

}  // namespace muce::net
