#pragma once

#include <functional>
#include <vector>

#include "muce/tensor.hpp"

namespace muce::num {

// Reverse-mode autodiff tape. Nodes are appended in evaluation order, so the
// reverse sweep is a single backwards pass over the node array. A graph is
// built fresh for every training step and thrown away afterwards.
class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;             // backward closures capture `this`
    Graph& operator=(const Graph&) = delete;

    struct Node {
        Tensor val;
        Tensor grad;  // allocated on demand, same shape as val
        std::function<void()> back;
        bool requires_grad = false;
    };

    // Leaves. Inputs with requires_grad accumulate gradients during backward().
    int input(Tensor t, bool requires_grad = false);

    const Tensor& val(int id) const { return nodes_[size_t(id)].val; }
    Tensor& grad(int id);
    bool requires_grad(int id) const { return nodes_[size_t(id)].requires_grad; }
    size_t size() const { return nodes_.size(); }

    // Reverse sweep from a scalar node. Seeds its gradient with 1.
    void backward(int loss_id);

    // Layers.
    int dense(int x, int w, int b);                       // [B,n]·[out,n]ᵀ + b -> [B,out]
    int conv1d(int x, int w, int b, int stride, int pad); // [B,C,N], [OC,C,K] -> [B,OC,NO]
    int leaky_relu(int x, double slope);

    // Structure.
    int reshape(int x, Shape shape);
    int permute_flat(int x, std::vector<int64_t> map, Shape out_shape);  // out[i] = in[map[i]]
    int gather_rows(int x, std::vector<int64_t> rows);    // [N,m] -> [k,m]
    int concat(int a, int b);                             // 1-D concat

    // Elementwise / reductions.
    int add(int a, int b);
    int sub(int a, int b);
    int mul(int a, int b);
    int scale(int a, double c);
    int exp_(int a);
    int log_(int a);
    int sum(int a);                  // -> scalar
    int sum_sq_diff(int a, int b);   // Σ(a-b)² -> scalar
    int row_dot(int a, int b);       // [P,m],[P,m] -> [P]

    // Segmented ops over 1-D tensors; seg[i] in [0, nseg).
    int segment_sum(int x, std::vector<int64_t> seg, int64_t nseg);
    // Per-segment max treated as a constant (no gradient); used for log-sum-exp shifts.
    int segment_max_stopgrad(int x, std::vector<int64_t> seg, int64_t nseg);

    static int64_t conv1d_out_len(int64_t n, int64_t k, int64_t stride, int64_t pad);

private:
    std::vector<Node> nodes_;
    int push(Tensor val, bool requires_grad, std::function<void()> back);
};

}  // namespace muce::num
