#include "muce/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "muce/errors.hpp"
#include "muce/parallel.hpp"

namespace muce::num {

namespace {

// C[m,n] += sum_k A[m,k] * B[n,k]
void gemm_abT(const double* A, const double* B, double* C, int64_t M, int64_t N, int64_t K) {
    parallel_for(M, [&](int64_t m0, int64_t m1) {
        for (int64_t m = m0; m < m1; ++m) {
            const double* a = A + m * K;
            double* c = C + m * N;
            for (int64_t n = 0; n < N; ++n) {
                const double* b = B + n * K;
                double acc = 0.0;
                for (int64_t k = 0; k < K; ++k) acc += a[k] * b[k];
                c[n] += acc;
            }
        }
    });
}

// C[m,n] += sum_k A[m,k] * B[k,n]
void gemm_ab(const double* A, const double* B, double* C, int64_t M, int64_t N, int64_t K) {
    parallel_for(M, [&](int64_t m0, int64_t m1) {
        for (int64_t m = m0; m < m1; ++m) {
            const double* a = A + m * K;
            double* c = C + m * N;
            for (int64_t k = 0; k < K; ++k) {
                const double av = a[k];
                if (av == 0.0) continue;
                const double* b = B + k * N;
                for (int64_t n = 0; n < N; ++n) c[n] += av * b[n];
            }
        }
    });
}

// C[k,n] += sum_m A[m,k] * B[m,n]   (A is [M,K], traversed transposed)
void gemm_aTb(const double* A, const double* B, double* C, int64_t M, int64_t N, int64_t K) {
    parallel_for(K, [&](int64_t k0, int64_t k1) {
        for (int64_t m = 0; m < M; ++m) {
            const double* a = A + m * K;
            const double* b = B + m * N;
            for (int64_t k = k0; k < k1; ++k) {
                const double av = a[k];
                if (av == 0.0) continue;
                double* c = C + k * N;
                for (int64_t n = 0; n < N; ++n) c[n] += av * b[n];
            }
        }
    });
}

}  // namespace

int Graph::push(Tensor val, bool requires_grad, std::function<void()> back) {
    Node n;
    n.val = std::move(val);
    n.requires_grad = requires_grad;
    n.back = requires_grad ? std::move(back) : nullptr;
    nodes_.push_back(std::move(n));
    return int(nodes_.size()) - 1;
}

int Graph::input(Tensor t, bool requires_grad) {
    return push(std::move(t), requires_grad, nullptr);
}

Tensor& Graph::grad(int id) {
    Node& n = nodes_[size_t(id)];
    if (n.grad.v.empty()) n.grad = Tensor::zeros(n.val.shape);
    return n.grad;
}

void Graph::backward(int loss_id) {
    if (loss_id < 0 || size_t(loss_id) >= nodes_.size())
        throw DimensionError("backward: node id out of range");
    Node& loss = nodes_[size_t(loss_id)];
    if (loss.val.size() != 1)
        throw UsageError("backward: loss must be a scalar, got shape " + shape_str(loss.val.shape));
    grad(loss_id).v[0] = 1.0;
    for (int i = loss_id; i >= 0; --i) {
        Node& n = nodes_[size_t(i)];
        if (n.back && !n.grad.v.empty()) n.back();
    }
}

int Graph::dense(int x, int w, int b) {
    const Tensor& xv = val(x);
    const Tensor& wv = val(w);
    const Tensor& bv = val(b);
    if (xv.rank() != 2 || wv.rank() != 2 || bv.rank() != 1)
        throw DimensionError("dense: expected x[B,n], w[out,n], b[out]");
    const int64_t B = xv.shape[0], n = xv.shape[1], out = wv.shape[0];
    if (wv.shape[1] != n || bv.shape[0] != out)
        throw DimensionError("dense: shape mismatch x" + shape_str(xv.shape) + " w" +
                             shape_str(wv.shape) + " b" + shape_str(bv.shape));
    Tensor y = Tensor::zeros({B, out});
    gemm_abT(xv.data(), wv.data(), y.data(), B, out, n);
    for (int64_t i = 0; i < B; ++i)
        for (int64_t o = 0; o < out; ++o) y.v[size_t(i * out + o)] += bv.v[size_t(o)];

    bool rg = requires_grad(x) || requires_grad(w) || requires_grad(b);
    int id = push(std::move(y), rg, nullptr);
    if (!rg) return id;
    nodes_[size_t(id)].back = [this, id, x, w, b, B, n, out]() {
        const double* gy = nodes_[size_t(id)].grad.data();
        if (nodes_[size_t(x)].requires_grad)
            gemm_ab(gy, nodes_[size_t(w)].val.data(), grad(x).data(), B, n, out);
        if (nodes_[size_t(w)].requires_grad)
            gemm_aTb(gy, nodes_[size_t(x)].val.data(), grad(w).data(), B, n, out);
        if (nodes_[size_t(b)].requires_grad) {
            double* gb = grad(b).data();
            for (int64_t i = 0; i < B; ++i)
                for (int64_t o = 0; o < out; ++o) gb[o] += gy[i * out + o];
        }
    };
    return id;
}

int64_t Graph::conv1d_out_len(int64_t n, int64_t k, int64_t stride, int64_t pad) {
    if (n < 1 || k < 1 || stride < 1 || pad < 0)
        throw ConfigError("conv1d: need n>=1, k>=1, stride>=1, pad>=0");
    return (n + 2 * pad - k) / stride + 1;
}

int Graph::conv1d(int x, int w, int b, int stride, int pad) {
    const Tensor& xv = val(x);
    const Tensor& wv = val(w);
    const Tensor& bv = val(b);
    if (xv.rank() != 3 || wv.rank() != 3 || bv.rank() != 1)
        throw DimensionError("conv1d: expected x[B,C,N], w[OC,C,K], b[OC]");
    const int64_t B = xv.shape[0], C = xv.shape[1], N = xv.shape[2];
    const int64_t OC = wv.shape[0], K = wv.shape[2];
    if (wv.shape[1] != C || bv.shape[0] != OC)
        throw DimensionError("conv1d: shape mismatch x" + shape_str(xv.shape) + " w" +
                             shape_str(wv.shape) + " b" + shape_str(bv.shape));
    const int64_t NO = conv1d_out_len(N, K, stride, pad);
    if (NO < 1)
        throw ConfigError("conv1d: output length " + std::to_string(NO) + " < 1 for input length " +
                          std::to_string(N) + ", kernel " + std::to_string(K));

    // Valid kernel range per output position, so the inner loops never branch.
    std::vector<int64_t> klo(static_cast<size_t>(NO)), khi(static_cast<size_t>(NO));
    for (int64_t t = 0; t < NO; ++t) {
        const int64_t base = t * stride - pad;
        klo[size_t(t)] = std::max<int64_t>(0, -base);
        khi[size_t(t)] = std::min<int64_t>(K, N - base);
    }

    Tensor y = Tensor::zeros({B, OC, NO});
    parallel_for(B, [&](int64_t b0, int64_t b1) {
        for (int64_t bi = b0; bi < b1; ++bi) {
            const double* xb = xv.data() + bi * C * N;
            double* yb = y.data() + bi * OC * NO;
            for (int64_t oc = 0; oc < OC; ++oc) {
                const double* woc = wv.data() + oc * C * K;
                double* yrow = yb + oc * NO;
                for (int64_t t = 0; t < NO; ++t) {
                    const int64_t base = t * stride - pad;
                    double acc = bv.v[size_t(oc)];
                    for (int64_t c = 0; c < C; ++c) {
                        const double* xc = xb + c * N + base;
                        const double* wc = woc + c * K;
                        for (int64_t k = klo[size_t(t)]; k < khi[size_t(t)]; ++k)
                            acc += xc[k] * wc[k];
                    }
                    yrow[t] = acc;
                }
            }
        }
    });

    bool rg = requires_grad(x) || requires_grad(w) || requires_grad(b);
    int id = push(std::move(y), rg, nullptr);
    if (!rg) return id;
    nodes_[size_t(id)].back = [this, id, x, w, b, B, C, N, OC, K, NO, stride, pad, klo, khi]() {
        const double* gy = nodes_[size_t(id)].grad.data();
        const Tensor& xv2 = nodes_[size_t(x)].val;
        const Tensor& wv2 = nodes_[size_t(w)].val;
        if (nodes_[size_t(x)].requires_grad) {
            double* gx = grad(x).data();
            parallel_for(B, [&](int64_t b0, int64_t b1) {
                for (int64_t bi = b0; bi < b1; ++bi) {
                    double* gxb = gx + bi * C * N;
                    const double* gyb = gy + bi * OC * NO;
                    for (int64_t oc = 0; oc < OC; ++oc) {
                        const double* woc = wv2.data() + oc * C * K;
                        const double* gyrow = gyb + oc * NO;
                        for (int64_t t = 0; t < NO; ++t) {
                            const double g = gyrow[t];
                            if (g == 0.0) continue;
                            const int64_t base = t * stride - pad;
                            for (int64_t c = 0; c < C; ++c) {
                                double* gxc = gxb + c * N + base;
                                const double* wc = woc + c * K;
                                for (int64_t k = klo[size_t(t)]; k < khi[size_t(t)]; ++k)
                                    gxc[k] += g * wc[k];
                            }
                        }
                    }
                }
            });
        }
        if (nodes_[size_t(w)].requires_grad) {
            double* gw = grad(w).data();
            parallel_for(OC, [&](int64_t o0, int64_t o1) {
                for (int64_t oc = o0; oc < o1; ++oc) {
                    double* gwoc = gw + oc * C * K;
                    for (int64_t bi = 0; bi < B; ++bi) {
                        const double* xb = xv2.data() + bi * C * N;
                        const double* gyrow = gy + (bi * OC + oc) * NO;
                        for (int64_t t = 0; t < NO; ++t) {
                            const double g = gyrow[t];
                            if (g == 0.0) continue;
                            const int64_t base = t * stride - pad;
                            for (int64_t c = 0; c < C; ++c) {
                                const double* xc = xb + c * N + base;
                                double* gwc = gwoc + c * K;
                                for (int64_t k = klo[size_t(t)]; k < khi[size_t(t)]; ++k)
                                    gwc[k] += g * xc[k];
                            }
                        }
                    }
                }
            });
        }
        if (nodes_[size_t(b)].requires_grad) {
            double* gb = grad(b).data();
            for (int64_t bi = 0; bi < B; ++bi)
                for (int64_t oc = 0; oc < OC; ++oc) {
                    const double* gyrow = gy + (bi * OC + oc) * NO;
                    for (int64_t t = 0; t < NO; ++t) gb[oc] += gyrow[t];
                }
        }
    };
    return id;
}

int Graph::leaky_relu(int x, double slope) {
    const Tensor& xv = val(x);
    Tensor y = xv;
    for (double& e : y.v)
        if (e < 0.0) e *= slope;
    bool rg = requires_grad(x);
    int id = push(std::move(y), rg, nullptr);
    if (!rg) return id;
    nodes_[size_t(id)].back = [this, id, x, slope]() {
        const Tensor& xv2 = nodes_[size_t(x)].val;
        const double* gy = nodes_[size_t(id)].grad.data();
        double* gx = grad(x).data();
        const size_t n = xv2.v.size();
        for (size_t i = 0; i < n; ++i) gx[i] += gy[i] * (xv2.v[i] >= 0.0 ? 1.0 : slope);
    };
    return id;
}

int Graph::reshape(int x, Shape shape) {
    const Tensor& xv = val(x);
    if (shape_size(shape) != xv.size())
        throw DimensionError("reshape: " + shape_str(xv.shape) + " -> " + shape_str(shape) +
                             " changes element count");
    Tensor y = xv;
    y.shape = shape;
    bool rg = requires_grad(x);
    int id = push(std::move(y), rg, nullptr);
    if (!rg) return id;
    nodes_[size_t(id)].back = [this, id, x]() {
        const double* gy = nodes_[size_t(id)].grad.data();
        double* gx = grad(x).data();
        const size_t n = nodes_[size_t(x)].val.v.size();
        for (size_t i = 0; i < n; ++i) gx[i] += gy[i];
    };
    return id;
}

int Graph::permute_flat(int x, std::vector<int64_t> map, Shape out_shape) {
    const Tensor& xv = val(x);
    if (int64_t(map.size()) != shape_size(out_shape))
        throw DimensionError("permute_flat: map size does not match output shape");
    for (int64_t m : map)
        if (m < 0 || m >= xv.size())
            throw DimensionError("permute_flat: map index out of range");
    Tensor y = Tensor::zeros(out_shape);
    for (size_t i = 0; i < map.size(); ++i) y.v[i] = xv.v[size_t(map[i])];
    bool rg = requires_grad(x);
    int id = push(std::move(y), rg, nullptr);
    if (!rg) return id;
    nodes_[size_t(id)].back = [this, id, x, map = std::move(map)]() {
        const double* gy = nodes_[size_t(id)].grad.data();
        double* gx = grad(x).data();
        for (size_t i = 0; i < map.size(); ++i) gx[size_t(map[i])] += gy[i];
    };
    return id;
}

int Graph::gather_rows(int x, std::vector<int64_t> rows) {
    const Tensor& xv = val(x);
    if (xv.rank() != 2) throw DimensionError("gather_rows: expected a rank-2 tensor");
    const int64_t N = xv.shape[0], m = xv.shape[1];
    for (int64_t r : rows)
        if (r < 0 || r >= N) throw DimensionError("gather_rows: row index out of range");
    Tensor y = Tensor::zeros({int64_t(rows.size()), m});
    for (size_t i = 0; i < rows.size(); ++i)
        std::copy_n(xv.data() + rows[i] * m, size_t(m), y.data() + int64_t(i) * m);
    bool rg = requires_grad(x);
    int id = push(std::move(y), rg, nullptr);
    if (!rg) return id;
    nodes_[size_t(id)].back = [this, id, x, m, rows = std::move(rows)]() {
        const double* gy = nodes_[size_t(id)].grad.data();
        double* gx = grad(x).data();
        for (size_t i = 0; i < rows.size(); ++i) {
            double* dst = gx + rows[i] * m;
            const double* src = gy + int64_t(i) * m;
            for (int64_t j = 0; j < m; ++j) dst[j] += src[j];
        }
    };
    return id;
}

int Graph::concat(int a, int b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    if (av.rank() != 1 || bv.rank() != 1) throw DimensionError("concat: expected rank-1 tensors");
    Tensor y = Tensor::zeros({av.size() + bv.size()});
    std::copy(av.v.begin(), av.v.end(), y.v.begin());
    std::copy(bv.v.begin(), bv.v.end(), y.v.begin() + av.size());
    const int64_t na = av.size();  // before push: node storage may reallocate
    bool rg = requires_grad(a) || requires_grad(b);
    int id = push(std::move(y), rg, nullptr);
    if (!rg) return id;
    nodes_[size_t(id)].back = [this, id, a, b, na]() {
        const double* gy = nodes_[size_t(id)].grad.data();
        if (nodes_[size_t(a)].requires_grad) {
            double* ga = grad(a).data();
            for (int64_t i = 0; i < na; ++i) ga[i] += gy[i];
        }
        if (nodes_[size_t(b)].requires_grad) {
            double* gb = grad(b).data();
            const int64_t nb = nodes_[size_t(b)].val.size();
            for (int64_t i = 0; i < nb; ++i) gb[i] += gy[na + i];
        }
    };
    return id;
}

namespace {
void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape) + " vs " +
                             shape_str(b.shape));
}
}  // namespace

int Graph::add(int a, int b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    require_same_shape(av, bv, "add");
    Tensor y = av;
    for (size_t i = 0; i < y.v.size(); ++i) y.v[i] += bv.v[i];
    bool rg = requires_grad(a) || requires_grad(b);
    int id = push(std::move(y), rg, nullptr);
    if (!rg) return id;
    nodes_[size_t(id)].back = [this, id, a, b]() {
        const double* gy = nodes_[size_t(id)].grad.data();
        const size_t n = nodes_[size_t(id)].val.v.size();
        if (nodes_[size_t(a)].requires_grad) {
            double* ga = grad(a).data();
            for (size_t i = 0; i < n; ++i) ga[i] += gy[i];
        }
        if (nodes_[size_t(b)].requires_grad) {
            double* gb = grad(b).data();
            for (size_t i = 0; i < n; ++i) gb[i] += gy[i];
        }
    };
    return id;
}

int Graph::sub(int a, int b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    require_same_shape(av, bv, "sub");
    Tensor y = av;
    for (size_t i = 0; i < y.v.size(); ++i) y.v[i] -= bv.v[i];
    bool rg = requires_grad(a) || requires_grad(b);
    int id = push(std::move(y), rg, nullptr);
    if (!rg) return id;
    nodes_[size_t(id)].back = [this, id, a, b]() {
        const double* gy = nodes_[size_t(id)].grad.data();
        const size_t n = nodes_[size_t(id)].val.v.size();
        if (nodes_[size_t(a)].requires_grad) {
            double* ga = grad(a).data();
            for (size_t i = 0; i < n; ++i) ga[i] += gy[i];
        }
        if (nodes_[size_t(b)].requires_grad) {
            double* gb = grad(b).data();
            for (size_t i = 0; i < n; ++i) gb[i] -= gy[i];
        }
    };
    return id;
}

int Graph::mul(int a, int b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    require_same_shape(av, bv, "mul");
    Tensor y = av;
    for (size_t i = 0; i < y.v.size(); ++i) y.v[i] *= bv.v[i];
    bool rg = requires_grad(a) || requires_grad(b);
    int id = push(std::move(y), rg, nullptr);
    if (!rg) return id;
    nodes_[size_t(id)].back = [this, id, a, b]() {
        const double* gy = nodes_[size_t(id)].grad.data();
        const size_t n = nodes_[size_t(id)].val.v.size();
        if (nodes_[size_t(a)].requires_grad) {
            double* ga = grad(a).data();
            const double* bvv = nodes_[size_t(b)].val.data();
            for (size_t i = 0; i < n; ++i) ga[i] += gy[i] * bvv[i];
        }
        if (nodes_[size_t(b)].requires_grad) {
            double* gb = grad(b).data();
            const double* avv = nodes_[size_t(a)].val.data();
            for (size_t i = 0; i < n; ++i) gb[i] += gy[i] * avv[i];
        }
    };
    return id;
}

int Graph::scale(int a, double c) {
    Tensor y = val(a);
    for (double& e : y.v) e *= c;
    bool rg = requires_grad(a);
    int id = push(std::move(y), rg, nullptr);
    if (!rg) return id;
    nodes_[size_t(id)].back = [this, id, a, c]() {
        const double* gy = nodes_[size_t(id)].grad.data();
        double* ga = grad(a).data();
        const size_t n = nodes_[size_t(id)].val.v.size();
        for (size_t i = 0; i < n; ++i) ga[i] += gy[i] * c;
    };
    return id;
}

int Graph::exp_(int a) {
    Tensor y = val(a);
    for (double& e : y.v) e = std::exp(e);
    bool rg = requires_grad(a);
    int id = push(std::move(y), rg, nullptr);
    if (!rg) return id;
    nodes_[size_t(id)].back = [this, id, a]() {
        const Tensor& yv = nodes_[size_t(id)].val;
        const double* gy = nodes_[size_t(id)].grad.data();
        double* ga = grad(a).data();
        for (size_t i = 0; i < yv.v.size(); ++i) ga[i] += gy[i] * yv.v[i];
    };
    return id;
}

int Graph::log_(int a) {
    const Tensor& av = val(a);
    for (double e : av.v)
        if (!(e > 0.0)) throw DomainError("log: input must be strictly positive");
    Tensor y = av;
    for (double& e : y.v) e = std::log(e);
    bool rg = requires_grad(a);
    int id = push(std::move(y), rg, nullptr);
    if (!rg) return id;
    nodes_[size_t(id)].back = [this, id, a]() {
        const Tensor& av2 = nodes_[size_t(a)].val;
        const double* gy = nodes_[size_t(id)].grad.data();
        double* ga = grad(a).data();
        for (size_t i = 0; i < av2.v.size(); ++i) ga[i] += gy[i] / av2.v[i];
    };
    return id;
}

int Graph::sum(int a) {
    const Tensor& av = val(a);
    double acc = 0.0;
    for (double e : av.v) acc += e;
    bool rg = requires_grad(a);
    int id = push(Tensor::scalar(acc), rg, nullptr);
    if (!rg) return id;
    nodes_[size_t(id)].back = [this, id, a]() {
        const double g = nodes_[size_t(id)].grad.v[0];
        double* ga = grad(a).data();
        const size_t n = nodes_[size_t(a)].val.v.size();
        for (size_t i = 0; i < n; ++i) ga[i] += g;
    };
    return id;
}

int Graph::sum_sq_diff(int a, int b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    require_same_shape(av, bv, "sum_sq_diff");
    double acc = 0.0;
    for (size_t i = 0; i < av.v.size(); ++i) {
        const double d = av.v[i] - bv.v[i];
        acc += d * d;
    }
    bool rg = requires_grad(a) || requires_grad(b);
    int id = push(Tensor::scalar(acc), rg, nullptr);
    if (!rg) return id;
    nodes_[size_t(id)].back = [this, id, a, b]() {
        const double g = nodes_[size_t(id)].grad.v[0];
        const Tensor& av2 = nodes_[size_t(a)].val;
        const Tensor& bv2 = nodes_[size_t(b)].val;
        const size_t n = av2.v.size();
        if (nodes_[size_t(a)].requires_grad) {
            double* ga = grad(a).data();
            for (size_t i = 0; i < n; ++i) ga[i] += 2.0 * g * (av2.v[i] - bv2.v[i]);
        }
        if (nodes_[size_t(b)].requires_grad) {
            double* gb = grad(b).data();
            for (size_t i = 0; i < n; ++i) gb[i] -= 2.0 * g * (av2.v[i] - bv2.v[i]);
        }
    };
    return id;
}

int Graph::row_dot(int a, int b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    if (av.rank() != 2 || bv.rank() != 2) throw DimensionError("row_dot: expected rank-2 tensors");
    require_same_shape(av, bv, "row_dot");
    const int64_t P = av.shape[0], m = av.shape[1];
    Tensor y = Tensor::zeros({P});
    for (int64_t p = 0; p < P; ++p) {
        const double* ar = av.data() + p * m;
        const double* br = bv.data() + p * m;
        double acc = 0.0;
        for (int64_t j = 0; j < m; ++j) acc += ar[j] * br[j];
        y.v[size_t(p)] = acc;
    }
    bool rg = requires_grad(a) || requires_grad(b);
    int id = push(std::move(y), rg, nullptr);
    if (!rg) return id;
    nodes_[size_t(id)].back = [this, id, a, b, P, m]() {
        const double* gy = nodes_[size_t(id)].grad.data();
        const Tensor& av2 = nodes_[size_t(a)].val;
        const Tensor& bv2 = nodes_[size_t(b)].val;
        if (nodes_[size_t(a)].requires_grad) {
            double* ga = grad(a).data();
            for (int64_t p = 0; p < P; ++p) {
                const double g = gy[p];
                const double* br = bv2.data() + p * m;
                double* gr = ga + p * m;
                for (int64_t j = 0; j < m; ++j) gr[j] += g * br[j];
            }
        }
        if (nodes_[size_t(b)].requires_grad) {
            double* gb = grad(b).data();
            for (int64_t p = 0; p < P; ++p) {
                const double g = gy[p];
                const double* ar = av2.data() + p * m;
                double* gr = gb + p * m;
                for (int64_t j = 0; j < m; ++j) gr[j] += g * ar[j];
            }
        }
    };
    return id;
}

namespace {
void check_segments(const Tensor& xv, const std::vector<int64_t>& seg, int64_t nseg, const char* op) {
    if (xv.rank() != 1) throw DimensionError(std::string(op) + ": expected a rank-1 tensor");
    if (int64_t(seg.size()) != xv.size())
        throw DimensionError(std::string(op) + ": segment map size does not match input");
    if (nseg < 1) throw ConfigError(std::string(op) + ": need at least one segment");
    for (int64_t s : seg)
        if (s < 0 || s >= nseg) throw DimensionError(std::string(op) + ": segment id out of range");
}
}  // namespace

int Graph::segment_sum(int x, std::vector<int64_t> seg, int64_t nseg) {
    const Tensor& xv = val(x);
    check_segments(xv, seg, nseg, "segment_sum");
    Tensor y = Tensor::zeros({nseg});
    for (size_t i = 0; i < seg.size(); ++i) y.v[size_t(seg[i])] += xv.v[i];
    bool rg = requires_grad(x);
    int id = push(std::move(y), rg, nullptr);
    if (!rg) return id;
    nodes_[size_t(id)].back = [this, id, x, seg = std::move(seg)]() {
        const double* gy = nodes_[size_t(id)].grad.data();
        double* gx = grad(x).data();
        for (size_t i = 0; i < seg.size(); ++i) gx[i] += gy[size_t(seg[i])];
    };
    return id;
}

int Graph::segment_max_stopgrad(int x, std::vector<int64_t> seg, int64_t nseg) {
    const Tensor& xv = val(x);
    check_segments(xv, seg, nseg, "segment_max");
    Tensor y = Tensor::full({nseg}, -std::numeric_limits<double>::infinity());
    for (size_t i = 0; i < seg.size(); ++i)
        y.v[size_t(seg[i])] = std::max(y.v[size_t(seg[i])], xv.v[i]);
    for (double e : y.v)
        if (e == -std::numeric_limits<double>::infinity())
            throw ConfigError("segment_max: empty segment");
    return push(std::move(y), false, nullptr);  // treated as constant by design
}

}  // namespace muce::num
