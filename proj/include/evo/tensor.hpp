#ifndef EVO_TENSOR_HPP
#define EVO_TENSOR_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace evo {

/// Dense row-major tensor of 64-bit floats. Rank 1 tensors behave as 1 x n
/// row vectors in every matrix op.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> values;
    bool requires_grad = false;
    std::vector<double> grad;  // same size as values when requires_grad

    Tensor() = default;

    Tensor(std::vector<std::size_t> s, double fill = 0.0) : shape(std::move(s)) {
        values.assign(numel_of(shape), fill);
    }

    Tensor(std::vector<std::size_t> s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
        if (values.size() != numel_of(shape))
            throw std::invalid_argument("Tensor: value count " + std::to_string(values.size()) +
                                        " does not match shape " + shape_str(shape));
    }

    static std::size_t numel_of(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (auto d : s) n *= d;
        return n;
    }

    static std::string shape_str(const std::vector<std::size_t>& s) {
        std::string out = "(";
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (i) out += "x";
            out += std::to_string(s[i]);
        }
        return out + ")";
    }

    static Tensor zeros(std::size_t r, std::size_t c) { return Tensor({r, c}); }

    static Tensor randn(std::size_t r, std::size_t c, std::mt19937_64& rng, double stddev) {
        Tensor t({r, c});
        std::normal_distribution<double> d(0.0, stddev);
        for (auto& v : t.values) v = d(rng);
        return t;
    }

    std::size_t numel() const { return values.size(); }
    std::size_t rows() const { return shape.size() >= 2 ? shape[0] : 1; }
    std::size_t cols() const { return shape.empty() ? 0 : shape.back(); }

    double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

    void set_requires_grad(bool on = true) {
        requires_grad = on;
        if (on) grad.assign(values.size(), 0.0);
        else grad.clear();
    }

    void zero_grad() {
        if (requires_grad) grad.assign(values.size(), 0.0);
    }
};

namespace detail {
inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape != b.shape)
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + Tensor::shape_str(a.shape) +
                                    " vs " + Tensor::shape_str(b.shape));
}
}  // namespace detail

/// Records a forward computation; backward() replays it in reverse and
/// accumulates gradients into requires_grad leaves.
class Tape {
public:
    using NodeId = int;

    /// Leaf backed by an external parameter. Gradients accumulate into
    /// param->grad during backward.
    NodeId leaf(Tensor* param) {
        Node n;
        n.val = *param;
        n.param = param->requires_grad ? param : nullptr;
        n.requires_grad = param->requires_grad;
        return push(std::move(n));
    }

    /// Owned input value; no gradient tracking unless requested.
    NodeId input(Tensor value, bool requires_grad = false) {
        Node n;
        n.val = std::move(value);
        n.requires_grad = requires_grad;
        return push(std::move(n));
    }

    const Tensor& value(NodeId id) const { return nodes_[check(id)].val; }
    std::span<const double> grad_of(NodeId id) const { return nodes_[check(id)].grad; }
    std::size_t size() const { return nodes_.size(); }

    // ---- elementwise / scalar ----

    NodeId add(NodeId a, NodeId b) { return broadcast_binary(a, b, "add", 1.0); }
    NodeId sub(NodeId a, NodeId b) { return broadcast_binary(a, b, "sub", -1.0); }

    NodeId mul(NodeId a, NodeId b) {
        const Tensor& ta = nodes_[check(a)].val;
        const Tensor& tb = nodes_[check(b)].val;
        detail::check_same_shape(ta, tb, "mul");
        Node n = unary_shell(ta.shape, {a, b});
        for (std::size_t i = 0; i < ta.numel(); ++i) n.val.values[i] = ta.values[i] * tb.values[i];
        NodeId out = push(std::move(n));
        set_back(out, [this, a, b, out] {
            auto& na = nodes_[a];
            auto& nb = nodes_[b];
            const auto& g = nodes_[out].grad;
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (na.requires_grad) na.grad[i] += g[i] * nb.val.values[i];
                if (nb.requires_grad) nb.grad[i] += g[i] * na.val.values[i];
            }
        });
        return out;
    }

    NodeId scale(NodeId a, double s) {
        const Tensor& ta = nodes_[check(a)].val;
        Node n = unary_shell(ta.shape, {a});
        for (std::size_t i = 0; i < ta.numel(); ++i) n.val.values[i] = ta.values[i] * s;
        NodeId out = push(std::move(n));
        set_back(out, [this, a, out, s] {
            auto& na = nodes_[a];
            if (!na.requires_grad) return;
            const auto& g = nodes_[out].grad;
            for (std::size_t i = 0; i < g.size(); ++i) na.grad[i] += g[i] * s;
        });
        return out;
    }

    NodeId tanh_(NodeId a) {
        return pointwise(a, "tanh", [](double x) { return std::tanh(x); },
                         [](double, double y) { return 1.0 - y * y; });
    }

    NodeId sigmoid_(NodeId a) {
        return pointwise(a, "sigmoid", [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                         [](double, double y) { return y * (1.0 - y); });
    }

    NodeId relu_(NodeId a) {
        return pointwise(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
                         [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
    }

    NodeId exp_(NodeId a) {
        return pointwise(a, "exp", [](double x) { return std::exp(x); },
                         [](double, double y) { return y; });
    }

    NodeId log_(NodeId a) {
        const Tensor& ta = nodes_[check(a)].val;
        for (double v : ta.values)
            if (!(v > 0.0))
                throw std::domain_error("log: non-positive input " + std::to_string(v));
        return pointwise(a, "log", [](double x) { return std::log(x); },
                         [](double x, double) { return 1.0 / x; });
    }

    // ---- matrix ----

    NodeId matmul(NodeId a, NodeId b) { return matmul_impl(a, b, false); }
    /// a * b^T
    NodeId matmul_nt(NodeId a, NodeId b) { return matmul_impl(a, b, true); }

    NodeId transpose(NodeId a) {
        const Tensor& ta = nodes_[check(a)].val;
        std::size_t r = ta.rows(), c = ta.cols();
        Node n = unary_shell({c, r}, {a});
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) n.val.values[j * r + i] = ta.values[i * c + j];
        NodeId out = push(std::move(n));
        set_back(out, [this, a, out, r, c] {
            auto& na = nodes_[a];
            if (!na.requires_grad) return;
            const auto& g = nodes_[out].grad;
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) na.grad[i * c + j] += g[j * r + i];
        });
        return out;
    }

    // ---- softmax family (row-wise, max-subtracted) ----

    NodeId softmax_rows(NodeId a) {
        const Tensor& ta = nodes_[check(a)].val;
        for (double v : ta.values)
            if (!std::isfinite(v)) throw std::domain_error("softmax: non-finite input");
        std::size_t r = ta.rows(), c = ta.cols();
        Node n = unary_shell(ta.shape, {a});
        for (std::size_t i = 0; i < r; ++i) {
            double mx = *std::max_element(&ta.values[i * c], &ta.values[i * c] + c);
            double sum = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
                double e = std::exp(ta.values[i * c + j] - mx);
                n.val.values[i * c + j] = e;
                sum += e;
            }
            for (std::size_t j = 0; j < c; ++j) n.val.values[i * c + j] /= sum;
        }
        NodeId out = push(std::move(n));
        set_back(out, [this, a, out, r, c] {
            auto& na = nodes_[a];
            if (!na.requires_grad) return;
            const auto& g = nodes_[out].grad;
            const auto& y = nodes_[out].val.values;
            for (std::size_t i = 0; i < r; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * y[i * c + j];
                for (std::size_t j = 0; j < c; ++j)
                    na.grad[i * c + j] += y[i * c + j] * (g[i * c + j] - dot);
            }
        });
        return out;
    }

    NodeId log_softmax_rows(NodeId a) {
        const Tensor& ta = nodes_[check(a)].val;
        for (double v : ta.values)
            if (!std::isfinite(v)) throw std::domain_error("log_softmax: non-finite input");
        std::size_t r = ta.rows(), c = ta.cols();
        Node n = unary_shell(ta.shape, {a});
        for (std::size_t i = 0; i < r; ++i) {
            double mx = *std::max_element(&ta.values[i * c], &ta.values[i * c] + c);
            double sum = 0.0;
            for (std::size_t j = 0; j < c; ++j) sum += std::exp(ta.values[i * c + j] - mx);
            double lse = mx + std::log(sum);
            for (std::size_t j = 0; j < c; ++j) n.val.values[i * c + j] = ta.values[i * c + j] - lse;
        }
        NodeId out = push(std::move(n));
        set_back(out, [this, a, out, r, c] {
            auto& na = nodes_[a];
            if (!na.requires_grad) return;
            const auto& g = nodes_[out].grad;
            const auto& y = nodes_[out].val.values;
            for (std::size_t i = 0; i < r; ++i) {
                double gsum = 0.0;
                for (std::size_t j = 0; j < c; ++j) gsum += g[i * c + j];
                for (std::size_t j = 0; j < c; ++j)
                    na.grad[i * c + j] += g[i * c + j] - std::exp(y[i * c + j]) * gsum;
            }
        });
        return out;
    }

    // ---- shape / gather ----

    NodeId concat_cols(std::span<const NodeId> parts) { return concat_impl(parts, 1); }
    NodeId concat_rows(std::span<const NodeId> parts) { return concat_impl(parts, 0); }

    /// Row lookup: output row i is input row indices[i].
    NodeId gather_rows(NodeId a, std::vector<std::size_t> indices) {
        const Tensor& ta = nodes_[check(a)].val;
        std::size_t c = ta.cols();
        for (auto idx : indices)
            if (idx >= ta.rows())
                throw std::out_of_range("gather_rows: index " + std::to_string(idx) + " >= " +
                                        std::to_string(ta.rows()));
        Node n = unary_shell({indices.size(), c}, {a});
        for (std::size_t i = 0; i < indices.size(); ++i)
            std::copy_n(&ta.values[indices[i] * c], c, &n.val.values[i * c]);
        NodeId out = push(std::move(n));
        set_back(out, [this, a, out, idx = std::move(indices), c] {
            auto& na = nodes_[a];
            if (!na.requires_grad) return;
            const auto& g = nodes_[out].grad;
            for (std::size_t i = 0; i < idx.size(); ++i)
                for (std::size_t j = 0; j < c; ++j) na.grad[idx[i] * c + j] += g[i * c + j];
        });
        return out;
    }

    /// Scalar element pick with gradient flow.
    NodeId select(NodeId a, std::size_t r, std::size_t c) {
        const Tensor& ta = nodes_[check(a)].val;
        std::size_t w = ta.cols();
        if (r >= ta.rows() || c >= w) throw std::out_of_range("select: index out of range");
        Node n = unary_shell({std::size_t(1)}, {a});
        n.val.values[0] = ta.values[r * w + c];
        NodeId out = push(std::move(n));
        set_back(out, [this, a, out, r, c, w] {
            auto& na = nodes_[a];
            if (na.requires_grad) na.grad[r * w + c] += nodes_[out].grad[0];
        });
        return out;
    }

    // ---- reductions ----

    NodeId sum(NodeId a) { return reduce(a, false); }
    NodeId mean(NodeId a) { return reduce(a, true); }

    /// Row-wise layer normalization with affine gamma/beta (1 x d each).
    NodeId layer_norm(NodeId a, NodeId gamma, NodeId beta, double eps = 1e-5) {
        const Tensor& ta = nodes_[check(a)].val;
        const Tensor& tg = nodes_[check(gamma)].val;
        const Tensor& tb = nodes_[check(beta)].val;
        std::size_t r = ta.rows(), c = ta.cols();
        if (tg.numel() != c || tb.numel() != c)
            throw std::invalid_argument("layer_norm: gamma/beta size must equal feature dim " +
                                        std::to_string(c));
        Node n = unary_shell(ta.shape, {a, gamma, beta});
        std::vector<double> mu(r), inv(r);
        for (std::size_t i = 0; i < r; ++i) {
            double m = 0.0;
            for (std::size_t j = 0; j < c; ++j) m += ta.values[i * c + j];
            m /= double(c);
            double var = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
                double d = ta.values[i * c + j] - m;
                var += d * d;
            }
            var /= double(c);
            mu[i] = m;
            inv[i] = 1.0 / std::sqrt(var + eps);
            for (std::size_t j = 0; j < c; ++j)
                n.val.values[i * c + j] = tg.values[j] * (ta.values[i * c + j] - m) * inv[i] + tb.values[j];
        }
        NodeId out = push(std::move(n));
        set_back(out, [this, a, gamma, beta, out, r, c, mu = std::move(mu), inv = std::move(inv)] {
            auto& na = nodes_[a];
            auto& ng = nodes_[gamma];
            auto& nb = nodes_[beta];
            const auto& g = nodes_[out].grad;
            const auto& x = nodes_[a].val.values;
            const auto& gv = nodes_[gamma].val.values;
            for (std::size_t i = 0; i < r; ++i) {
                // xhat_j = (x_j - mu) * inv
                double sum_dy = 0.0, sum_dy_xhat = 0.0;
                for (std::size_t j = 0; j < c; ++j) {
                    double xhat = (x[i * c + j] - mu[i]) * inv[i];
                    double dy = g[i * c + j] * gv[j];
                    sum_dy += dy;
                    sum_dy_xhat += dy * xhat;
                    if (ng.requires_grad) ng.grad[j] += g[i * c + j] * xhat;
                    if (nb.requires_grad) nb.grad[j] += g[i * c + j];
                }
                if (na.requires_grad) {
                    for (std::size_t j = 0; j < c; ++j) {
                        double xhat = (x[i * c + j] - mu[i]) * inv[i];
                        double dy = g[i * c + j] * gv[j];
                        na.grad[i * c + j] +=
                            inv[i] * (dy - sum_dy / double(c) - xhat * sum_dy_xhat / double(c));
                    }
                }
            }
        });
        return out;
    }

    /// Backpropagate from a scalar loss. May be called once per tape.
    void backward(NodeId loss) {
        Node& ln = nodes_[check(loss)];
        if (ln.val.numel() != 1)
            throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                        Tensor::shape_str(ln.val.shape));
        if (backward_done_)
            throw std::logic_error("backward: already called on this tape");
        backward_done_ = true;
        ln.grad[0] = 1.0;
        for (int i = int(nodes_.size()) - 1; i >= 0; --i) {
            if (nodes_[i].back) nodes_[i].back();
            if (nodes_[i].param)
                for (std::size_t j = 0; j < nodes_[i].grad.size(); ++j)
                    nodes_[i].param->grad[j] += nodes_[i].grad[j];
        }
    }

private:
    struct Node {
        Tensor val;
        std::vector<double> grad;
        Tensor* param = nullptr;
        bool requires_grad = false;
        std::function<void()> back;
    };

    std::vector<Node> nodes_;
    bool backward_done_ = false;

    NodeId push(Node n) {
        if (n.requires_grad) n.grad.assign(n.val.numel(), 0.0);
        nodes_.push_back(std::move(n));
        return NodeId(nodes_.size() - 1);
    }

    NodeId check(NodeId id) const {
        if (id < 0 || std::size_t(id) >= nodes_.size()) throw std::out_of_range("Tape: bad node id");
        return id;
    }

    Node unary_shell(std::vector<std::size_t> shape, std::initializer_list<NodeId> deps) {
        Node n;
        n.val = Tensor(std::move(shape));
        for (NodeId d : deps)
            if (nodes_[check(d)].requires_grad) n.requires_grad = true;
        return n;
    }

    void set_back(NodeId id, std::function<void()> fn) {
        if (nodes_[id].requires_grad) nodes_[id].back = std::move(fn);
    }

    template <class F, class DF>
    NodeId pointwise(NodeId a, const char*, F f, DF df) {
        const Tensor& ta = nodes_[check(a)].val;
        Node n = unary_shell(ta.shape, {a});
        for (std::size_t i = 0; i < ta.numel(); ++i) n.val.values[i] = f(ta.values[i]);
        NodeId out = push(std::move(n));
        set_back(out, [this, a, out, df] {
            auto& na = nodes_[a];
            if (!na.requires_grad) return;
            const auto& g = nodes_[out].grad;
            const auto& x = na.val.values;
            const auto& y = nodes_[out].val.values;
            for (std::size_t i = 0; i < g.size(); ++i) na.grad[i] += g[i] * df(x[i], y[i]);
        });
        return out;
    }

    // add/sub with optional row broadcast of b over a (a: n x d, b: 1 x d)
    NodeId broadcast_binary(NodeId a, NodeId b, const char* op, double sign) {
        const Tensor& ta = nodes_[check(a)].val;
        const Tensor& tb = nodes_[check(b)].val;
        bool bcast = ta.shape != tb.shape;
        if (bcast && !(tb.rows() == 1 && tb.cols() == ta.cols()))
            throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                        Tensor::shape_str(ta.shape) + " vs " +
                                        Tensor::shape_str(tb.shape));
        std::size_t r = ta.rows(), c = ta.cols();
        Node n = unary_shell(ta.shape, {a, b});
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j)
                n.val.values[i * c + j] = ta.values[i * c + j] + sign * tb.values[(bcast ? 0 : i) * c + j];
        NodeId out = push(std::move(n));
        set_back(out, [this, a, b, out, r, c, bcast, sign] {
            auto& na = nodes_[a];
            auto& nb = nodes_[b];
            const auto& g = nodes_[out].grad;
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) {
                    if (na.requires_grad) na.grad[i * c + j] += g[i * c + j];
                    if (nb.requires_grad) nb.grad[(bcast ? 0 : i) * c + j] += sign * g[i * c + j];
                }
        });
        return out;
    }

    NodeId matmul_impl(NodeId a, NodeId b, bool transpose_b) {
        const Tensor& ta = nodes_[check(a)].val;
        const Tensor& tb = nodes_[check(b)].val;
        std::size_t m = ta.rows(), k = ta.cols();
        std::size_t bk = transpose_b ? tb.cols() : tb.rows();
        std::size_t n2 = transpose_b ? tb.rows() : tb.cols();
        if (k != bk)
            throw std::invalid_argument("matmul: inner dims differ, " + Tensor::shape_str(ta.shape) +
                                        " vs " + Tensor::shape_str(tb.shape) +
                                        (transpose_b ? " (b transposed)" : ""));
        Node n = unary_shell({m, n2}, {a, b});
        const auto& A = ta.values;
        const auto& B = tb.values;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
                double av = A[i * k + p];
                if (transpose_b)
                    for (std::size_t j = 0; j < n2; ++j) n.val.values[i * n2 + j] += av * B[j * k + p];
                else
                    for (std::size_t j = 0; j < n2; ++j) n.val.values[i * n2 + j] += av * B[p * n2 + j];
            }
        NodeId out = push(std::move(n));
        set_back(out, [this, a, b, out, m, k, n2, transpose_b] {
            auto& na = nodes_[a];
            auto& nb = nodes_[b];
            const auto& g = nodes_[out].grad;
            const auto& A = na.val.values;
            const auto& B = nb.val.values;
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n2; ++j) {
                    double gij = g[i * n2 + j];
                    if (gij == 0.0) continue;
                    for (std::size_t p = 0; p < k; ++p) {
                        double bv = transpose_b ? B[j * k + p] : B[p * n2 + j];
                        if (na.requires_grad) na.grad[i * k + p] += gij * bv;
                        if (nb.requires_grad) {
                            if (transpose_b) nb.grad[j * k + p] += gij * A[i * k + p];
                            else nb.grad[p * n2 + j] += gij * A[i * k + p];
                        }
                    }
                }
        });
        return out;
    }

    NodeId concat_impl(std::span<const NodeId> parts, int axis) {
        if (parts.empty()) throw std::invalid_argument("concat: no inputs");
        std::size_t r0 = nodes_[check(parts[0])].val.rows();
        std::size_t c0 = nodes_[parts[0]].val.cols();
        std::size_t total = 0;
        for (NodeId p : parts) {
            const Tensor& t = nodes_[check(p)].val;
            if (axis == 1 && t.rows() != r0)
                throw std::invalid_argument("concat_cols: row counts differ");
            if (axis == 0 && t.cols() != c0)
                throw std::invalid_argument("concat_rows: column counts differ");
            total += axis == 1 ? t.cols() : t.rows();
        }
        std::size_t R = axis == 1 ? r0 : total;
        std::size_t C = axis == 1 ? total : c0;
        Node n;
        n.val = Tensor({R, C});
        for (NodeId p : parts)
            if (nodes_[p].requires_grad) n.requires_grad = true;
        std::size_t off = 0;
        for (NodeId p : parts) {
            const Tensor& t = nodes_[p].val;
            if (axis == 1) {
                for (std::size_t i = 0; i < R; ++i)
                    std::copy_n(&t.values[i * t.cols()], t.cols(), &n.val.values[i * C + off]);
                off += t.cols();
            } else {
                std::copy_n(t.values.data(), t.numel(), &n.val.values[off * C]);
                off += t.rows();
            }
        }
        NodeId out = push(std::move(n));
        std::vector<NodeId> owned(parts.begin(), parts.end());
        set_back(out, [this, out, owned = std::move(owned), axis, R, C] {
            const auto& g = nodes_[out].grad;
            std::size_t off = 0;
            for (NodeId p : owned) {
                auto& np = nodes_[p];
                std::size_t pr = np.val.rows(), pc = np.val.cols();
                if (np.requires_grad) {
                    if (axis == 1) {
                        for (std::size_t i = 0; i < R; ++i)
                            for (std::size_t j = 0; j < pc; ++j) np.grad[i * pc + j] += g[i * C + off + j];
                    } else {
                        for (std::size_t i = 0; i < pr; ++i)
                            for (std::size_t j = 0; j < C; ++j) np.grad[i * C + j] += g[(off + i) * C + j];
                    }
                }
                off += axis == 1 ? pc : pr;
            }
        });
        return out;
    }

    NodeId reduce(NodeId a, bool take_mean) {
        const Tensor& ta = nodes_[check(a)].val;
        std::size_t n_el = ta.numel();
        Node n = unary_shell({std::size_t(1)}, {a});
        double s = std::accumulate(ta.values.begin(), ta.values.end(), 0.0);
        n.val.values[0] = take_mean ? s / double(n_el) : s;
        NodeId out = push(std::move(n));
        set_back(out, [this, a, out, n_el, take_mean] {
            auto& na = nodes_[a];
            if (!na.requires_grad) return;
            double g = nodes_[out].grad[0] * (take_mean ? 1.0 / double(n_el) : 1.0);
            for (auto& gv : na.grad) gv += g;
        });
        return out;
    }
};

/// Adam with bias correction. Moment buffers are keyed by parameter order,
/// which must stay stable across steps.
/// Exponential-moving-average reward baseline for REINFORCE training.
struct RewardBaseline {
    double value = 0.0;
    double decay = 0.9;

    void update(double mean_reward) { value = decay * value + (1.0 - decay) * mean_reward; }
};

struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step_count = 0;
    std::vector<std::vector<double>> m, v;

    /// Applies one update from param->grad. Returns false (and leaves params
    /// untouched) if any gradient is non-finite.
    bool step(std::span<Tensor* const> params) {
        if (m.empty()) {
            for (Tensor* p : params) {
                m.emplace_back(p->values.size(), 0.0);
                v.emplace_back(p->values.size(), 0.0);
            }
        }
        if (m.size() != params.size()) throw std::invalid_argument("AdamState: parameter count changed");
        for (Tensor* p : params)
            for (double g : p->grad)
                if (!std::isfinite(g)) return false;
        ++step_count;
        double bc1 = 1.0 - std::pow(beta1, double(step_count));
        double bc2 = 1.0 - std::pow(beta2, double(step_count));
        for (std::size_t pi = 0; pi < params.size(); ++pi) {
            Tensor* p = params[pi];
            if (m[pi].size() != p->values.size())
                throw std::invalid_argument("AdamState: parameter shape changed");
            for (std::size_t i = 0; i < p->values.size(); ++i) {
                double g = p->grad[i];
                m[pi][i] = beta1 * m[pi][i] + (1.0 - beta1) * g;
                v[pi][i] = beta2 * v[pi][i] + (1.0 - beta2) * g * g;
                double mhat = m[pi][i] / bc1;
                double vhat = v[pi][i] / bc2;
                p->values[i] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
        }
        return true;
    }
};

/// Central-difference gradient check. `build` constructs the loss graph on a
/// fresh tape (leafing the given params itself); returns the max relative
/// error over all parameter coordinates.
inline double grad_check(const std::function<Tape::NodeId(Tape&)>& build,
                         std::span<Tensor* const> params, double step = 1e-5) {
    for (Tensor* p : params) p->zero_grad();
    {
        Tape tape;
        Tape::NodeId loss = build(tape);
        tape.backward(loss);
    }
    std::vector<std::vector<double>> analytic;
    for (Tensor* p : params) analytic.push_back(p->grad);

    auto eval = [&]() {
        Tape tape;
        return tape.value(build(tape)).values[0];
    };

    double max_err = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor* p = params[pi];
        for (std::size_t i = 0; i < p->values.size(); ++i) {
            double saved = p->values[i];
            p->values[i] = saved + step;
            double fp = eval();
            p->values[i] = saved - step;
            double fm = eval();
            p->values[i] = saved;
            double numeric = (fp - fm) / (2.0 * step);
            double a = analytic[pi][i];
            double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
            max_err = std::max(max_err, err);
        }
    }
    return max_err;
}

}  // namespace evo

#endif  // EVO_TENSOR_HPP
