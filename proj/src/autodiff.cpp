#include "wavedenoise/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

#include "wavedenoise/conv_kernels.hpp"

namespace wdn::ad {

namespace {

std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
    return out + "]";
}

void require_rank2(const Tensor& x, const char* op) {
    if (!x.defined() || x.rank() != 2) throw std::invalid_argument(std::string(op) + ": expected [channels x time] tensor");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
}

/// Result node wired to `parents` when any of them needs a gradient.
Tensor make_result(Shape shape, std::vector<double> value, std::vector<std::shared_ptr<Node>> parents,
                   std::function<void(Node&)> fn) {
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    const bool needs = std::any_of(parents.begin(), parents.end(), [](const auto& p) { return p && p->requires_grad; });
    if (needs) {
        node->requires_grad = true;
        node->parents = std::move(parents);
        node->backward_fn = std::move(fn);
    }
    return Tensor(std::move(node));
}

template <typename F>
Tensor unary(const Tensor& x, F f, std::function<void(Node&)> (*make_bw)(const std::shared_ptr<Node>&)) {
    std::vector<double> v(x.numel());
    const auto in = x.data();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(in[i]);
    return make_result(x.shape(), std::move(v), {x.node()}, make_bw(x.node()));
}

}  // namespace

std::size_t numel_of(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    const std::size_t n = numel_of(shape);
    return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    if (numel_of(shape) != values.size())
        throw std::invalid_argument("tensor data size does not match shape " + shape_str(shape));
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    if (requires_grad) node->ensure_grad();
    return Tensor(std::move(node));
}

std::size_t Tensor::channels() const {
    if (rank() != 2) throw std::invalid_argument("channels(): tensor is not [channels x time]");
    return shape()[0];
}

std::size_t Tensor::time() const {
    if (rank() != 2) throw std::invalid_argument("time(): tensor is not [channels x time]");
    return shape()[1];
}

std::span<double> Tensor::grad() {
    node_->ensure_grad();
    return node_->grad;
}

std::span<const double> Tensor::grad() const {
    node_->ensure_grad();
    return node_->grad;
}

double Tensor::item() const {
    if (numel() != 1) throw std::invalid_argument("item(): tensor has " + std::to_string(numel()) + " elements");
    return node_->value[0];
}

void Tensor::zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }

Tensor Tensor::detach() const { return from(shape(), node_->value, false); }

ConvParams make_conv(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_len, Rng& rng) {
    const double bound = std::sqrt(1.0 / static_cast<double>(in_channels * kernel_len));
    std::vector<double> w(out_channels * in_channels * kernel_len);
    for (auto& v : w) v = rng.uniform(-bound, bound);
    std::vector<double> b(out_channels);
    for (auto& v : b) v = rng.uniform(-bound, bound);
    return {Tensor::from({out_channels, in_channels, kernel_len}, std::move(w), true),
            Tensor::from({out_channels}, std::move(b), true)};
}

// ---- convolution -----------------------------------------------------------

Tensor conv1d(const Tensor& x, const ConvParams& params, std::size_t dilation, Padding padding) {
    require_rank2(x, "conv1d");
    if (dilation == 0) throw std::invalid_argument("conv1d: dilation must be positive");
    if (params.weight.rank() != 3 || params.bias.rank() != 1 || params.bias.numel() != params.out_channels())
        throw std::invalid_argument("conv1d: malformed parameters");
    if (x.channels() != params.in_channels())
        throw std::invalid_argument("conv1d: input has " + std::to_string(x.channels()) + " channels, weights expect " +
                                    std::to_string(params.in_channels()));

    const kernels::ConvShape cs{params.in_channels(), params.out_channels(), params.kernel_len(), dilation};
    const std::size_t span = cs.span();
    std::size_t pad_left = 0, pad_right = 0;
    switch (padding) {
        case Padding::Valid:
            break;
        case Padding::SameSymmetric:
            if (span % 2 != 0) throw std::invalid_argument("conv1d: symmetric padding needs an odd kernel length");
            pad_left = pad_right = span / 2;
            break;
        case Padding::SameCausal:
            pad_left = span;
            break;
    }
    const std::size_t in_len = x.time();
    const std::size_t padded_len = in_len + pad_left + pad_right;
    if (padded_len < span + 1)
        throw std::invalid_argument("conv1d: input of length " + std::to_string(in_len) +
                                    " too short for valid convolution spanning " + std::to_string(span + 1));
    const std::size_t out_len = padded_len - span;
    const std::size_t C = cs.in_channels;

    // Padding is materialized so every output element sees the same code path.
    auto padded = std::make_shared<std::vector<double>>();
    const double* src = x.data().data();
    if (pad_left == 0 && pad_right == 0) {
        padded->assign(src, src + C * in_len);
    } else {
        padded->assign(C * padded_len, 0.0);
        for (std::size_t c = 0; c < C; ++c)
            std::copy(src + c * in_len, src + (c + 1) * in_len, padded->data() + c * padded_len + pad_left);
    }

    std::vector<double> out(cs.out_channels * out_len);
    kernels::conv1d_valid(padded->data(), padded_len, params.weight.data().data(), params.bias.data().data(), cs,
                          out.data());

    auto xn = x.node();
    auto wn = params.weight.node();
    auto bn = params.bias.node();
    return make_result({cs.out_channels, out_len}, std::move(out), {xn, wn, bn},
                       [xn, wn, bn, padded, cs, padded_len, pad_left, in_len](Node& self) {
                           if (wn->requires_grad || bn->requires_grad) {
                               wn->ensure_grad();
                               bn->ensure_grad();
                               kernels::conv1d_valid_grad_params(self.grad.data(), padded->data(), padded_len, cs,
                                                                 wn->grad.data(), bn->grad.data());
                           }
                           if (xn->requires_grad) {
                               std::vector<double> gpad(cs.in_channels * padded_len, 0.0);
                               kernels::conv1d_valid_grad_input(self.grad.data(), padded_len, wn->value.data(), cs,
                                                                gpad.data());
                               xn->ensure_grad();
                               for (std::size_t c = 0; c < cs.in_channels; ++c) {
                                   const double* g = gpad.data() + c * padded_len + pad_left;
                                   double* dst = xn->grad.data() + c * in_len;
                                   for (std::size_t t = 0; t < in_len; ++t) dst[t] += g[t];
                               }
                           }
                       });
}

// ---- elementwise -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] + b.data()[i];
    auto an = a.node(), bn = b.node();
    return make_result(a.shape(), std::move(v), {an, bn}, [an, bn](Node& self) {
        for (auto* p : {an.get(), bn.get()}) {
            if (!p->requires_grad) continue;
            p->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] - b.data()[i];
    auto an = a.node(), bn = b.node();
    return make_result(a.shape(), std::move(v), {an, bn}, [an, bn](Node& self) {
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] -= self.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] * b.data()[i];
    auto an = a.node(), bn = b.node();
    return make_result(a.shape(), std::move(v), {an, bn}, [an, bn](Node& self) {
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i] * bn->value[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] += self.grad[i] * an->value[i];
        }
    });
}

Tensor scale(const Tensor& a, double c) {
    std::vector<double> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] * c;
    auto an = a.node();
    return make_result(a.shape(), std::move(v), {an}, [an, c](Node& self) {
        an->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i] * c;
    });
}

Tensor tanh(const Tensor& x) {
    return unary(x, [](double v) { return std::tanh(v); }, [](const std::shared_ptr<Node>& xn) {
        return std::function<void(Node&)>([xn](Node& self) {
            xn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                const double y = self.value[i];
                xn->grad[i] += self.grad[i] * (1.0 - y * y);
            }
        });
    });
}

Tensor sigmoid(const Tensor& x) {
    return unary(x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); }, [](const std::shared_ptr<Node>& xn) {
        return std::function<void(Node&)>([xn](Node& self) {
            xn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                const double y = self.value[i];
                xn->grad[i] += self.grad[i] * y * (1.0 - y);
            }
        });
    });
}

Tensor relu(const Tensor& x) {
    return unary(x, [](double v) { return v > 0.0 ? v : 0.0; }, [](const std::shared_ptr<Node>& xn) {
        return std::function<void(Node&)>([xn](Node& self) {
            xn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                if (xn->value[i] > 0.0) xn->grad[i] += self.grad[i];
        });
    });
}

// ---- shape / reduction -------------------------------------------------------

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
    require_rank2(x, "add_channel_bias");
    const std::size_t C = x.channels(), T = x.time();
    if (bias.numel() != C) throw std::invalid_argument("add_channel_bias: bias length does not match channels");
    std::vector<double> v(C * T);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t t = 0; t < T; ++t) v[c * T + t] = x.data()[c * T + t] + bias.data()[c];
    auto xn = x.node(), bn = bias.node();
    return make_result(x.shape(), std::move(v), {xn, bn}, [xn, bn, C, T](Node& self) {
        if (xn->requires_grad) {
            xn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t c = 0; c < C; ++c) {
                double acc = 0.0;
                for (std::size_t t = 0; t < T; ++t) acc += self.grad[c * T + t];
                bn->grad[c] += acc;
            }
        }
    });
}

Tensor matvec(const Tensor& matrix, std::span<const double> v) {
    if (matrix.rank() != 2 || matrix.shape()[1] != v.size())
        throw std::invalid_argument("matvec: matrix columns do not match vector length");
    const std::size_t R = matrix.shape()[0], K = v.size();
    std::vector<double> out(R, 0.0);
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t k = 0; k < K; ++k) out[r] += matrix.data()[r * K + k] * v[k];
    auto mn = matrix.node();
    std::vector<double> vec(v.begin(), v.end());
    return make_result({R}, std::move(out), {mn}, [mn, vec, R, K](Node& self) {
        mn->ensure_grad();
        for (std::size_t r = 0; r < R; ++r)
            for (std::size_t k = 0; k < K; ++k) mn->grad[r * K + k] += self.grad[r] * vec[k];
    });
}

Tensor crop_time(const Tensor& x, std::size_t offset, std::size_t len) {
    require_rank2(x, "crop_time");
    const std::size_t C = x.channels(), T = x.time();
    if (offset + len > T) throw std::invalid_argument("crop_time: window exceeds tensor length");
    std::vector<double> v(C * len);
    for (std::size_t c = 0; c < C; ++c)
        std::copy_n(x.data().data() + c * T + offset, len, v.data() + c * len);
    auto xn = x.node();
    return make_result({C, len}, std::move(v), {xn}, [xn, C, T, offset, len](Node& self) {
        xn->ensure_grad();
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t t = 0; t < len; ++t) xn->grad[c * T + offset + t] += self.grad[c * len + t];
    });
}

Tensor const_minus(std::span<const double> c, const Tensor& x) {
    if (c.size() != x.numel()) throw std::invalid_argument("const_minus: length mismatch");
    std::vector<double> v(c.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = c[i] - x.data()[i];
    auto xn = x.node();
    return make_result(x.shape(), std::move(v), {xn}, [xn](Node& self) {
        xn->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] -= self.grad[i];
    });
}

Tensor sum(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.data()) acc += v;
    auto xn = x.node();
    return make_result({}, {acc}, {xn}, [xn](Node& self) {
        xn->ensure_grad();
        for (auto& g : xn->grad) g += self.grad[0];
    });
}

Tensor mean_abs_error(const Tensor& x, std::span<const double> target) {
    if (target.size() != x.numel() || target.empty())
        throw std::invalid_argument("mean_abs_error: length mismatch");
    const double n = static_cast<double>(target.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) acc += std::abs(target[i] - x.data()[i]);
    auto xn = x.node();
    std::vector<double> tgt(target.begin(), target.end());
    return make_result({}, {acc / n}, {xn}, [xn, tgt = std::move(tgt), n](Node& self) {
        xn->ensure_grad();
        const double g = self.grad[0] / n;
        for (std::size_t i = 0; i < tgt.size(); ++i) {
            const double d = xn->value[i] - tgt[i];
            if (d > 0.0)
                xn->grad[i] += g;
            else if (d < 0.0)
                xn->grad[i] -= g;
        }
    });
}

Tensor gated_unit(const Tensor& x, const ConvParams& filter, const ConvParams& gate, std::size_t dilation,
                  Padding padding, const Tensor& cond_f, const Tensor& cond_g) {
    if (filter.out_channels() != gate.out_channels() || filter.kernel_len() != gate.kernel_len())
        throw std::invalid_argument("gated_unit: filter and gate shapes differ");
    Tensor f = conv1d(x, filter, dilation, padding);
    Tensor g = conv1d(x, gate, dilation, padding);
    if (cond_f.defined()) f = add_channel_bias(f, cond_f);
    if (cond_g.defined()) g = add_channel_bias(g, cond_g);
    return mul(tanh(f), sigmoid(g));
}

// ---- backward ----------------------------------------------------------------

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1) throw GraphError("backward: loss must be a scalar");
    Node* root = loss.node().get();
    if (root->consumed) throw GraphError("backward: graph already consumed");
    if (!root->requires_grad) return;
    if (root->is_leaf()) {
        root->ensure_grad();
        root->grad[0] += 1.0;
        return;
    }

    // Post-order DFS gives a topological order; walk it in reverse.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
    seen.insert(root);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p && p->requires_grad && !p->is_leaf() && seen.insert(p).second) stack.emplace_back(p, 0);
            if (p && p->consumed) throw GraphError("backward: graph already consumed");
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root->ensure_grad();
    root->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        n->ensure_grad();
        n->backward_fn(*n);
    }
    for (Node* n : order) {
        n->backward_fn = nullptr;
        n->parents.clear();
        n->consumed = true;
        if (n != root) std::vector<double>().swap(n->grad);
    }
}

}  // namespace wdn::ad
