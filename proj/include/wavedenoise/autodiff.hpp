#pragma once

// Minimal reverse-mode autodiff over [channels x time] tensors. Graphs are
// recorded dynamically: every op on an input that requires grad links the
// result to its parents, and backward() walks that graph once.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "wavedenoise/random.hpp"

namespace wdn::ad {

using Shape = std::vector<std::size_t>;

class GraphError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    bool consumed = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    bool is_leaf() const { return !backward_fn; }
    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

/// Shared handle to a graph node. Copies alias the same storage.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false) { return from({}, {v}, requires_grad); }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t numel() const { return node_->value.size(); }
    std::size_t channels() const;
    std::size_t time() const;

    std::span<double> data() { return node_->value; }
    std::span<const double> data() const { return node_->value; }
    std::span<double> grad();
    std::span<const double> grad() const;
    double item() const;

    bool requires_grad() const { return node_->requires_grad; }
    void zero_grad();

    /// Copy of the values with no graph history.
    Tensor detach() const;

    const std::shared_ptr<Node>& node() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

std::size_t numel_of(const Shape& shape);

/// Weight [out x in x kernel_len] and bias [out].
struct ConvParams {
    Tensor weight;
    Tensor bias;

    std::size_t out_channels() const { return weight.shape()[0]; }
    std::size_t in_channels() const { return weight.shape()[1]; }
    std::size_t kernel_len() const { return weight.shape()[2]; }
};

enum class Padding { Valid, SameSymmetric, SameCausal };

/// Fan-in uniform init: weight and bias drawn from +-sqrt(1 / (in_channels * kernel_len)).
ConvParams make_conv(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_len, Rng& rng);

// ---- ops -----------------------------------------------------------------

Tensor conv1d(const Tensor& x, const ConvParams& params, std::size_t dilation, Padding padding);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
/// x[c][t] + bias[c]
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);
/// matrix [rows x cols] times a constant vector of length cols.
Tensor matvec(const Tensor& matrix, std::span<const double> v);
/// Columns [offset, offset + len) of a [channels x time] tensor.
Tensor crop_time(const Tensor& x, std::size_t offset, std::size_t len);
/// c - x for a constant c of the same size.
Tensor const_minus(std::span<const double> c, const Tensor& x);
Tensor sum(const Tensor& x);
/// mean_j |target_j - x_j|; subgradient 0 where they are equal.
Tensor mean_abs_error(const Tensor& x, std::span<const double> target);

/// tanh(conv(x, filter) + cond_f) * sigmoid(conv(x, gate) + cond_g). The
/// condition biases are [out_channels] tensors broadcast over time; pass an
/// undefined Tensor to omit one.
Tensor gated_unit(const Tensor& x, const ConvParams& filter, const ConvParams& gate, std::size_t dilation,
                  Padding padding, const Tensor& cond_f, const Tensor& cond_g);

/// Fills the grad of every requires_grad tensor reachable from `loss` with
/// d loss / d tensor, accumulating into existing grads. The graph can only
/// be walked once.
void backward(const Tensor& loss);

}  // namespace wdn::ad
