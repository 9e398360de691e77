#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "forge/errors.hpp"

namespace forge {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorData {
    Shape shape;
    std::vector<float> data;
    std::vector<float> grad;  // empty until backward touches this tensor
    bool requires_grad = false;
};

/// Dense row-major float32 tensor. Copying a Tensor copies the handle, not
/// the storage; ops on an active Tape record their backward rules so a later
/// Tape::backward pass fills in gradients (define-by-run).
class Tensor {
public:
    Tensor() : d_(std::make_shared<TensorData>()) {}

    Tensor(Shape shape, float fill, bool requires_grad = false);
    Tensor(Shape shape, std::vector<float> values, bool requires_grad = false);

    static Tensor scalar(float v) { return Tensor({1}, std::vector<float>{v}); }
    static Tensor zeros(Shape shape, bool requires_grad = false) {
        return Tensor(std::move(shape), 0.0f, requires_grad);
    }
    static Tensor ones(Shape shape, bool requires_grad = false) {
        return Tensor(std::move(shape), 1.0f, requires_grad);
    }

    const Shape& shape() const { return d_->shape; }
    std::size_t rank() const { return d_->shape.size(); }
    std::size_t size() const { return d_->data.size(); }
    std::size_t dim(std::size_t axis) const { return d_->shape[axis]; }

    std::span<const float> values() const { return d_->data; }
    std::span<float> values() { return d_->data; }
    float value_at(std::size_t flat) const { return d_->data[flat]; }

    /// Scalar payload; throws NotScalar for anything but a 1-element tensor.
    float item() const {
        if (size() != 1) throw NotScalar("tensor has " + std::to_string(size()) + " elements");
        return d_->data[0];
    }

    bool requires_grad() const { return d_->requires_grad; }
    void set_requires_grad(bool on) { d_->requires_grad = on; }

    bool has_grad() const { return !d_->grad.empty(); }
    std::span<const float> grad() const {
        if (d_->grad.empty()) throw MissingGrad("grad not populated; run backward first");
        return d_->grad;
    }
    void zero_grad() {
        if (!d_->grad.empty()) std::fill(d_->grad.begin(), d_->grad.end(), 0.0f);
    }
    void clear_grad() { d_->grad.clear(); }

    /// Copy of the data as a fresh leaf with no grad tracking.
    Tensor detach() const;

    bool same_storage(const Tensor& other) const { return d_ == other.d_; }

    std::shared_ptr<TensorData> storage() const { return d_; }

private:
    explicit Tensor(std::shared_ptr<TensorData> d) : d_(std::move(d)) {}
    std::shared_ptr<TensorData> d_;

    friend class Tape;
    friend Tensor make_result(Shape shape, bool requires_grad);
};

/// Recorded operations of one forward pass, in execution order (hence
/// topologically sorted). backward() sweeps them once, in reverse.
class Tape {
public:
    struct NodeInfo {
        std::vector<const void*> inputs;
        const void* output;
    };

    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Seeds d(loss)/d(loss) = 1 and runs every recorded rule once, in
    /// reverse order. The tape is consumed; recording continues afterwards
    /// only for newly executed ops.
    void backward(const Tensor& loss);

    std::size_t node_count() const { return nodes_.size(); }
    const std::vector<NodeInfo>& debug_nodes() const { return infos_; }

    static Tape* active();
    void record(std::function<void()> fn, std::vector<const void*> inputs, const void* output);

private:
    std::vector<std::function<void()>> nodes_;
    std::vector<NodeInfo> infos_;
};

/// Runs backward on the innermost active tape.
void backward(const Tensor& loss);

// ---- elementwise -----------------------------------------------------------

enum class EwOp { Add, Sub, Mul, Div };

Tensor elementwise(EwOp op, const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }

Tensor scale(const Tensor& a, float c);

// ---- linear algebra --------------------------------------------------------

/// [m,k]x[k,n], [B,m,k]x[k,n] or [B,m,k]x[B,k,n].
Tensor matmul(const Tensor& a, const Tensor& b);

/// Swaps the last two axes (rank 2 or 3).
Tensor transpose_last(const Tensor& a);

Tensor reshape(const Tensor& a, Shape shape);

/// Columns [start, start+len) of the last axis.
Tensor slice_last(const Tensor& a, std::size_t start, std::size_t len);

/// Concatenation along the last axis.
Tensor concat_last(const std::vector<Tensor>& parts);

// ---- reductions ------------------------------------------------------------

enum class Red { Sum, Mean };

Tensor reduce(Red op, const Tensor& a, std::optional<std::size_t> axis = std::nullopt,
              bool keepdims = false);

inline Tensor sum(const Tensor& a) { return reduce(Red::Sum, a); }
inline Tensor mean(const Tensor& a) { return reduce(Red::Mean, a); }

// ---- elementwise unaries ---------------------------------------------------

enum class Act { Relu, Sigmoid, Tanh, Gelu };

Tensor activation(Act op, const Tensor& a);

inline Tensor relu(const Tensor& a) { return activation(Act::Relu, a); }
inline Tensor sigmoid(const Tensor& a) { return activation(Act::Sigmoid, a); }
inline Tensor tanh_act(const Tensor& a) { return activation(Act::Tanh, a); }
inline Tensor gelu(const Tensor& a) { return activation(Act::Gelu, a); }

Tensor exp_(const Tensor& a);
Tensor sqrt_(const Tensor& a);
Tensor log_(const Tensor& a);  // argument guarded by +1e-8

Tensor softmax(const Tensor& a, std::size_t axis);

// ---- losses ----------------------------------------------------------------

enum class LossKind { BceWithLogits, Mse };

Tensor loss(LossKind kind, const Tensor& pred, const Tensor& target);

/// Mean binary cross-entropy from logits, log-sum-exp stable.
Tensor bce_with_logits(const Tensor& logits, const Tensor& targets);

/// Mean squared error.
Tensor mse(const Tensor& pred, const Tensor& target);

// ---- gradient checking -----------------------------------------------------

/// Central-difference check of a scalar-valued function at x. Returns the max
/// over components of |analytic - numeric| / (|analytic| + 1e-8).
double finite_difference_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                               double eps = 1e-3);

}  // namespace forge
