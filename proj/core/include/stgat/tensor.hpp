// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

namespace stgat {

using Shape = std::vector<std::size_t>;

/// Element count implied by a shape. The empty shape is a scalar (one element).
std::size_t shape_size(const Shape& shape);

/// Human readable form, e.g. "[2 x 3]".
std::string shape_str(const Shape& shape);

namespace detail {
struct TensorImpl;
}

enum class Op : std::uint8_t;
struct OpAttrs;
class Tensor;

Tensor apply_primitive(Op op, std::span<const Tensor> inputs, const OpAttrs& attrs);

// Dense row-major array of 64-bit floats. Tensor is a cheap handle: copies
// alias the same storage, clone() makes a deep copy. Once a tensor has been
// recorded on a tape its values must not be mutated; parameter updates happen
// between tapes.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from_values(Shape shape, std::vector<double> values, bool requires_grad = false);
    /// Rank-0 tensor holding a single value.
    static Tensor scalar(double value);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const;
    std::size_t rank() const;
    std::size_t size() const;
    bool requires_grad() const;
    void set_requires_grad(bool requires_grad);

    std::span<const double> values() const;
    std::span<double> mutable_values();

    /// Value of a rank-0 or single-element tensor.
    double item() const;

    /// True for rank 0 or shape [1].
    bool is_scalar() const;

    /// Gradient buffer; empty span when no gradient has been computed.
    std::span<const double> grad() const;
    void zero_grad();

    /// Deep copy with fresh storage and no gradient.
    Tensor clone() const;

    detail::TensorImpl* impl() const { return impl_.get(); }

private:
    explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<detail::TensorImpl> impl_;

    friend class Tape;
    friend Tensor apply_primitive(Op, std::span<const Tensor>, const OpAttrs&);
};

enum class Op : std::uint8_t {
    Add,
    Sub,
    Mul,
    Div,
    MatMul,
    MatMulT, // a * b^T without materializing the transpose
    Concat,
    Slice,
    Transpose,
    Reshape,
    SumAxis,
    MeanAxis,
    Sigmoid,
    Tanh,
    Exp,
    Sqrt,
    LeakyRelu,
    SoftmaxAxis,
};

const char* op_name(Op op);

/// Per-operation attributes; only the fields the operation reads are used.
struct OpAttrs {
    std::size_t axis = 0;
    std::size_t start = 0;      // Slice
    std::size_t stop = 0;       // Slice
    double slope = 0.0;         // LeakyRelu
    Shape target_shape;         // Reshape
};

// apply_primitive (declared above) runs one primitive: it validates shapes,
// checks the output for NaN/Inf and records the step on the active tape when
// any input requires a gradient.
inline Tensor apply_primitive(Op op, std::span<const Tensor> inputs) {
    return apply_primitive(op, inputs, OpAttrs{});
}

// Elementwise ops broadcast trailing dimensions; matmul is strictly 2-D.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor matmul(const Tensor& a, const Tensor& b);
/// a[m x k] * b[n x k]^T -> [m x n]; the common x * W^T pattern.
Tensor matmul_t(const Tensor& a, const Tensor& b);
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t stop);
Tensor transpose(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);
Tensor sum_axis(const Tensor& x, std::size_t axis);
Tensor mean_axis(const Tensor& x, std::size_t axis);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double negative_slope);
Tensor softmax_axis(const Tensor& x, std::size_t axis);

/// Swaps the last two axes of a rank-3 tensor. Composition of slice,
/// reshape and concat, so gradients flow through it.
Tensor swap_last_axes(const Tensor& x);

struct TapeEntry {
    Op op;
    OpAttrs attrs;
    std::vector<Tensor> inputs;
    Tensor output;
};

// Ordered record of the primitives applied while the tape was active.
// Constructing a Tape makes it the active tape for the current thread;
// destruction restores the previous one. A tape and the tensors recorded on
// it are confined to a single thread.
class Tape {
public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Reverse sweep from `loss`, which must be the scalar output of the
    /// final recorded step. Accumulates gradients into every leaf tensor
    /// with requires_grad; gradients add up across fan-out. A tape can be
    /// walked backward only once.
    void backward(const Tensor& loss);

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const TapeEntry& entry(std::size_t i) const { return entries_[i]; }
    bool consumed() const { return consumed_; }

    /// Re-executes every recorded step and compares with the stored outputs
    /// bit for bit.
    bool verify_replay() const;

    /// The tape currently recording on this thread, or nullptr.
    static Tape* active();

private:
    void record(TapeEntry entry);

    std::vector<TapeEntry> entries_;
    std::unordered_set<const detail::TensorImpl*> produced_;
    bool consumed_ = false;

    friend Tensor apply_primitive(Op, std::span<const Tensor>, const OpAttrs&);
};

using ScalarFn = std::function<Tensor(const Tensor&)>;

/// Compares the analytic gradient of the scalar function `f` at `x` against
/// central finite differences. Returns the maximum over checked elements of
/// |analytic - numeric| / max(1, |analytic|). `max_checks` bounds the number
/// of perturbed coordinates (evenly strided); 0 means every element.
double finite_diff_check(const ScalarFn& f, const Tensor& x, double eps, std::size_t max_checks = 0);

} // namespace stgat
