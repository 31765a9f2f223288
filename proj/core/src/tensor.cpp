// SPDX-License-Identifier: Apache-2.0
#include "stgat/tensor.hpp"

#include "stgat/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>
#include <unordered_map>

namespace stgat {

namespace detail {

// Values live behind a shared pointer so that reshapes can alias the same
// storage instead of copying it.
struct TensorImpl {
    Shape shape;
    std::shared_ptr<std::vector<double>> store;
    bool requires_grad = false;
    std::vector<double> grad; // empty means "no gradient yet"

    std::vector<double>& values() { return *store; }
    const std::vector<double>& values() const { return *store; }
};

} // namespace detail

using detail::TensorImpl;

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t dim : shape) {
        n *= dim;
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) {
            out << " x ";
        }
        out << shape[i];
    }
    out << ']';
    return out.str();
}

namespace {

void check_dims_positive(const char* what, const Shape& shape) {
    for (std::size_t dim : shape) {
        if (dim == 0) {
            throw ShapeError(std::string(what) + ": zero-sized dimension in " + shape_str(shape));
        }
    }
}

void ensure_finite(const char* what, std::span<const double> values) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string(what) + ": non-finite value in output");
        }
    }
}

std::shared_ptr<TensorImpl> make_impl(Shape shape, std::vector<double> values, bool requires_grad) {
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->store = std::make_shared<std::vector<double>>(std::move(values));
    impl->requires_grad = requires_grad;
    return impl;
}

// --- broadcasting -----------------------------------------------------------

std::vector<std::size_t> row_major_strides(const Shape& shape) {
    std::vector<std::size_t> strides(shape.size(), 1);
    for (std::size_t d = shape.size(); d-- > 1;) {
        strides[d - 1] = strides[d] * shape[d];
    }
    return strides;
}

struct BinaryPlan {
    Shape out;
    std::vector<std::size_t> stride_a;
    std::vector<std::size_t> stride_b;
    bool same_shape = false;
};

BinaryPlan plan_binary(const char* op, const Shape& a, const Shape& b) {
    BinaryPlan plan;
    if (a == b) {
        plan.out = a;
        plan.same_shape = true;
        plan.stride_a = row_major_strides(a);
        plan.stride_b = plan.stride_a;
        return plan;
    }
    std::size_t rank = std::max(a.size(), b.size());
    plan.out.resize(rank);
    for (std::size_t d = 0; d < rank; ++d) {
        std::size_t da = d + a.size() >= rank ? a[d + a.size() - rank] : 1;
        std::size_t db = d + b.size() >= rank ? b[d + b.size() - rank] : 1;
        if (da != db && da != 1 && db != 1) {
            throw ShapeError(std::string(op) + ": shapes not broadcastable, " + shape_str(a) +
                             " vs " + shape_str(b));
        }
        plan.out[d] = std::max(da, db);
    }
    auto aligned_strides = [rank](const Shape& shape, const Shape& out) {
        std::vector<std::size_t> strides(rank, 0);
        auto own = row_major_strides(shape);
        std::size_t offset = rank - shape.size();
        for (std::size_t d = 0; d < shape.size(); ++d) {
            strides[offset + d] = (shape[d] == 1 && out[offset + d] != 1) ? 0 : own[d];
        }
        return strides;
    };
    plan.stride_a = aligned_strides(a, plan.out);
    plan.stride_b = aligned_strides(b, plan.out);
    return plan;
}

// Calls f(linear_out, offset_a, offset_b) for every output element.
template <typename F>
void for_each_broadcast(const BinaryPlan& plan, F&& f) {
    std::size_t n = shape_size(plan.out);
    std::size_t rank = plan.out.size();
    if (rank == 0) {
        f(std::size_t{0}, std::size_t{0}, std::size_t{0});
        return;
    }
    std::vector<std::size_t> idx(rank, 0);
    std::size_t off_a = 0;
    std::size_t off_b = 0;
    for (std::size_t lin = 0; lin < n; ++lin) {
        f(lin, off_a, off_b);
        for (std::size_t d = rank; d-- > 0;) {
            ++idx[d];
            off_a += plan.stride_a[d];
            off_b += plan.stride_b[d];
            if (idx[d] < plan.out[d]) {
                break;
            }
            off_a -= plan.stride_a[d] * plan.out[d];
            off_b -= plan.stride_b[d] * plan.out[d];
            idx[d] = 0;
        }
    }
}

// --- axis decomposition ------------------------------------------------------

struct AxisSplit {
    std::size_t outer = 1;
    std::size_t len = 1;
    std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
    AxisSplit s;
    for (std::size_t d = 0; d < axis; ++d) {
        s.outer *= shape[d];
    }
    s.len = shape[axis];
    for (std::size_t d = axis + 1; d < shape.size(); ++d) {
        s.inner *= shape[d];
    }
    return s;
}

// --- matmul kernels ----------------------------------------------------------

// C(m x n) += A(m x k) * B(k x n). The k loop is unrolled by four so each
// pass over the C row carries four rank-1 updates.
void matmul_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
               std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        std::size_t l = 0;
        for (; l + 4 <= k; l += 4) {
            double a0 = arow[l], a1 = arow[l + 1], a2 = arow[l + 2], a3 = arow[l + 3];
            const double* b0 = b + l * n;
            const double* b1 = b0 + n;
            const double* b2 = b1 + n;
            const double* b3 = b2 + n;
            for (std::size_t j = 0; j < n; ++j) {
                crow[j] += a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
            }
        }
        for (; l < k; ++l) {
            double av = arow[l];
            const double* brow = b + l * n;
            for (std::size_t j = 0; j < n; ++j) {
                crow[j] += av * brow[j];
            }
        }
    }
}

// C(m x p) += A(m x n) * B(p x n)^T. Four dot products run per pass so the A
// row is reused from registers.
void matmul_nt_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
                   std::size_t p) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * n;
        double* crow = c + i * p;
        std::size_t l = 0;
        for (; l + 4 <= p; l += 4) {
            const double* b0 = b + l * n;
            const double* b1 = b0 + n;
            const double* b2 = b1 + n;
            const double* b3 = b2 + n;
            double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
#pragma omp simd reduction(+ : acc0, acc1, acc2, acc3)
            for (std::size_t j = 0; j < n; ++j) {
                double av = arow[j];
                acc0 += av * b0[j];
                acc1 += av * b1[j];
                acc2 += av * b2[j];
                acc3 += av * b3[j];
            }
            crow[l] += acc0;
            crow[l + 1] += acc1;
            crow[l + 2] += acc2;
            crow[l + 3] += acc3;
        }
        for (; l < p; ++l) {
            const double* brow = b + l * n;
            double acc = 0.0;
#pragma omp simd reduction(+ : acc)
            for (std::size_t j = 0; j < n; ++j) {
                acc += arow[j] * brow[j];
            }
            crow[l] += acc;
        }
    }
}

// C(k x n) += A(m x k)^T * B(m x n). Four C rows are updated per pass so the
// B row is reused from registers.
void matmul_tn_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                   std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        const double* brow = b + i * n;
        std::size_t l = 0;
        for (; l + 4 <= k; l += 4) {
            double a0 = arow[l], a1 = arow[l + 1], a2 = arow[l + 2], a3 = arow[l + 3];
            double* c0 = c + l * n;
            double* c1 = c0 + n;
            double* c2 = c1 + n;
            double* c3 = c2 + n;
            for (std::size_t j = 0; j < n; ++j) {
                double bv = brow[j];
                c0[j] += a0 * bv;
                c1[j] += a1 * bv;
                c2[j] += a2 * bv;
                c3[j] += a3 * bv;
            }
        }
        for (; l < k; ++l) {
            double av = arow[l];
            double* crow = c + l * n;
            for (std::size_t j = 0; j < n; ++j) {
                crow[j] += av * brow[j];
            }
        }
    }
}

// --- shape inference ---------------------------------------------------------

Shape infer_shape(Op op, std::span<const Tensor> inputs, const OpAttrs& attrs) {
    const char* name = op_name(op);
    auto arity = [&](std::size_t want) {
        if (inputs.size() != want) {
            throw ValueError(std::string(name) + ": expected " + std::to_string(want) +
                             " inputs, got " + std::to_string(inputs.size()));
        }
    };
    switch (op) {
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div: {
        arity(2);
        return plan_binary(name, inputs[0].shape(), inputs[1].shape()).out;
    }
    case Op::MatMul:
    case Op::MatMulT: {
        arity(2);
        const Shape& a = inputs[0].shape();
        const Shape& b = inputs[1].shape();
        if (a.size() != 2 || b.size() != 2) {
            throw ShapeError(std::string(name) + ": expects 2-D operands, got " + shape_str(a) +
                             " and " + shape_str(b));
        }
        std::size_t b_inner = op == Op::MatMul ? b[0] : b[1];
        std::size_t b_outer = op == Op::MatMul ? b[1] : b[0];
        if (a[1] != b_inner) {
            throw ShapeError(std::string(name) + ": inner dimensions disagree, " + shape_str(a) +
                             " vs " + shape_str(b));
        }
        return {a[0], b_outer};
    }
    case Op::Concat: {
        if (inputs.empty()) {
            throw ValueError(std::string(name) + ": needs at least one input");
        }
        const Shape& first = inputs[0].shape();
        if (attrs.axis >= first.size()) {
            throw ShapeError(std::string(name) + ": axis " + std::to_string(attrs.axis) +
                             " out of range for " + shape_str(first));
        }
        Shape out = first;
        out[attrs.axis] = 0;
        for (const Tensor& t : inputs) {
            const Shape& s = t.shape();
            if (s.size() != first.size()) {
                throw ShapeError(std::string(name) + ": rank mismatch, " + shape_str(first) +
                                 " vs " + shape_str(s));
            }
            for (std::size_t d = 0; d < s.size(); ++d) {
                if (d != attrs.axis && s[d] != first[d]) {
                    throw ShapeError(std::string(name) + ": non-concatenated dimensions disagree, " +
                                     shape_str(first) + " vs " + shape_str(s));
                }
            }
            out[attrs.axis] += s[attrs.axis];
        }
        return out;
    }
    case Op::Slice: {
        arity(1);
        const Shape& s = inputs[0].shape();
        if (attrs.axis >= s.size()) {
            throw ShapeError(std::string(name) + ": axis " + std::to_string(attrs.axis) +
                             " out of range for " + shape_str(s));
        }
        if (attrs.start >= attrs.stop || attrs.stop > s[attrs.axis]) {
            throw ShapeError(std::string(name) + ": invalid range [" + std::to_string(attrs.start) +
                             ", " + std::to_string(attrs.stop) + ") on axis " +
                             std::to_string(attrs.axis) + " of " + shape_str(s));
        }
        Shape out = s;
        out[attrs.axis] = attrs.stop - attrs.start;
        return out;
    }
    case Op::Transpose: {
        arity(1);
        const Shape& s = inputs[0].shape();
        if (s.size() != 2) {
            throw ShapeError(std::string(name) + ": expects a 2-D tensor, got " + shape_str(s));
        }
        return {s[1], s[0]};
    }
    case Op::Reshape: {
        arity(1);
        check_dims_positive(name, attrs.target_shape);
        if (shape_size(attrs.target_shape) != inputs[0].size()) {
            throw ShapeError(std::string(name) + ": cannot reshape " + shape_str(inputs[0].shape()) +
                             " into " + shape_str(attrs.target_shape));
        }
        return attrs.target_shape;
    }
    case Op::SumAxis:
    case Op::MeanAxis:
    case Op::SoftmaxAxis: {
        arity(1);
        const Shape& s = inputs[0].shape();
        if (attrs.axis >= s.size()) {
            throw ShapeError(std::string(name) + ": axis " + std::to_string(attrs.axis) +
                             " out of range for " + shape_str(s));
        }
        if (op == Op::SoftmaxAxis) {
            return s;
        }
        Shape out;
        for (std::size_t d = 0; d < s.size(); ++d) {
            if (d != attrs.axis) {
                out.push_back(s[d]);
            }
        }
        return out;
    }
    case Op::Sigmoid:
    case Op::Tanh:
    case Op::Exp:
    case Op::Sqrt:
    case Op::LeakyRelu: {
        arity(1);
        return inputs[0].shape();
    }
    }
    throw ValueError("unknown primitive");
}

// --- forward kernels ---------------------------------------------------------

void eval_op(Op op, const OpAttrs& attrs, std::span<const Tensor> inputs,
             std::vector<double>& out) {
    switch (op) {
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div: {
        auto plan = plan_binary(op_name(op), inputs[0].shape(), inputs[1].shape());
        const double* a = inputs[0].values().data();
        const double* b = inputs[1].values().data();
        if (plan.same_shape) {
            std::size_t n = out.size();
            switch (op) {
            case Op::Add: for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i]; break;
            case Op::Sub: for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i]; break;
            case Op::Mul: for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i]; break;
            default:      for (std::size_t i = 0; i < n; ++i) out[i] = a[i] / b[i]; break;
            }
        } else {
            switch (op) {
            case Op::Add:
                for_each_broadcast(plan, [&](std::size_t o, std::size_t ia, std::size_t ib) {
                    out[o] = a[ia] + b[ib];
                });
                break;
            case Op::Sub:
                for_each_broadcast(plan, [&](std::size_t o, std::size_t ia, std::size_t ib) {
                    out[o] = a[ia] - b[ib];
                });
                break;
            case Op::Mul:
                for_each_broadcast(plan, [&](std::size_t o, std::size_t ia, std::size_t ib) {
                    out[o] = a[ia] * b[ib];
                });
                break;
            default:
                for_each_broadcast(plan, [&](std::size_t o, std::size_t ia, std::size_t ib) {
                    out[o] = a[ia] / b[ib];
                });
                break;
            }
        }
        break;
    }
    case Op::MatMul: {
        const Shape& sa = inputs[0].shape();
        const Shape& sb = inputs[1].shape();
        std::fill(out.begin(), out.end(), 0.0);
        matmul_nn(inputs[0].values().data(), inputs[1].values().data(), out.data(), sa[0], sa[1],
                  sb[1]);
        break;
    }
    case Op::MatMulT: {
        const Shape& sa = inputs[0].shape();
        const Shape& sb = inputs[1].shape();
        std::fill(out.begin(), out.end(), 0.0);
        matmul_nt_acc(inputs[0].values().data(), inputs[1].values().data(), out.data(), sa[0],
                      sa[1], sb[0]);
        break;
    }
    case Op::Concat: {
        auto split = split_axis(inputs[0].shape(), attrs.axis);
        std::size_t total_len = 0;
        for (const Tensor& t : inputs) {
            total_len += t.shape()[attrs.axis];
        }
        std::size_t prefix = 0;
        for (const Tensor& t : inputs) {
            std::size_t len = t.shape()[attrs.axis];
            const double* src = t.values().data();
            for (std::size_t o = 0; o < split.outer; ++o) {
                std::memcpy(out.data() + (o * total_len + prefix) * split.inner,
                            src + o * len * split.inner, len * split.inner * sizeof(double));
            }
            prefix += len;
        }
        break;
    }
    case Op::Slice: {
        auto split = split_axis(inputs[0].shape(), attrs.axis);
        std::size_t len = attrs.stop - attrs.start;
        const double* src = inputs[0].values().data();
        for (std::size_t o = 0; o < split.outer; ++o) {
            std::memcpy(out.data() + o * len * split.inner,
                        src + (o * split.len + attrs.start) * split.inner,
                        len * split.inner * sizeof(double));
        }
        break;
    }
    case Op::Transpose: {
        const Shape& s = inputs[0].shape();
        const double* src = inputs[0].values().data();
        for (std::size_t i = 0; i < s[0]; ++i) {
            for (std::size_t j = 0; j < s[1]; ++j) {
                out[j * s[0] + i] = src[i * s[1] + j];
            }
        }
        break;
    }
    case Op::Reshape: {
        auto src = inputs[0].values();
        std::copy(src.begin(), src.end(), out.begin());
        break;
    }
    case Op::SumAxis:
    case Op::MeanAxis: {
        auto split = split_axis(inputs[0].shape(), attrs.axis);
        const double* src = inputs[0].values().data();
        double scale = op == Op::MeanAxis ? 1.0 / static_cast<double>(split.len) : 1.0;
        for (std::size_t o = 0; o < split.outer; ++o) {
            for (std::size_t i = 0; i < split.inner; ++i) {
                double acc = 0.0;
                for (std::size_t k = 0; k < split.len; ++k) {
                    acc += src[(o * split.len + k) * split.inner + i];
                }
                out[o * split.inner + i] = acc * scale;
            }
        }
        break;
    }
    case Op::Sigmoid: {
        auto src = inputs[0].values();
        for (std::size_t i = 0; i < src.size(); ++i) {
            out[i] = 1.0 / (1.0 + std::exp(-src[i]));
        }
        break;
    }
    case Op::Tanh: {
        auto src = inputs[0].values();
        for (std::size_t i = 0; i < src.size(); ++i) {
            out[i] = std::tanh(src[i]);
        }
        break;
    }
    case Op::Exp: {
        auto src = inputs[0].values();
        for (std::size_t i = 0; i < src.size(); ++i) {
            out[i] = std::exp(src[i]);
        }
        break;
    }
    case Op::Sqrt: {
        auto src = inputs[0].values();
        for (std::size_t i = 0; i < src.size(); ++i) {
            out[i] = std::sqrt(src[i]);
        }
        break;
    }
    case Op::LeakyRelu: {
        auto src = inputs[0].values();
        for (std::size_t i = 0; i < src.size(); ++i) {
            out[i] = src[i] > 0.0 ? src[i] : attrs.slope * src[i];
        }
        break;
    }
    case Op::SoftmaxAxis: {
        // Max-subtracted for numerical stability.
        auto split = split_axis(inputs[0].shape(), attrs.axis);
        const double* src = inputs[0].values().data();
        for (std::size_t o = 0; o < split.outer; ++o) {
            for (std::size_t i = 0; i < split.inner; ++i) {
                std::size_t base = o * split.len * split.inner + i;
                double max_v = -std::numeric_limits<double>::infinity();
                for (std::size_t k = 0; k < split.len; ++k) {
                    max_v = std::max(max_v, src[base + k * split.inner]);
                }
                double denom = 0.0;
                for (std::size_t k = 0; k < split.len; ++k) {
                    double e = std::exp(src[base + k * split.inner] - max_v);
                    out[base + k * split.inner] = e;
                    denom += e;
                }
                for (std::size_t k = 0; k < split.len; ++k) {
                    out[base + k * split.inner] /= denom;
                }
            }
        }
        break;
    }
    }
}

} // namespace

// --- Tensor ------------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    check_dims_positive("Tensor::zeros", shape);
    std::size_t n = shape_size(shape);
    return Tensor(make_impl(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    check_dims_positive("Tensor::full", shape);
    if (!std::isfinite(value)) {
        throw NumericError("Tensor::full: non-finite fill value");
    }
    std::size_t n = shape_size(shape);
    return Tensor(make_impl(std::move(shape), std::vector<double>(n, value), requires_grad));
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values, bool requires_grad) {
    check_dims_positive("Tensor::from_values", shape);
    if (shape_size(shape) != values.size()) {
        throw ShapeError("Tensor::from_values: " + shape_str(shape) + " needs " +
                         std::to_string(shape_size(shape)) + " values, got " +
                         std::to_string(values.size()));
    }
    ensure_finite("Tensor::from_values", values);
    return Tensor(make_impl(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value) {
    return from_values({}, {value});
}

const Shape& Tensor::shape() const {
    return impl_->shape;
}

std::size_t Tensor::rank() const {
    return impl_->shape.size();
}

std::size_t Tensor::size() const {
    return impl_->values().size();
}

bool Tensor::requires_grad() const {
    return impl_->requires_grad;
}

void Tensor::set_requires_grad(bool requires_grad) {
    impl_->requires_grad = requires_grad;
}

std::span<const double> Tensor::values() const {
    return impl_->values();
}

std::span<double> Tensor::mutable_values() {
    return impl_->values();
}

double Tensor::item() const {
    if (size() != 1) {
        throw ShapeError("Tensor::item: tensor has " + std::to_string(size()) + " elements");
    }
    return impl_->values()[0];
}

bool Tensor::is_scalar() const {
    return rank() <= 1 && size() == 1;
}

std::span<const double> Tensor::grad() const {
    return impl_->grad;
}

void Tensor::zero_grad() {
    std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
    return Tensor(make_impl(impl_->shape, impl_->values(), impl_->requires_grad));
}

// --- tape --------------------------------------------------------------------

namespace {
thread_local std::vector<Tape*> g_tape_stack;
}

Tape::Tape() {
    g_tape_stack.push_back(this);
}

Tape::~Tape() {
    g_tape_stack.pop_back();
}

Tape* Tape::active() {
    return g_tape_stack.empty() ? nullptr : g_tape_stack.back();
}

void Tape::record(TapeEntry entry) {
    if (consumed_) {
        throw ValueError("Tape::record: record already consumed by backward");
    }
    produced_.insert(entry.output.impl());
    entries_.push_back(std::move(entry));
}

const char* op_name(Op op) {
    switch (op) {
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::MatMul: return "matmul";
    case Op::MatMulT: return "matmul_t";
    case Op::Concat: return "concat";
    case Op::Slice: return "slice";
    case Op::Transpose: return "transpose";
    case Op::Reshape: return "reshape";
    case Op::SumAxis: return "sum_axis";
    case Op::MeanAxis: return "mean_axis";
    case Op::Sigmoid: return "sigmoid";
    case Op::Tanh: return "tanh";
    case Op::Exp: return "exp";
    case Op::Sqrt: return "sqrt";
    case Op::LeakyRelu: return "leaky_relu";
    case Op::SoftmaxAxis: return "softmax_axis";
    }
    return "?";
}

namespace {

// These ops cannot create NaN/Inf from finite inputs, so their outputs skip
// the finiteness scan.
bool preserves_finite(Op op) {
    switch (op) {
    case Op::Concat:
    case Op::Slice:
    case Op::Transpose:
    case Op::Reshape:
    case Op::Sigmoid:
    case Op::Tanh:
    case Op::LeakyRelu:
    case Op::SoftmaxAxis:
        return true;
    default:
        return false;
    }
}

} // namespace

Tensor apply_primitive(Op op, std::span<const Tensor> inputs, const OpAttrs& attrs) {
    for (const Tensor& t : inputs) {
        if (!t.defined()) {
            throw ValueError(std::string(op_name(op)) + ": undefined input tensor");
        }
    }
    Shape out_shape = infer_shape(op, inputs, attrs);

    std::shared_ptr<TensorImpl> out_impl;
    if (op == Op::Reshape) {
        // A reshape is a view: it aliases the input storage.
        out_impl = std::make_shared<TensorImpl>();
        out_impl->shape = std::move(out_shape);
        out_impl->store = inputs[0].impl()->store;
    } else {
        std::vector<double> out_values(shape_size(out_shape));
        eval_op(op, attrs, inputs, out_values);
        if (!preserves_finite(op)) {
            ensure_finite(op_name(op), out_values);
        }
        out_impl = make_impl(std::move(out_shape), std::move(out_values), false);
    }

    bool needs_grad = false;
    for (const Tensor& t : inputs) {
        needs_grad = needs_grad || t.requires_grad();
    }
    out_impl->requires_grad = needs_grad;
    Tensor out(std::move(out_impl));
    if (needs_grad && Tape::active() != nullptr) {
        Tape::active()->record(TapeEntry{op, attrs, {inputs.begin(), inputs.end()}, out});
    }
    return out;
}

namespace {

Tensor apply1(Op op, const Tensor& x, const OpAttrs& attrs = {}) {
    const Tensor in[1] = {x};
    return apply_primitive(op, in, attrs);
}

Tensor apply2(Op op, const Tensor& a, const Tensor& b, const OpAttrs& attrs = {}) {
    const Tensor in[2] = {a, b};
    return apply_primitive(op, in, attrs);
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) { return apply2(Op::Add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return apply2(Op::Sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return apply2(Op::Mul, a, b); }
Tensor div(const Tensor& a, const Tensor& b) { return apply2(Op::Div, a, b); }
Tensor matmul(const Tensor& a, const Tensor& b) { return apply2(Op::MatMul, a, b); }
Tensor matmul_t(const Tensor& a, const Tensor& b) { return apply2(Op::MatMulT, a, b); }

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
    OpAttrs attrs;
    attrs.axis = axis;
    return apply_primitive(Op::Concat, parts, attrs);
}

Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis) {
    return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t stop) {
    OpAttrs attrs;
    attrs.axis = axis;
    attrs.start = start;
    attrs.stop = stop;
    return apply1(Op::Slice, x, attrs);
}

Tensor transpose(const Tensor& x) { return apply1(Op::Transpose, x); }

Tensor reshape(const Tensor& x, Shape shape) {
    OpAttrs attrs;
    attrs.target_shape = std::move(shape);
    return apply1(Op::Reshape, x, attrs);
}

Tensor sum_axis(const Tensor& x, std::size_t axis) {
    OpAttrs attrs;
    attrs.axis = axis;
    return apply1(Op::SumAxis, x, attrs);
}

Tensor mean_axis(const Tensor& x, std::size_t axis) {
    OpAttrs attrs;
    attrs.axis = axis;
    return apply1(Op::MeanAxis, x, attrs);
}

Tensor sigmoid(const Tensor& x) { return apply1(Op::Sigmoid, x); }
Tensor tanh(const Tensor& x) { return apply1(Op::Tanh, x); }
Tensor exp(const Tensor& x) { return apply1(Op::Exp, x); }
Tensor sqrt(const Tensor& x) { return apply1(Op::Sqrt, x); }

Tensor leaky_relu(const Tensor& x, double negative_slope) {
    OpAttrs attrs;
    attrs.slope = negative_slope;
    return apply1(Op::LeakyRelu, x, attrs);
}

Tensor softmax_axis(const Tensor& x, std::size_t axis) {
    OpAttrs attrs;
    attrs.axis = axis;
    return apply1(Op::SoftmaxAxis, x, attrs);
}

Tensor swap_last_axes(const Tensor& x) {
    if (x.rank() != 3) {
        throw ShapeError("swap_last_axes: expects a rank-3 tensor, got " + shape_str(x.shape()));
    }
    const Shape& s = x.shape();
    std::vector<Tensor> columns;
    columns.reserve(s[2]);
    for (std::size_t j = 0; j < s[2]; ++j) {
        columns.push_back(reshape(slice(x, 2, j, j + 1), {s[0], 1, s[1]}));
    }
    return concat(columns, 1);
}

// --- backward ----------------------------------------------------------------

namespace {

// gin[i] is nullptr when input i does not need a gradient.
void backward_entry(const TapeEntry& e, const std::vector<double>& gout,
                    const std::vector<std::vector<double>*>& gin) {
    const OpAttrs& attrs = e.attrs;
    switch (e.op) {
    case Op::Add:
    case Op::Sub: {
        double sign_b = e.op == Op::Add ? 1.0 : -1.0;
        auto plan = plan_binary(op_name(e.op), e.inputs[0].shape(), e.inputs[1].shape());
        if (plan.same_shape) {
            std::size_t n = gout.size();
            if (gin[0] != nullptr) {
                for (std::size_t i = 0; i < n; ++i) (*gin[0])[i] += gout[i];
            }
            if (gin[1] != nullptr) {
                for (std::size_t i = 0; i < n; ++i) (*gin[1])[i] += sign_b * gout[i];
            }
        } else {
            for_each_broadcast(plan, [&](std::size_t o, std::size_t ia, std::size_t ib) {
                if (gin[0] != nullptr) (*gin[0])[ia] += gout[o];
                if (gin[1] != nullptr) (*gin[1])[ib] += sign_b * gout[o];
            });
        }
        break;
    }
    case Op::Mul: {
        auto plan = plan_binary("mul", e.inputs[0].shape(), e.inputs[1].shape());
        const double* a = e.inputs[0].values().data();
        const double* b = e.inputs[1].values().data();
        if (plan.same_shape) {
            std::size_t n = gout.size();
            if (gin[0] != nullptr) {
                for (std::size_t i = 0; i < n; ++i) (*gin[0])[i] += gout[i] * b[i];
            }
            if (gin[1] != nullptr) {
                for (std::size_t i = 0; i < n; ++i) (*gin[1])[i] += gout[i] * a[i];
            }
        } else {
            for_each_broadcast(plan, [&](std::size_t o, std::size_t ia, std::size_t ib) {
                if (gin[0] != nullptr) (*gin[0])[ia] += gout[o] * b[ib];
                if (gin[1] != nullptr) (*gin[1])[ib] += gout[o] * a[ia];
            });
        }
        break;
    }
    case Op::Div: {
        auto plan = plan_binary("div", e.inputs[0].shape(), e.inputs[1].shape());
        const double* a = e.inputs[0].values().data();
        const double* b = e.inputs[1].values().data();
        for_each_broadcast(plan, [&](std::size_t o, std::size_t ia, std::size_t ib) {
            if (gin[0] != nullptr) (*gin[0])[ia] += gout[o] / b[ib];
            if (gin[1] != nullptr) (*gin[1])[ib] -= gout[o] * a[ia] / (b[ib] * b[ib]);
        });
        break;
    }
    case Op::MatMul: {
        const Shape& sa = e.inputs[0].shape();
        const Shape& sb = e.inputs[1].shape();
        if (gin[0] != nullptr) {
            matmul_nt_acc(gout.data(), e.inputs[1].values().data(), gin[0]->data(), sa[0], sb[1],
                          sa[1]);
        }
        if (gin[1] != nullptr) {
            matmul_tn_acc(e.inputs[0].values().data(), gout.data(), gin[1]->data(), sa[0], sa[1],
                          sb[1]);
        }
        break;
    }
    case Op::MatMulT: {
        // y = a b^T: da += g b, db += g^T a
        const Shape& sa = e.inputs[0].shape();
        const Shape& sb = e.inputs[1].shape();
        if (gin[0] != nullptr) {
            matmul_nn(gout.data(), e.inputs[1].values().data(), gin[0]->data(), sa[0], sb[0],
                      sa[1]);
        }
        if (gin[1] != nullptr) {
            matmul_tn_acc(gout.data(), e.inputs[0].values().data(), gin[1]->data(), sa[0], sb[0],
                          sa[1]);
        }
        break;
    }
    case Op::Concat: {
        auto split = split_axis(e.inputs[0].shape(), attrs.axis);
        std::size_t total_len = e.output.shape()[attrs.axis];
        std::size_t prefix = 0;
        for (std::size_t p = 0; p < e.inputs.size(); ++p) {
            std::size_t len = e.inputs[p].shape()[attrs.axis];
            if (gin[p] != nullptr) {
                for (std::size_t o = 0; o < split.outer; ++o) {
                    const double* src = gout.data() + (o * total_len + prefix) * split.inner;
                    double* dst = gin[p]->data() + o * len * split.inner;
                    for (std::size_t i = 0; i < len * split.inner; ++i) {
                        dst[i] += src[i];
                    }
                }
            }
            prefix += len;
        }
        break;
    }
    case Op::Slice: {
        if (gin[0] == nullptr) break;
        auto split = split_axis(e.inputs[0].shape(), attrs.axis);
        std::size_t len = attrs.stop - attrs.start;
        for (std::size_t o = 0; o < split.outer; ++o) {
            const double* src = gout.data() + o * len * split.inner;
            double* dst = gin[0]->data() + (o * split.len + attrs.start) * split.inner;
            for (std::size_t i = 0; i < len * split.inner; ++i) {
                dst[i] += src[i];
            }
        }
        break;
    }
    case Op::Transpose: {
        if (gin[0] == nullptr) break;
        const Shape& s = e.inputs[0].shape();
        for (std::size_t i = 0; i < s[0]; ++i) {
            for (std::size_t j = 0; j < s[1]; ++j) {
                (*gin[0])[i * s[1] + j] += gout[j * s[0] + i];
            }
        }
        break;
    }
    case Op::Reshape: {
        if (gin[0] == nullptr) break;
        for (std::size_t i = 0; i < gout.size(); ++i) {
            (*gin[0])[i] += gout[i];
        }
        break;
    }
    case Op::SumAxis:
    case Op::MeanAxis: {
        if (gin[0] == nullptr) break;
        auto split = split_axis(e.inputs[0].shape(), attrs.axis);
        double scale = e.op == Op::MeanAxis ? 1.0 / static_cast<double>(split.len) : 1.0;
        for (std::size_t o = 0; o < split.outer; ++o) {
            for (std::size_t k = 0; k < split.len; ++k) {
                for (std::size_t i = 0; i < split.inner; ++i) {
                    (*gin[0])[(o * split.len + k) * split.inner + i] +=
                        gout[o * split.inner + i] * scale;
                }
            }
        }
        break;
    }
    case Op::Sigmoid: {
        if (gin[0] == nullptr) break;
        auto y = e.output.values();
        for (std::size_t i = 0; i < y.size(); ++i) {
            (*gin[0])[i] += gout[i] * y[i] * (1.0 - y[i]);
        }
        break;
    }
    case Op::Tanh: {
        if (gin[0] == nullptr) break;
        auto y = e.output.values();
        for (std::size_t i = 0; i < y.size(); ++i) {
            (*gin[0])[i] += gout[i] * (1.0 - y[i] * y[i]);
        }
        break;
    }
    case Op::Exp: {
        if (gin[0] == nullptr) break;
        auto y = e.output.values();
        for (std::size_t i = 0; i < y.size(); ++i) {
            (*gin[0])[i] += gout[i] * y[i];
        }
        break;
    }
    case Op::Sqrt: {
        if (gin[0] == nullptr) break;
        auto y = e.output.values();
        for (std::size_t i = 0; i < y.size(); ++i) {
            (*gin[0])[i] += gout[i] * 0.5 / y[i];
        }
        break;
    }
    case Op::LeakyRelu: {
        if (gin[0] == nullptr) break;
        auto x = e.inputs[0].values();
        for (std::size_t i = 0; i < x.size(); ++i) {
            (*gin[0])[i] += x[i] > 0.0 ? gout[i] : attrs.slope * gout[i];
        }
        break;
    }
    case Op::SoftmaxAxis: {
        if (gin[0] == nullptr) break;
        auto split = split_axis(e.inputs[0].shape(), attrs.axis);
        const double* y = e.output.values().data();
        for (std::size_t o = 0; o < split.outer; ++o) {
            for (std::size_t i = 0; i < split.inner; ++i) {
                std::size_t base = o * split.len * split.inner + i;
                double dot = 0.0;
                for (std::size_t k = 0; k < split.len; ++k) {
                    std::size_t at = base + k * split.inner;
                    dot += gout[at] * y[at];
                }
                for (std::size_t k = 0; k < split.len; ++k) {
                    std::size_t at = base + k * split.inner;
                    (*gin[0])[at] += y[at] * (gout[at] - dot);
                }
            }
        }
        break;
    }
    }
}

} // namespace

void Tape::backward(const Tensor& loss) {
    if (consumed_) {
        throw ValueError("Tape::backward: record already consumed");
    }
    if (!loss.defined()) {
        throw ValueError("Tape::backward: undefined loss tensor");
    }
    if (!loss.is_scalar()) {
        throw ShapeError("Tape::backward: loss must be scalar, got " + shape_str(loss.shape()));
    }
    if (entries_.empty() || entries_.back().output.impl() != loss.impl()) {
        throw ValueError("Tape::backward: loss is not the final output of the record");
    }

    std::unordered_map<const TensorImpl*, std::vector<double>> grads;
    grads.emplace(loss.impl(), std::vector<double>{1.0});

    for (std::size_t i = entries_.size(); i-- > 0;) {
        const TapeEntry& e = entries_[i];
        auto it = grads.find(e.output.impl());
        if (it == grads.end()) {
            continue; // output did not contribute to the loss
        }
        std::vector<double> gout = std::move(it->second);
        grads.erase(it);

        std::vector<std::vector<double>*> gin(e.inputs.size(), nullptr);
        for (std::size_t j = 0; j < e.inputs.size(); ++j) {
            if (!e.inputs[j].requires_grad()) {
                continue;
            }
            auto [slot, inserted] =
                grads.try_emplace(e.inputs[j].impl(), std::vector<double>());
            if (inserted) {
                slot->second.assign(e.inputs[j].size(), 0.0);
            }
            gin[j] = &slot->second;
        }
        backward_entry(e, gout, gin);
    }

    // Everything left in the map was never produced by this tape: leaves.
    for (auto& [impl, g] : grads) {
        if (produced_.contains(impl) || !impl->requires_grad) {
            continue;
        }
        auto* leaf = const_cast<TensorImpl*>(impl);
        if (leaf->grad.empty()) {
            leaf->grad.assign(leaf->values().size(), 0.0);
        }
        for (std::size_t i = 0; i < g.size(); ++i) {
            leaf->grad[i] += g[i];
        }
    }
    consumed_ = true;
}

bool Tape::verify_replay() const {
    for (const TapeEntry& e : entries_) {
        std::vector<double> scratch(e.output.size());
        eval_op(e.op, e.attrs, e.inputs, scratch);
        auto stored = e.output.values();
        if (std::memcmp(scratch.data(), stored.data(), scratch.size() * sizeof(double)) != 0) {
            return false;
        }
    }
    return true;
}

// --- finite differences ------------------------------------------------------

double finite_diff_check(const ScalarFn& f, const Tensor& x, double eps, std::size_t max_checks) {
    if (eps <= 0.0) {
        throw ValueError("finite_diff_check: eps must be positive");
    }
    Tensor var = x.clone();
    var.set_requires_grad(true);
    std::vector<double> analytic(var.size(), 0.0);
    {
        Tape tape;
        Tensor loss = f(var);
        if (!loss.is_scalar()) {
            throw ShapeError("finite_diff_check: f must return a scalar, got " +
                             shape_str(loss.shape()));
        }
        tape.backward(loss);
        auto g = var.grad();
        if (!g.empty()) {
            analytic.assign(g.begin(), g.end());
        }
    }

    Tensor probe = x.clone();
    probe.set_requires_grad(false);
    std::size_t n = probe.size();
    std::size_t checks = (max_checks == 0 || max_checks >= n) ? n : max_checks;
    std::size_t stride = n / checks;

    double max_rel_err = 0.0;
    auto probe_values = probe.mutable_values();
    for (std::size_t c = 0; c < checks; ++c) {
        std::size_t i = c * stride;
        double original = probe_values[i];
        probe_values[i] = original + eps;
        double plus = f(probe).item();
        probe_values[i] = original - eps;
        double minus = f(probe).item();
        probe_values[i] = original;
        double numeric = (plus - minus) / (2.0 * eps);
        double rel = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
        max_rel_err = std::max(max_rel_err, rel);
    }
    return max_rel_err;
}

} // namespace stgat
