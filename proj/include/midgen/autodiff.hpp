// Reverse-mode autodiff on a flat tape.
//
// Fixed op set over rank-0/1/2 double tensors, no implicit broadcasting:
// operand shapes must conform exactly or the op throws std::invalid_argument
// naming the op and both shapes. Node values live in a bump arena owned by the
// tape; leaves can either copy their data in or borrow caller-owned storage
// (zero copy, the caller keeps it alive). backward() sweeps the tape once in
// reverse insertion order, so every node is visited exactly once and gradient
// accumulation happens in a fixed order; repeated runs are bit-identical.
//
// Shape rules:
//   matmul  [m,k] x [k,n] -> [m,n], or [m,k] x [k] -> [m]
//   add/sub/mul  same shape -> same shape, componentwise
//   scale   any shape -> same shape, multiplies by the op's constant attr
//   concat  [n] x [m] -> [n+m]
//   silu/tanh  any shape -> same shape, componentwise
//   sum/mean/sq_norm  any shape -> scalar
//   dot     two tensors of one same shape -> scalar (flattened inner product)
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "midgen/tensor.hpp"

namespace midgen {

enum class Op : uint8_t {
    leaf,
    matmul,
    add,
    mul,
    sub,
    scale,
    concat,
    silu,
    tanh,
    sum,
    mean,
    sq_norm,
    dot,
};

const char* op_name(Op op);

struct Node {
    Op op = Op::leaf;
    int32_t a = -1;
    int32_t b = -1;
    double attr = 0.0;           // constant factor for Op::scale
    Shape shape;
    size_t off = 0;              // arena offset (value and gradient share it)
    const double* ext = nullptr; // set for borrowing leaves; value lives here
};

class Tape {
public:
    int leaf(const Tensor& t);
    int leaf(Shape s, std::span<const double> data);
    int leaf_external(Shape s, const double* data);
    int apply(Op op, int a, int b = -1, double attr = 0.0);

    size_t size() const { return nodes_.size(); }
    const Shape& shape(int id) const { return node(id).shape; }
    std::span<const double> value(int id) const;
    Tensor value_tensor(int id) const;

    // Fills gradients of `loss_id` (rank-0) with respect to every node.
    void backward(int loss_id);
    std::span<const double> grad(int id) const;

    // True when `leaf_id` feeds into `node_id` through the recorded graph.
    bool reaches(int node_id, int leaf_id) const;

    // Rewind for reuse; keeps arena capacity, invalidates all node ids.
    void reset();

private:
    const Node& node(int id) const;
    double* alloc(int64_t n);
    double* value_ptr(const Node& n);
    const double* value_ptr(const Node& n) const;
    void check_finite(const Node& n, Op op) const;

    std::vector<Node> nodes_;
    std::vector<double> val_arena_;
    std::vector<double> grad_arena_;
    size_t used_ = 0;
    bool has_grad_ = false;
};

// Max relative error between analytic gradients and central finite differences
// for a scalar function built on a tape from a single input leaf:
//   rel = |analytic - central| / (|analytic| + |central| + 1e-12), max over coords.
// `build` receives a fresh tape and the input leaf id and returns the loss id.
double grad_check(const std::function<int(Tape&, int)>& build, const Tensor& point, double h);

}  // namespace midgen
