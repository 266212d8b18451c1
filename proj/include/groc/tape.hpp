#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "groc/dense_matrix.hpp"

namespace groc {

// Handle to a value recorded on a Tape.
struct Var {
    std::uint32_t tape = 0;
    std::uint32_t index = 0;
};

// A differentiable primitive. forward() may cache intermediates on the op
// object; backward() must accumulate (+=) into the non-null entries of
// `grad_in`, which are null for inputs that do not require gradients.
class Op {
public:
    virtual ~Op() = default;
    virtual std::string name() const = 0;
    virtual DenseMatrix forward(std::span<const DenseMatrix* const> in) = 0;
    virtual void backward(std::span<const DenseMatrix* const> in, const DenseMatrix& out,
                          const DenseMatrix& grad_out, std::span<DenseMatrix* const> grad_in) = 0;
};

// Recorded computation for reverse-mode differentiation.
//
// Records are kept in creation order. replay() re-runs every non-leaf record
// forward from the current leaf values (used by finite-difference checks);
// backward() visits records in strict reverse order.
class Tape {
public:
    Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;
    Tape(Tape&&) = default;
    Tape& operator=(Tape&&) = default;

    // Differentiable input (parameters, edge-weight slots).
    Var leaf(DenseMatrix value);
    // Non-differentiable input.
    Var constant(DenseMatrix value);
    Var record(std::unique_ptr<Op> op, std::vector<Var> inputs);

    const DenseMatrix& value(Var v) const;
    const DenseMatrix& grad(Var v) const;
    bool requires_grad(Var v) const;
    void set_value(Var leaf_var, DenseMatrix value);

    void replay();

    // Gradients of the 1x1 `loss` with respect to every record. Throws
    // NumericalError when a leaf gradient is non-finite.
    void backward(Var loss);

    std::size_t size() const noexcept { return records_.size(); }
    std::uint32_t id() const noexcept { return id_; }

    // Diagnostics raised by ops (e.g. zero-norm rows in cosine similarity).
    std::size_t& counter(const std::string& name);
    std::size_t counter_value(const std::string& name) const;

private:
    struct Record {
        std::unique_ptr<Op> op;  // null for leaves and constants
        std::vector<std::uint32_t> inputs;
        DenseMatrix value;
        DenseMatrix grad;
        bool requires_grad = false;
    };

    const Record& at(Var v) const;
    Record& at(Var v);

    std::uint32_t id_;
    std::vector<Record> records_;
    std::map<std::string, std::size_t> counters_;  // node-based: references stay valid
};

namespace ops {

Var matmul(Tape& t, Var a, Var b);
Var add(Tape& t, Var a, Var b);
// Element-wise product.
Var mul(Tape& t, Var a, Var b);
// x (n x c) + bias (1 x c) broadcast over rows.
Var add_bias(Tape& t, Var x, Var bias);
Var relu(Tape& t, Var x);
Var prelu(Tape& t, Var x, double slope);
Var elu(Tape& t, Var x, double alpha = 1.0);
Var exp(Tape& t, Var x);
// Throws NumericalError on non-positive entries.
Var log(Tape& t, Var x);
// Sum of all entries, 1x1.
Var sum(Tape& t, Var x);
Var scale(Tape& t, Var x, double s);
// Mean over `rows` of -log softmax(logits)[r, labels[r]], 1x1.
Var softmax_cross_entropy(Tape& t, Var logits, std::vector<int> labels,
                          std::vector<std::size_t> rows);

} // namespace ops

struct FdReport {
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    std::size_t checked = 0;
    std::string worst;  // "<leaf index>[<entry>]: analytic=..., numeric=..."
};

// Central differences (f(x+eps) - f(x-eps)) / 2 eps for every entry of the
// given leaves, compared with the analytic gradient from backward(loss).
// Entries whose absolute error is within `abs_floor` count as exact.
FdReport fd_check(Tape& tape, Var loss, std::span<const Var> slots, double eps = 1e-4,
                  double abs_floor = 1e-8);

} // namespace groc
