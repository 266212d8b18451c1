#include "groc/tape.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>

#include "groc/errors.hpp"

namespace groc {

namespace {

std::atomic<std::uint32_t> next_tape_id{1};

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* what) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(what) + ": " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
    }
}

class MatmulOp final : public Op {
public:
    std::string name() const override { return "matmul"; }
    DenseMatrix forward(std::span<const DenseMatrix* const> in) override {
        return multiply(*in[0], *in[1]);
    }
    void backward(std::span<const DenseMatrix* const> in, const DenseMatrix&,
                  const DenseMatrix& g, std::span<DenseMatrix* const> gin) override {
        if (gin[0]) *gin[0] += multiply_nt(g, *in[1]);
        if (gin[1]) *gin[1] += multiply_tn(*in[0], g);
    }
};

class AddOp final : public Op {
public:
    std::string name() const override { return "add"; }
    DenseMatrix forward(std::span<const DenseMatrix* const> in) override {
        require_same_shape(*in[0], *in[1], "add");
        DenseMatrix out = *in[0];
        out += *in[1];
        return out;
    }
    void backward(std::span<const DenseMatrix* const>, const DenseMatrix&, const DenseMatrix& g,
                  std::span<DenseMatrix* const> gin) override {
        if (gin[0]) *gin[0] += g;
        if (gin[1]) *gin[1] += g;
    }
};

class MulOp final : public Op {
public:
    std::string name() const override { return "mul"; }
    DenseMatrix forward(std::span<const DenseMatrix* const> in) override {
        require_same_shape(*in[0], *in[1], "mul");
        DenseMatrix out = *in[0];
        for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] *= in[1]->values()[i];
        return out;
    }
    void backward(std::span<const DenseMatrix* const> in, const DenseMatrix&, const DenseMatrix& g,
                  std::span<DenseMatrix* const> gin) override {
        for (int k = 0; k < 2; ++k) {
            if (!gin[k]) continue;
            const auto& other = in[1 - k]->values();
            auto& dst = gin[k]->values();
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g.values()[i] * other[i];
        }
    }
};

class AddBiasOp final : public Op {
public:
    std::string name() const override { return "add_bias"; }
    DenseMatrix forward(std::span<const DenseMatrix* const> in) override {
        const auto& x = *in[0];
        const auto& b = *in[1];
        if (b.rows() != 1 || b.cols() != x.cols())
            throw ShapeError("add_bias: bias must be 1x" + std::to_string(x.cols()));
        DenseMatrix out = x;
        for (std::size_t r = 0; r < out.rows(); ++r) {
            auto row = out.row(r);
            for (std::size_t c = 0; c < row.size(); ++c) row[c] += b(0, c);
        }
        return out;
    }
    void backward(std::span<const DenseMatrix* const>, const DenseMatrix&, const DenseMatrix& g,
                  std::span<DenseMatrix* const> gin) override {
        if (gin[0]) *gin[0] += g;
        if (gin[1]) {
            for (std::size_t r = 0; r < g.rows(); ++r)
                for (std::size_t c = 0; c < g.cols(); ++c) (*gin[1])(0, c) += g(r, c);
        }
    }
};

// Element-wise unary op given f and f' (f' evaluated on input and output).
template <typename F, typename DF>
class UnaryOp final : public Op {
public:
    UnaryOp(std::string name, F f, DF df) : name_(std::move(name)), f_(f), df_(df) {}
    std::string name() const override { return name_; }
    DenseMatrix forward(std::span<const DenseMatrix* const> in) override {
        DenseMatrix out = *in[0];
        for (auto& v : out.values()) v = f_(v);
        return out;
    }
    void backward(std::span<const DenseMatrix* const> in, const DenseMatrix& out,
                  const DenseMatrix& g, std::span<DenseMatrix* const> gin) override {
        if (!gin[0]) return;
        auto& dst = gin[0]->values();
        for (std::size_t i = 0; i < dst.size(); ++i)
            dst[i] += g.values()[i] * df_(in[0]->values()[i], out.values()[i]);
    }

private:
    std::string name_;
    F f_;
    DF df_;
};

template <typename F, typename DF>
std::unique_ptr<Op> make_unary(std::string name, F f, DF df) {
    return std::make_unique<UnaryOp<F, DF>>(std::move(name), f, df);
}

class LogOp final : public Op {
public:
    std::string name() const override { return "log"; }
    DenseMatrix forward(std::span<const DenseMatrix* const> in) override {
        DenseMatrix out = *in[0];
        for (auto& v : out.values()) {
            if (!(v > 0.0)) throw NumericalError("log of non-positive value");
            v = std::log(v);
        }
        return out;
    }
    void backward(std::span<const DenseMatrix* const> in, const DenseMatrix&, const DenseMatrix& g,
                  std::span<DenseMatrix* const> gin) override {
        if (!gin[0]) return;
        auto& dst = gin[0]->values();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g.values()[i] / in[0]->values()[i];
    }
};

class SumOp final : public Op {
public:
    std::string name() const override { return "sum"; }
    DenseMatrix forward(std::span<const DenseMatrix* const> in) override {
        double s = 0.0;
        for (double v : in[0]->values()) s += v;
        return DenseMatrix::scalar(s);
    }
    void backward(std::span<const DenseMatrix* const>, const DenseMatrix&, const DenseMatrix& g,
                  std::span<DenseMatrix* const> gin) override {
        if (!gin[0]) return;
        const double s = g.item();
        for (auto& v : gin[0]->values()) v += s;
    }
};

class ScaleOp final : public Op {
public:
    explicit ScaleOp(double s) : s_(s) {}
    std::string name() const override { return "scale"; }
    DenseMatrix forward(std::span<const DenseMatrix* const> in) override {
        DenseMatrix out = *in[0];
        out *= s_;
        return out;
    }
    void backward(std::span<const DenseMatrix* const>, const DenseMatrix&, const DenseMatrix& g,
                  std::span<DenseMatrix* const> gin) override {
        if (!gin[0]) return;
        auto& dst = gin[0]->values();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += s_ * g.values()[i];
    }

private:
    double s_;
};

class SoftmaxCrossEntropyOp final : public Op {
public:
    SoftmaxCrossEntropyOp(std::vector<int> labels, std::vector<std::size_t> rows)
        : labels_(std::move(labels)), rows_(std::move(rows)) {}
    std::string name() const override { return "softmax_cross_entropy"; }
    DenseMatrix forward(std::span<const DenseMatrix* const> in) override {
        const auto& z = *in[0];
        if (rows_.empty()) throw ShapeError("softmax_cross_entropy: no rows");
        if (labels_.size() != z.rows()) throw ShapeError("softmax_cross_entropy: label count");
        probs_ = DenseMatrix(rows_.size(), z.cols());
        double loss = 0.0;
        for (std::size_t i = 0; i < rows_.size(); ++i) {
            auto r = z.row(rows_[i]);
            const int y = labels_[rows_[i]];
            if (y < 0 || std::size_t(y) >= z.cols())
                throw ShapeError("softmax_cross_entropy: label out of range");
            double m = *std::max_element(r.begin(), r.end());
            double s = 0.0;
            for (std::size_t c = 0; c < r.size(); ++c) {
                probs_(i, c) = std::exp(r[c] - m);
                s += probs_(i, c);
            }
            for (std::size_t c = 0; c < r.size(); ++c) probs_(i, c) /= s;
            loss += -(r[std::size_t(y)] - m - std::log(s));
        }
        return DenseMatrix::scalar(loss / double(rows_.size()));
    }
    void backward(std::span<const DenseMatrix* const>, const DenseMatrix&, const DenseMatrix& g,
                  std::span<DenseMatrix* const> gin) override {
        if (!gin[0]) return;
        const double s = g.item() / double(rows_.size());
        for (std::size_t i = 0; i < rows_.size(); ++i) {
            auto dst = gin[0]->row(rows_[i]);
            const int y = labels_[rows_[i]];
            for (std::size_t c = 0; c < dst.size(); ++c)
                dst[c] += s * (probs_(i, c) - (int(c) == y ? 1.0 : 0.0));
        }
    }

private:
    std::vector<int> labels_;
    std::vector<std::size_t> rows_;
    DenseMatrix probs_;
};

} // namespace

Tape::Tape() : id_(next_tape_id.fetch_add(1)) {}

const Tape::Record& Tape::at(Var v) const {
    if (v.tape != id_ || v.index >= records_.size())
        throw std::invalid_argument("Var does not belong to this tape");
    return records_[v.index];
}

Tape::Record& Tape::at(Var v) {
    return const_cast<Record&>(static_cast<const Tape&>(*this).at(v));
}

Var Tape::leaf(DenseMatrix value) {
    records_.push_back({nullptr, {}, std::move(value), {}, true});
    return {id_, std::uint32_t(records_.size() - 1)};
}

Var Tape::constant(DenseMatrix value) {
    records_.push_back({nullptr, {}, std::move(value), {}, false});
    return {id_, std::uint32_t(records_.size() - 1)};
}

Var Tape::record(std::unique_ptr<Op> op, std::vector<Var> inputs) {
    std::vector<std::uint32_t> idx;
    std::vector<const DenseMatrix*> in;
    bool rg = false;
    for (Var v : inputs) {
        const auto& r = at(v);
        idx.push_back(v.index);
        in.push_back(&r.value);
        rg = rg || r.requires_grad;
    }
    DenseMatrix out = op->forward(in);
    records_.push_back({std::move(op), std::move(idx), std::move(out), {}, rg});
    return {id_, std::uint32_t(records_.size() - 1)};
}

const DenseMatrix& Tape::value(Var v) const { return at(v).value; }

const DenseMatrix& Tape::grad(Var v) const {
    const auto& r = at(v);
    if (!r.requires_grad) throw std::invalid_argument("Var does not require gradients");
    return r.grad;
}

bool Tape::requires_grad(Var v) const { return at(v).requires_grad; }

void Tape::set_value(Var v, DenseMatrix value) {
    auto& r = at(v);
    if (r.op) throw std::invalid_argument("set_value on a non-leaf record");
    if (!r.value.same_shape(value)) throw ShapeError("set_value: shape mismatch");
    r.value = std::move(value);
}

void Tape::replay() {
    std::vector<const DenseMatrix*> in;
    for (auto& r : records_) {
        if (!r.op) continue;
        in.clear();
        for (auto i : r.inputs) in.push_back(&records_[i].value);
        r.value = r.op->forward(in);
    }
}

void Tape::backward(Var loss) {
    const auto& lr = at(loss);
    if (lr.value.rows() != 1 || lr.value.cols() != 1)
        throw ShapeError("backward: loss must be a 1x1 value");
    if (!lr.requires_grad) throw std::invalid_argument("backward: loss does not depend on any leaf");
    if (!std::isfinite(lr.value.item())) throw NumericalError("backward: non-finite loss");

    for (auto& r : records_) {
        if (r.requires_grad) r.grad = DenseMatrix(r.value.rows(), r.value.cols());
    }
    records_[loss.index].grad(0, 0) = 1.0;

    std::vector<const DenseMatrix*> in;
    std::vector<DenseMatrix*> gin;
    for (std::size_t k = loss.index + 1; k-- > 0;) {
        auto& r = records_[k];
        if (!r.op || !r.requires_grad) continue;
        in.clear();
        gin.clear();
        for (auto i : r.inputs) {
            in.push_back(&records_[i].value);
            gin.push_back(records_[i].requires_grad ? &records_[i].grad : nullptr);
        }
        r.op->backward(in, r.value, r.grad, gin);
    }

    for (std::size_t k = 0; k < records_.size(); ++k) {
        const auto& r = records_[k];
        if (!r.op && r.requires_grad && !r.grad.all_finite())
            throw NumericalError("backward: non-finite gradient at leaf " + std::to_string(k));
    }
}

std::size_t& Tape::counter(const std::string& name) { return counters_[name]; }

std::size_t Tape::counter_value(const std::string& name) const {
    auto it = counters_.find(name);
    return it == counters_.end() ? 0 : it->second;
}

namespace ops {

Var matmul(Tape& t, Var a, Var b) { return t.record(std::make_unique<MatmulOp>(), {a, b}); }
Var add(Tape& t, Var a, Var b) { return t.record(std::make_unique<AddOp>(), {a, b}); }
Var mul(Tape& t, Var a, Var b) { return t.record(std::make_unique<MulOp>(), {a, b}); }
Var add_bias(Tape& t, Var x, Var bias) { return t.record(std::make_unique<AddBiasOp>(), {x, bias}); }

Var relu(Tape& t, Var x) {
    return t.record(make_unary(
                        "relu", [](double v) { return v > 0.0 ? v : 0.0; },
                        [](double in, double) { return in > 0.0 ? 1.0 : 0.0; }),
                    {x});
}

Var prelu(Tape& t, Var x, double slope) {
    return t.record(make_unary(
                        "prelu", [slope](double v) { return v > 0.0 ? v : slope * v; },
                        [slope](double in, double) { return in > 0.0 ? 1.0 : slope; }),
                    {x});
}

Var elu(Tape& t, Var x, double alpha) {
    return t.record(make_unary(
                        "elu",
                        [alpha](double v) { return v > 0.0 ? v : alpha * std::expm1(v); },
                        [alpha](double in, double out) { return in > 0.0 ? 1.0 : out + alpha; }),
                    {x});
}

Var exp(Tape& t, Var x) {
    return t.record(make_unary(
                        "exp", [](double v) { return std::exp(v); },
                        [](double, double out) { return out; }),
                    {x});
}

Var log(Tape& t, Var x) { return t.record(std::make_unique<LogOp>(), {x}); }
Var sum(Tape& t, Var x) { return t.record(std::make_unique<SumOp>(), {x}); }
Var scale(Tape& t, Var x, double s) { return t.record(std::make_unique<ScaleOp>(s), {x}); }

Var softmax_cross_entropy(Tape& t, Var logits, std::vector<int> labels,
                          std::vector<std::size_t> rows) {
    return t.record(std::make_unique<SoftmaxCrossEntropyOp>(std::move(labels), std::move(rows)),
                    {logits});
}

} // namespace ops

FdReport fd_check(Tape& tape, Var loss, std::span<const Var> slots, double eps, double abs_floor) {
    if (!(eps > 0.0)) throw std::invalid_argument("fd_check: eps must be positive");
    tape.backward(loss);
    std::vector<DenseMatrix> analytic;
    for (Var s : slots) analytic.push_back(tape.grad(s));

    FdReport rep;
    for (std::size_t k = 0; k < slots.size(); ++k) {
        const DenseMatrix base = tape.value(slots[k]);
        for (std::size_t i = 0; i < base.size(); ++i) {
            DenseMatrix x = base;
            x.values()[i] = base.values()[i] + eps;
            tape.set_value(slots[k], x);
            tape.replay();
            const double fp = tape.value(loss).item();
            x.values()[i] = base.values()[i] - eps;
            tape.set_value(slots[k], x);
            tape.replay();
            const double fm = tape.value(loss).item();

            const double numeric = (fp - fm) / (2.0 * eps);
            const double a = analytic[k].values()[i];
            const double abs_err = std::abs(a - numeric);
            const double rel =
                abs_err <= abs_floor ? 0.0 : abs_err / std::max(std::abs(a), std::abs(numeric));
            rep.max_abs_error = std::max(rep.max_abs_error, abs_err);
            if (rel > rep.max_rel_error || rep.worst.empty()) {
                if (rel >= rep.max_rel_error) {
                    std::ostringstream os;
                    os.precision(12);
                    os << k << "[" << i << "]: analytic=" << a << ", numeric=" << numeric;
                    rep.worst = os.str();
                }
                rep.max_rel_error = std::max(rep.max_rel_error, rel);
            }
            ++rep.checked;
        }
        tape.set_value(slots[k], base);
    }
    tape.replay();
    return rep;
}

} // namespace groc
