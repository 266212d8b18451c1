#include "groc/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "groc/errors.hpp"

namespace groc {

namespace {

void check_temperature(const SimilarityConfig& cfg) {
    if (!(cfg.temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
}

// Unit-normalized anchor rows; zero rows stay zero.
struct Normalized {
    DenseMatrix rows;
    std::vector<double> norms;
    std::size_t zero_rows = 0;
};

Normalized normalize_rows(const DenseMatrix& h, std::span<const NodeId> anchors) {
    Normalized out{DenseMatrix(anchors.size(), h.cols()), std::vector<double>(anchors.size()), 0};
    for (std::size_t i = 0; i < anchors.size(); ++i) {
        if (anchors[i] >= h.rows()) throw ShapeError("anchor id outside the embedding matrix");
        auto src = h.row(anchors[i]);
        double s = 0.0;
        for (double x : src) s += x * x;
        const double norm = std::sqrt(s);
        out.norms[i] = norm;
        if (norm == 0.0) {
            ++out.zero_rows;
            continue;
        }
        auto dst = out.rows.row(i);
        for (std::size_t c = 0; c < src.size(); ++c) dst[c] = src[c] / norm;
    }
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Logits of anchor i in direction (a -> b): [a_i.b_j for all j] followed by
// [a_i.a_j for j != i], all divided by t. The positive is entry i.
void direction_logits(const DenseMatrix& a, const DenseMatrix& b, std::size_t i, double t,
                      std::vector<double>& out) {
    const std::size_t k = a.rows();
    out.clear();
    for (std::size_t j = 0; j < k; ++j) out.push_back(dot(a.row(i), b.row(j)) / t);
    for (std::size_t j = 0; j < k; ++j)
        if (j != i) out.push_back(dot(a.row(i), a.row(j)) / t);
}

double log_sum_exp(const std::vector<double>& x) {
    const double m = *std::max_element(x.begin(), x.end());
    double s = 0.0;
    for (double v : x) s += std::exp(v - m);
    return m + std::log(s);
}

double direction_loss(const DenseMatrix& a, const DenseMatrix& b, std::size_t i, double t,
                      std::vector<double>& scratch) {
    direction_logits(a, b, i, t, scratch);
    return log_sum_exp(scratch) - scratch[i];
}

double objective_on_normalized(const DenseMatrix& a, const DenseMatrix& b, double t) {
    std::vector<double> scratch;
    double total = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        total += direction_loss(a, b, i, t, scratch) + direction_loss(b, a, i, t, scratch);
    return total / (2.0 * double(a.rows()));
}

// Accumulates d(weight * l_i(a -> b)) / d(a, b) into (ga, gb).
void direction_backward(const DenseMatrix& a, const DenseMatrix& b, std::size_t i, double t,
                        double weight, DenseMatrix& ga, DenseMatrix& gb,
                        std::vector<double>& scratch) {
    const std::size_t k = a.rows();
    const std::size_t c = a.cols();
    direction_logits(a, b, i, t, scratch);
    const double lse = log_sum_exp(scratch);
    auto ai = a.row(i);
    auto gai = ga.row(i);
    for (std::size_t j = 0; j < k; ++j) {
        const double p = std::exp(scratch[j] - lse);
        const double coef = weight * (p - (j == i ? 1.0 : 0.0)) / t;
        auto bj = b.row(j);
        auto gbj = gb.row(j);
        for (std::size_t x = 0; x < c; ++x) {
            gai[x] += coef * bj[x];
            gbj[x] += coef * ai[x];
        }
    }
    std::size_t pos = k;
    for (std::size_t j = 0; j < k; ++j) {
        if (j == i) continue;
        const double coef = weight * std::exp(scratch[pos++] - lse) / t;
        auto aj = a.row(j);
        auto gaj = ga.row(j);
        for (std::size_t x = 0; x < c; ++x) {
            gai[x] += coef * aj[x];
            gaj[x] += coef * ai[x];
        }
    }
}

class ObjectiveOp final : public Op {
public:
    ObjectiveOp(std::vector<NodeId> anchors, double t, std::size_t* zero_counter)
        : anchors_(std::move(anchors)), t_(t), zero_counter_(zero_counter) {}

    std::string name() const override { return "contrastive_objective"; }

    DenseMatrix forward(std::span<const DenseMatrix* const> in) override {
        if (!in[0]->same_shape(*in[1])) throw ShapeError("objective: views differ in shape");
        n1_ = normalize_rows(*in[0], anchors_);
        n2_ = normalize_rows(*in[1], anchors_);
        *zero_counter_ += n1_.zero_rows + n2_.zero_rows;
        return DenseMatrix::scalar(objective_on_normalized(n1_.rows, n2_.rows, t_));
    }

    void backward(std::span<const DenseMatrix* const>, const DenseMatrix&, const DenseMatrix& g,
                  std::span<DenseMatrix* const> gin) override {
        const std::size_t k = anchors_.size();
        const double weight = g.item() / (2.0 * double(k));
        DenseMatrix ga(k, n1_.rows.cols()), gb(k, n1_.rows.cols());
        std::vector<double> scratch;
        for (std::size_t i = 0; i < k; ++i) {
            direction_backward(n1_.rows, n2_.rows, i, t_, weight, ga, gb, scratch);
            direction_backward(n2_.rows, n1_.rows, i, t_, weight, gb, ga, scratch);
        }
        scatter(n1_, ga, gin[0]);
        scatter(n2_, gb, gin[1]);
    }

private:
    // Through x / |x|: dx = (dn - n (n . dn)) / |x|.
    void scatter(const Normalized& nz, const DenseMatrix& gn, DenseMatrix* dst) const {
        if (!dst) return;
        for (std::size_t i = 0; i < anchors_.size(); ++i) {
            if (nz.norms[i] == 0.0) continue;
            auto n = nz.rows.row(i);
            auto d = gn.row(i);
            const double proj = dot(n, d);
            auto out = dst->row(anchors_[i]);
            for (std::size_t x = 0; x < n.size(); ++x)
                out[x] += (d[x] - n[x] * proj) / nz.norms[i];
        }
    }

    std::vector<NodeId> anchors_;
    double t_;
    std::size_t* zero_counter_;
    Normalized n1_, n2_;
};

} // namespace

double cosine_sim(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeError("cosine_sim: length mismatch");
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    if (aa == 0.0 || bb == 0.0) return 0.0;
    return ab / (std::sqrt(aa) * std::sqrt(bb));
}

double node_loss(NodeId v, const DenseMatrix& h1, const DenseMatrix& h2,
                 std::span<const NodeId> anchors, const SimilarityConfig& cfg) {
    check_temperature(cfg);
    auto it = std::find(anchors.begin(), anchors.end(), v);
    if (it == anchors.end()) throw std::invalid_argument("node_loss: node is not an anchor");
    auto a = normalize_rows(h1, anchors);
    auto b = normalize_rows(h2, anchors);
    std::vector<double> scratch;
    return direction_loss(a.rows, b.rows, std::size_t(it - anchors.begin()), cfg.temperature,
                          scratch);
}

double objective_value(std::span<const NodeId> anchors, const DenseMatrix& h1,
                       const DenseMatrix& h2, const SimilarityConfig& cfg) {
    check_temperature(cfg);
    if (anchors.empty()) throw std::invalid_argument("objective: empty anchor set");
    if (!h1.same_shape(h2)) throw ShapeError("objective: views differ in shape");
    auto a = normalize_rows(h1, anchors);
    auto b = normalize_rows(h2, anchors);
    return objective_on_normalized(a.rows, b.rows, cfg.temperature);
}

Var objective(Tape& tape, std::span<const NodeId> anchors, Var h1, Var h2,
              const SimilarityConfig& cfg) {
    check_temperature(cfg);
    if (anchors.empty()) throw std::invalid_argument("objective: empty anchor set");
    auto op = std::make_unique<ObjectiveOp>(std::vector<NodeId>(anchors.begin(), anchors.end()),
                                            cfg.temperature, &tape.counter("zero_norm_rows"));
    return tape.record(std::move(op), {h1, h2});
}

} // namespace groc
