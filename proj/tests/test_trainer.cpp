#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "support.hpp"

#include "groc/adam.hpp"
#include "groc/errors.hpp"
#include "groc/trainer.hpp"

using namespace groc;

namespace {

Graph small_sbm(std::uint64_t seed = 7) {
    SbmSpec spec;
    spec.seed = seed;
    spec.block_sizes = {30, 30};
    spec.p_in = 0.15;
    spec.p_out = 0.01;
    return sbm_generate(spec);
}

std::vector<double> losses(const TrainResult& r) {
    std::vector<double> out;
    for (const auto& e : r.report.epochs) out.push_back(e.loss);
    return out;
}

} // namespace

TEST_CASE("adam: zero gradient without decay leaves parameters unchanged") {
    DenseMatrix p = test::random_matrix(2, 2, 1);
    const DenseMatrix before = p, zero(2, 2);
    AdamState s;
    std::array<DenseMatrix*, 1> ps = {&p};
    std::array<const DenseMatrix*, 1> gs = {&zero};
    for (int i = 0; i < 5; ++i) adam_step(ps, gs, s, 0.1, 0.0);
    CHECK(p == before);
}

TEST_CASE("adam: first step moves by the learning rate") {
    DenseMatrix p{{0.5}}, g{{1.0}};
    AdamState s;
    std::array<DenseMatrix*, 1> ps = {&p};
    std::array<const DenseMatrix*, 1> gs = {&g};
    adam_step(ps, gs, s, 0.01, 0.0);
    CHECK(p(0, 0) == doctest::Approx(0.49).epsilon(1e-7));
}

TEST_CASE("adam: minimizes a quadratic") {
    DenseMatrix p{{1.0}};
    AdamState s;
    for (int i = 0; i < 200; ++i) {
        DenseMatrix g{{2.0 * p(0, 0)}};
        std::array<DenseMatrix*, 1> ps = {&p};
        std::array<const DenseMatrix*, 1> gs = {&g};
        adam_step(ps, gs, s, 0.1, 0.0);
    }
    CHECK(std::abs(p(0, 0)) < 1e-3);
}

TEST_CASE("adam: non-finite gradient is rejected without an update") {
    DenseMatrix p{{1.0}}, g{{std::nan("")}};
    AdamState s;
    std::array<DenseMatrix*, 1> ps = {&p};
    std::array<const DenseMatrix*, 1> gs = {&g};
    CHECK_THROWS_AS(adam_step(ps, gs, s, 0.1, 0.0), NumericalError);
    CHECK(p(0, 0) == 1.0);
}

TEST_CASE("method names and config keys") {
    for (auto m : {Method::grace, Method::gca_de, Method::grace_adv, Method::groc})
        CHECK(parse_method(to_string(m)) == m);
    CHECK_THROWS_AS(parse_method("dgi"), ConfigError);

    TrainConfig grace = preset("sbm", Method::grace);
    CHECK_THROWS_AS(apply_override(grace, "q_plus", "0.1"), ConfigError);
    CHECK_THROWS_AS(apply_override(grace, "batch_size", "5"), ConfigError);
    CHECK_THROWS_AS(apply_override(grace, "detach_normalization", "true"), ConfigError);
    CHECK_THROWS_AS(apply_override(grace, "no_such_key", "1"), ConfigError);
    CHECK_THROWS_AS(apply_override(grace, "lr", "fast"), ConfigError);
    CHECK_THROWS_AS(apply_override(grace, "method", "groc"), ConfigError);
    apply_override(grace, "tau", "0.7");
    CHECK(grace.similarity.temperature == 0.7);
    apply_override(grace, "q_minus", "0.3");
    CHECK(grace.stochastic.q_minus_1 == 0.3);
    CHECK(grace.stochastic.q_minus_2 == 0.3);

    TrainConfig groc = preset("sbm", Method::groc);
    apply_override(groc, "q_plus", "0.05");
    CHECK(groc.adversarial.q_plus_2 == 0.05);
    apply_json(groc, nlohmann::json::parse(R"({"batch_size": 20, "act": "prelu", "method": "groc"})"));
    CHECK(groc.adversarial.batch_size == 20);
    CHECK(groc.act == Activation::prelu);
    CHECK_THROWS_AS(apply_json(groc, nlohmann::json::parse("[1]")), ConfigError);
    CHECK_THROWS_AS(preset("pubmed", Method::groc), ConfigError);
}

TEST_CASE("config serialization round-trips") {
    TrainConfig a = preset("cora", Method::groc);
    a.seed = 9;
    TrainConfig b = preset("sbm", Method::groc);
    apply_json(b, to_json(a));
    CHECK(to_json(b) == to_json(a));
}

TEST_CASE("validation rejects out-of-range values") {
    TrainConfig c = preset("sbm", Method::groc);
    c.adversarial.q_plus_1 = 1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = preset("sbm", Method::groc);
    c.similarity.temperature = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = preset("sbm", Method::grace);
    c.lr = -1;
    CHECK_THROWS_AS(train(small_sbm(), c), ConfigError);
}

TEST_CASE("presets follow the stated overrides") {
    const auto groc = preset("sbm", Method::groc);
    CHECK(groc.adversarial.batch_size == 10);
    CHECK(groc.stochastic.q_minus_1 == 0.01);
    CHECK(preset("cora", Method::grace_adv).stochastic.q_minus_2 == 0.01);
    CHECK(preset("sbm", Method::gca_de).stochastic.removal_scheme == RemovalScheme::degree_weighted);
    CHECK(preset("sbm", Method::grace).adversarial.q_plus_1 == 0.0);
}

TEST_CASE("batches partition the node set") {
    Rng rng = make_stream(3, StreamPurpose::partition, {0});
    const auto batches = partition_batches(200, 10, rng);
    CHECK(batches.size() == 20);
    std::vector<int> seen(200, 0);
    for (const auto& b : batches) {
        CHECK(b.size() == 10);
        CHECK(std::is_sorted(b.begin(), b.end()));
        for (NodeId v : b) ++seen[v];
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
    Rng r2 = make_stream(3, StreamPurpose::partition, {0});
    const auto short_last = partition_batches(23, 10, r2);
    CHECK(short_last.size() == 3);
    CHECK(short_last.back().size() == 3);
}

TEST_CASE("training is deterministic") {
    const Graph g = small_sbm();
    TrainConfig c = preset("sbm", Method::groc);
    c.epochs = 3;
    c.adversarial.q_plus_1 = c.adversarial.q_plus_2 = 0.05;
    const auto a = train(g, c), b = train(g, c);
    CHECK(a.params.encoder.w1 == b.params.encoder.w1);
    CHECK(a.params.head.w2 == b.params.head.w2);
    CHECK(losses(a) == losses(b));
    c.seed = 1;
    CHECK(train(g, c).params.encoder.w1 != a.params.encoder.w1);
}

TEST_CASE("GROC without perturbations and b = n reduces to GRACE") {
    const Graph g = small_sbm();
    TrainConfig grace = preset("sbm", Method::grace);
    grace.epochs = 5;
    grace.stochastic.q_minus_1 = grace.stochastic.q_minus_2 = 0.0;
    TrainConfig groc = grace;
    groc.method = Method::groc;
    groc.adversarial = {0.0, 0.0, g.num_nodes()};
    const auto a = train(g, grace), b = train(g, groc);
    CHECK(losses(a) == losses(b));
    CHECK(a.params.encoder.w2 == b.params.encoder.w2);
}

TEST_CASE("GRACE-ADV with q- = 0 equals GRACE with q- = 0") {
    const Graph g = small_sbm();
    TrainConfig grace = preset("sbm", Method::grace);
    grace.epochs = 5;
    grace.stochastic.q_minus_1 = grace.stochastic.q_minus_2 = 0.0;
    TrainConfig adv = grace;
    adv.method = Method::grace_adv;
    CHECK(losses(train(g, grace)) == losses(train(g, adv)));
}

TEST_CASE("per-epoch edit counts match an independent candidate recount") {
    const Graph g = small_sbm();
    TrainConfig c = preset("sbm", Method::groc);
    c.epochs = 2;
    c.stochastic.q_minus_1 = 0.05;
    c.stochastic.q_minus_2 = 0.1;
    c.adversarial.q_plus_1 = 0.02;
    c.adversarial.q_plus_2 = 0.03;
    const auto r = train(g, c);
    const auto fields = receptive_fields(g, 2);
    for (std::size_t epoch = 0; epoch < 2; ++epoch) {
        Rng prng = make_stream(c.seed, StreamPurpose::partition, {epoch});
        std::size_t removed = 0, inserted = 0;
        for (const auto& batch : partition_batches(g.num_nodes(), 10, prng)) {
            const auto sets = build_candidate_sets(batch, fields, g);
            const double rm = double(sets.removal.size()), in = double(sets.insertion.size());
            removed += std::size_t(std::floor(0.05 * rm + 1e-9)) + std::size_t(std::floor(0.1 * rm + 1e-9));
            inserted += std::size_t(std::floor(0.02 * in + 1e-9)) + std::size_t(std::floor(0.03 * in + 1e-9));
        }
        CHECK(r.report.epochs[epoch].removed == removed);
        CHECK(r.report.epochs[epoch].inserted == inserted);
        CHECK(r.report.epochs[epoch].batches == 6);
    }
}

TEST_CASE("GRACE-ADV never inserts and baselines never use the adversarial path") {
    const Graph g = small_sbm();
    TrainConfig c = preset("sbm", Method::grace_adv);
    c.epochs = 2;
    for (const auto& e : train(g, c).report.epochs) {
        CHECK(e.inserted == 0);
        CHECK(e.removed > 0);
    }
    TrainConfig gca = preset("sbm", Method::gca_de);
    gca.epochs = 2;
    for (const auto& e : train(g, gca).report.epochs) CHECK(e.inserted == 0);
}

TEST_CASE("GROC loss on the SBM fixture is finite and falls over the first ten epochs") {
    const Graph g = sbm_generate(SbmSpec{});
    int decreasing = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        TrainConfig c = preset("sbm", Method::groc);
        c.seed = seed;
        c.epochs = 10;
        const auto l = losses(train(g, c));
        const bool finite = std::all_of(l.begin(), l.end(), [](double v) { return std::isfinite(v); });
        CHECK(finite);
        decreasing += finite && l.back() < l.front();
    }
    CHECK(decreasing >= 4);
}

TEST_CASE("report CSV") {
    TrainReport r;
    r.epochs.push_back({1, 0.5, 20, 3, 7, 1.25});
    CHECK(report_csv(r) == "epoch,loss,removed,inserted\n1,0.5,3,7\n");
}
