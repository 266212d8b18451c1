// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "support.hpp"

#include "groc/eval.hpp"
#include "groc/trainer.hpp"

using namespace groc;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int prec = 3) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(prec) << v;
    return os.str();
}

template <class T>
std::string join(const std::vector<T>& v, int prec = 3) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ' ';
        if constexpr (std::is_floating_point_v<T>) s += fmt(v[i], prec);
        else s += std::to_string(v[i]);
    }
    return s;
}

struct Verdict {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Verdict()>& body) {
    const auto t0 = Clock::now();
    Verdict v;
    try {
        v = body();
    } catch (const std::exception& e) {
        v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failures;
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << name << " | " << v.detail
              << " [" << fmt(seconds_since(t0), 1) << "s]" << std::endl;
}

Graph sbm_fixture() { return sbm_generate(SbmSpec{}); }

// ---- 1: gradient oracle ----------------------------------------------------------

Verdict gradient_oracle() {
    const auto t0 = Clock::now();
    std::vector<Graph> graphs;
    SbmSpec spec;
    spec.block_sizes = {20, 20};
    graphs.push_back(sbm_generate(spec));
    graphs.push_back(test::random_graph(40, 0.08, 6, 101));
    graphs.push_back(test::random_graph(35, 0.10, 6, 102));
    graphs.push_back(test::random_graph(30, 0.12, 6, 103));
    graphs.push_back(test::random_graph(25, 0.15, 6, 104));

    double worst = 0.0;
    std::size_t checked = 0, edge_entries = 0, zero_rows = 0;
    std::string where;
    for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
        const Graph& g = graphs[gi];
        TrainConfig cfg = preset("sbm", Method::groc);
        cfg.seed = gi;
        cfg.n_h = 8;
        cfg.act = gi % 2 ? Activation::prelu : Activation::relu;
        // Zero init biases map fully masked rows to H = 0, where the zero-norm
        // cosine convention is discontinuous; evaluate at a generic point.
        auto params = init_params(gi, g.num_features(), cfg.n_h, cfg.act, cfg.prelu_slope);
        params.head.b1 = test::random_matrix(1, cfg.n_h, std::uint32_t(300 + gi), -0.1, 0.1);
        params.head.b2 = test::random_matrix(1, cfg.n_h, std::uint32_t(400 + gi), -0.1, 0.1);
        Rng prng = make_stream(gi, StreamPurpose::partition, {0});
        const auto anchors = partition_batches(g.num_nodes(), 10, prng)[0];
        std::array<View, 2> views;
        const double p[2] = {cfg.stochastic.p1, cfg.stochastic.p2};
        for (int i = 0; i < 2; ++i) {
            Rng mrng = make_stream(gi, StreamPurpose::feature_mask, {0, 0, std::uint64_t(i)});
            views[i] = identity_view(g);
            views[i].features = mask_features(g.features(), p[i], mrng).features;
        }
        const auto sets = build_candidate_sets(anchors, receptive_fields(g, 2), g);
        std::vector<Edge> extra;
        for (const auto& [u, v] : sets.insertion) extra.push_back({u, v, 1.0 / double(sets.insertion.size())});

        TwoViewPass pass;
        run_pass(pass, params, views, extra, anchors, cfg, true);
        const std::vector<Var> leaves = {pass.enc.w1,  pass.enc.w2,  pass.head.w1,   pass.head.b1,
                                         pass.head.w2, pass.head.b2, pass.adj[0].weights, pass.adj[1].weights};
        const auto rep = fd_check(pass.tape, pass.loss, leaves, 1e-4, 1e-8);
        checked += rep.checked;
        zero_rows += pass.tape.counter_value("zero_norm_rows");
        edge_entries += 2 * (g.num_edges() + extra.size());
        if (rep.max_rel_error > worst) {
            worst = rep.max_rel_error;
            where = "graph " + std::to_string(gi) + " " + rep.worst;
        }
    }
    const double secs = seconds_since(t0);
    Verdict v;
    v.pass = worst <= 1e-5 && secs < 60.0;
    v.detail = "max rel error " + fmt(worst * 1e6, 4) + "e-6 over " + std::to_string(checked) + " entries (" +
               std::to_string(edge_entries) + " edge slots), zero-norm rows " + std::to_string(zero_rows) + ", " +
               fmt(secs, 1) + "s";
    if (!where.empty()) v.detail += ", worst " + where;
    return v;
}

// ---- 2: degeneracy equivalence ------------------------------------------------------

Verdict degeneracy() {
    const Graph g = sbm_fixture();
    TrainConfig grace = preset("sbm", Method::grace);
    grace.epochs = 20;
    grace.seed = 3;
    grace.stochastic.q_minus_1 = grace.stochastic.q_minus_2 = 0.0;
    TrainConfig groc = grace;
    groc.method = Method::groc;
    groc.adversarial = {0.0, 0.0, g.num_nodes()};
    const auto a = train(g, grace), b = train(g, groc);
    std::size_t equal = 0;
    for (std::size_t e = 0; e < 20; ++e) equal += a.report.epochs[e].loss == b.report.epochs[e].loss;
    Verdict v;
    v.pass = equal == 20 && a.params.encoder.w1 == b.params.encoder.w1 && a.params.head.w2 == b.params.head.w2;
    v.detail = std::to_string(equal) + "/20 epoch losses bit-identical, final loss " +
               fmt(a.report.epochs.back().loss, 6);
    return v;
}

// ---- 3: candidate bound -----------------------------------------------------------------

Verdict candidate_bound() {
    std::mt19937 rng(2024);
    std::size_t max_ratio_num = 0, max_ratio_den = 1, violations = 0;
    for (int draw = 0; draw < 100; ++draw) {
        const std::size_t n = 10 + rng() % 71;
        const double p = 0.02 + 0.2 * double(rng() % 100) / 100.0;
        const Graph g = test::random_graph(n, p, 2, std::uint32_t(5000 + draw));
        const std::size_t b = 1 + rng() % std::min<std::size_t>(n, 20);
        Rng prng = make_stream(std::uint64_t(draw), StreamPurpose::partition, {0});
        const auto anchors = partition_batches(n, b, prng)[0];
        const auto sets = build_candidate_sets(anchors, receptive_fields(g, 2), g);
        if (sets.insertion.size() > n * anchors.size()) ++violations;
        if (sets.insertion.size() * max_ratio_den > max_ratio_num * n * anchors.size()) {
            max_ratio_num = sets.insertion.size();
            max_ratio_den = n * anchors.size();
        }
    }

    // Exhaustive oracle on 6-10 node fixtures.
    std::size_t mismatches = 0, fixtures = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 6 + std::size_t(trial % 5);
        const Graph g = test::random_graph(n, 0.3, 1, std::uint32_t(9000 + trial));
        const auto d = test::hop_distances(g);
        std::vector<NodeId> anchors;
        for (NodeId v = 0; v < n; ++v)
            if (rng() % 3 == 0) anchors.push_back(v);
        if (anchors.empty()) anchors.push_back(0);
        for (int hops : {1, 2}) {
            std::set<std::pair<NodeId, NodeId>> want;
            for (NodeId v : anchors)
                for (NodeId w : anchors)
                    if (w != v)
                        for (NodeId u = 0; u < n; ++u)
                            if (d[w][u] <= hops && d[v][u] > hops) want.insert({std::min(u, v), std::max(u, v)});
            const auto got = build_candidate_sets(anchors, receptive_fields(g, hops), g).insertion;
            mismatches += std::vector<std::pair<NodeId, NodeId>>(want.begin(), want.end()) != got;
            ++fixtures;
        }
    }
    Verdict v;
    v.pass = violations == 0 && mismatches == 0;
    v.detail = "100 draws, " + std::to_string(violations) + " bound violations, max |S+|/(n b) = " +
               std::to_string(max_ratio_num) + "/" + std::to_string(max_ratio_den) + "; oracle mismatches " +
               std::to_string(mismatches) + "/" + std::to_string(fixtures);
    return v;
}

// ---- 4-6: trend experiments on the SBM fixture ------------------------------------------

struct RunResult {
    double acc = 0.0;                 // probe test accuracy
    std::vector<double> robust;       // budgets 0..5 on the 40 targets
    double seconds = 0.0;
};

struct Experiment {
    std::map<std::string, std::vector<RunResult>> runs;  // method -> per seed
};

RunResult run_method(const Graph& g, Method m, std::uint64_t seed, unsigned threads) {
    const auto t0 = Clock::now();
    TrainConfig cfg = preset("sbm", m);
    cfg.seed = seed;
    const auto model = train(g, cfg);
    const DenseMatrix z = embed(g, model.params.encoder);
    const auto probe = linear_probe_train(z, *g.labels(), g.splits()->train, g.num_classes(), seed);
    RunResult r;
    r.acc = accuracy(predict(probe, z), *g.labels(), g.splits()->test);
    const auto s = surrogate_fit(g, seed);
    const auto targets = select_targets(s, g, seed).all();
    const std::vector<std::size_t> budgets = {1, 2, 3, 4, 5};
    r.robust = robust_accuracy(model.params.encoder, probe, g, targets, s, budgets, threads).accuracy;
    r.seconds = seconds_since(t0);
    return r;
}

const Experiment& experiment() {
    static const Experiment ex = [] {
        Experiment e;
        const Graph g = sbm_fixture();
        unsigned threads = std::max(1u, std::thread::hardware_concurrency());
        for (Method m : {Method::grace, Method::grace_adv, Method::groc})
            for (std::uint64_t seed = 0; seed < 3; ++seed)
                e.runs[to_string(m)].push_back(run_method(g, m, seed, threads));
        return e;
    }();
    return ex;
}

Verdict attack_drop() {
    const auto& grace = experiment().runs.at("grace");
    int ok = 0;
    std::vector<double> drops;
    double secs = 0;
    for (const auto& r : grace) {
        drops.push_back(r.robust[0] - r.robust[5]);
        ok += drops.back() >= 0.15;
        secs += r.seconds;
    }
    Verdict v;
    v.pass = ok >= 2 && secs < 900;
    v.detail = "GRACE budget-0 minus budget-5 per seed: " + join(drops) + " (" + std::to_string(ok) +
               "/3 >= 0.15), SBM only (no Cora data ingested), " + fmt(secs, 1) + "s";
    return v;
}

double mean_345(const std::vector<RunResult>& runs) {
    double s = 0;
    for (const auto& r : runs) s += r.robust[3] + r.robust[4] + r.robust[5];
    return s / (3.0 * double(runs.size()));
}

Verdict grace_adv_trend() {
    const auto& ex = experiment();
    const double adv = mean_345(ex.runs.at("grace-adv")), base = mean_345(ex.runs.at("grace"));
    Verdict v;
    v.pass = adv >= base - 0.02;
    v.detail = "mean robust@{3,4,5}: GRACE-ADV " + fmt(adv) + " vs GRACE " + fmt(base);
    return v;
}

Verdict groc_trend() {
    const auto& ex = experiment();
    const auto& groc = ex.runs.at("groc");
    const auto& grace = ex.runs.at("grace");
    int better = 0;
    bool acc_ok = true;
    std::vector<double> r_groc, r_grace, a_groc, a_grace;
    for (std::size_t s = 0; s < 3; ++s) {
        better += groc[s].robust[5] > grace[s].robust[5];
        acc_ok = acc_ok && std::abs(groc[s].acc - grace[s].acc) <= 0.05;
        r_groc.push_back(groc[s].robust[5]);
        r_grace.push_back(grace[s].robust[5]);
        a_groc.push_back(groc[s].acc);
        a_grace.push_back(grace[s].acc);
    }
    Verdict v;
    v.pass = better >= 2 && acc_ok;
    v.detail = "robust@5 GROC [" + join(r_groc) + "] vs GRACE [" + join(r_grace) + "] (" + std::to_string(better) +
               "/3 strictly higher); Acc GROC [" + join(a_groc) + "] vs GRACE [" + join(a_grace) + "]";
    return v;
}

// ---- 7: attack optimality at micro scale -------------------------------------------------

struct MicroFixture {
    Graph graph;
    SurrogateModel surrogate;
    NodeId target;
};

std::vector<MicroFixture> micro_fixtures() {
    std::vector<MicroFixture> out;
    for (std::uint32_t k = 1; k <= 3; ++k) {
        Graph g = test::random_graph(8, 0.35, 3, 700 + k, 2);
        auto s = SurrogateModel::from_weights(test::random_matrix(3, 4, 710 + k), test::random_matrix(4, 2, 720 + k));
        out.push_back({std::move(g), std::move(s), 0});
    }
    return out;
}

Verdict attack_optimality() {
    int ok = 0;
    std::string detail;
    for (const auto& f : micro_fixtures()) {
        const Graph& g = f.graph;
        const NodeId t = f.target;
        const auto greedy = attack_evasion(g, t, 2, f.surrogate);
        auto flip = [&](NodeId u) {
            return Flip{std::min(u, t), std::max(u, t), g.has_edge(u, t) ? FlipKind::remove : FlipKind::insert};
        };
        double best = surrogate_margin(g, t, f.surrogate);
        std::set<std::pair<NodeId, NodeId>> best_set;
        for (NodeId a = 0; a < g.num_nodes(); ++a) {
            if (a == t) continue;
            const std::vector<Flip> one = {flip(a)};
            const double m1 = surrogate_margin(g, t, f.surrogate, one);
            if (m1 < best) {
                best = m1;
                best_set = {{one[0].u, one[0].v}};
            }
            for (NodeId b = 0; b < g.num_nodes(); ++b) {
                if (b == t || b == a) continue;
                const std::vector<Flip> two = {flip(a), flip(b)};
                const double m2 = surrogate_margin(g, t, f.surrogate, two);
                if (m2 < best) {
                    best = m2;
                    best_set = {{two[0].u, two[0].v}, {two[1].u, two[1].v}};
                }
            }
        }
        std::set<std::pair<NodeId, NodeId>> greedy_set;
        for (const auto& fl : greedy.flips) greedy_set.insert({fl.u, fl.v});
        const bool pass = greedy.margins.back() <= best + 1e-9 || greedy_set == best_set;
        ok += pass;
        detail += (detail.empty() ? "" : "; ") + std::string("greedy ") + fmt(greedy.margins.back(), 6) +
                  " vs exhaustive " + fmt(best, 6);
    }
    Verdict v;
    v.pass = ok == 3;
    v.detail = std::to_string(ok) + "/3 fixtures: " + detail;
    return v;
}

// ---- 8: probe and surrogate competence ------------------------------------------------------

Verdict competence() {
    const Graph g = sbm_fixture();
    TrainConfig cfg = preset("sbm", Method::grace);
    const auto model = train(g, cfg);
    const DenseMatrix z = embed(g, model.params.encoder);
    const auto probe = linear_probe_train(z, *g.labels(), g.splits()->train, g.num_classes(), 0);
    const double probe_acc = accuracy(predict(probe, z), *g.labels(), g.splits()->test);

    SbmSpec cliques;
    cliques.block_sizes = {100, 100};
    cliques.p_in = 1.0;
    cliques.p_out = 0.0;
    const Graph c = sbm_generate(cliques);
    const auto s = surrogate_fit(c, 0);
    const DenseMatrix logits = surrogate_logits(s, c);
    std::size_t hit = 0;
    for (NodeId v : c.splits()->test) {
        const auto row = logits.row(v);
        hit += int(std::max_element(row.begin(), row.end()) - row.begin()) == (*c.labels())[v];
    }
    const double sur_acc = double(hit) / double(c.splits()->test.size());
    Verdict v;
    v.pass = probe_acc >= 0.9 && sur_acc >= 0.95;
    v.detail = "probe on GRACE SBM embeddings " + fmt(probe_acc) + ", surrogate on two cliques " + fmt(sur_acc);
    return v;
}

// ---- 9: CLI determinism ------------------------------------------------------------------------

int sh(const std::string& cmd) {
    const int rc = std::system((cmd + " > /dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

Verdict cli_determinism() {
    const std::string bin = GROC_CLI_PATH;
    const fs::path d = test::scratch_dir("acceptance_cli");
    const std::string data = (d / "sbm7").string();
    if (sh(bin + " generate --preset sbm --seed 7 --out " + data) != 0) return {false, "generate failed"};

    std::string detail;
    bool ok = true;
    double groc_secs = 0;
    for (const std::string method : {"grace", "groc"}) {
        for (const char* rep : {"a", "b"}) {
            const std::string run = (d / (method + "_" + rep)).string();
            const auto t0 = Clock::now();
            if (sh(bin + " train --data " + data + " --method " + method + " --seed 0 --out " + run) != 0)
                return {false, method + " train failed"};
            if (method == "groc" && std::string(rep) == "a") groc_secs = seconds_since(t0);
            if (sh(bin + " eval --data " + data + " --checkpoint " + run + "/checkpoint --attack-budgets 1,2,3,4,5 --seed 0 --out " +
                   run + "/eval") != 0)
                return {false, method + " eval failed"};
        }
        const fs::path a = d / (method + "_a"), b = d / (method + "_b");
        const bool emb = test::slurp(a / "embeddings.csv") == test::slurp(b / "embeddings.csv");
        const bool res = test::slurp(a / "eval" / "results.csv") == test::slurp(b / "eval" / "results.csv");
        ok = ok && emb && res && !test::slurp(a / "embeddings.csv").empty();
        detail += method + ": embeddings " + (emb ? "identical" : "DIFFER") + ", results " +
                  (res ? "identical" : "DIFFER") + "; ";
    }
    ok = ok && groc_secs < 300;
    detail += "groc preset train " + fmt(groc_secs, 1) + "s";
    fs::remove_all(d);
    return {ok, detail};
}

} // namespace

int main() {
    std::cout << "acceptance suite" << std::endl;
    report(1, "gradient oracle (FD, 1e-5 rel, 1e-8 abs floor, < 60 s)", gradient_oracle);
    report(2, "GROC(q=0, b=n) bit-identical to GRACE over 20 epochs", degeneracy);
    report(3, "|S+| <= n b over 100 draws and exhaustive S+ oracle", candidate_bound);
    report(4, "GRACE budget-5 drop >= 0.15 in >= 2 of 3 seeds", attack_drop);
    report(5, "GRACE-ADV robust@{3,4,5} >= GRACE - 0.02", grace_adv_trend);
    report(6, "GROC robust@5 > GRACE in >= 2 of 3 seeds, Acc within 0.05", groc_trend);
    report(7, "greedy budget-2 attack vs exhaustive search on three 8-node fixtures", attack_optimality);
    report(8, "probe >= 0.9 on SBM embeddings, surrogate >= 0.95 on two cliques", competence);
    report(9, "CLI train/eval determinism", cli_determinism);
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
