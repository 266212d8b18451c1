#include "groc/trainer.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <sstream>

#include "groc/adam.hpp"
#include "groc/adjacency.hpp"
#include "groc/errors.hpp"
#include "groc/graph_io.hpp"

namespace groc {

std::string to_string(Method m) {
    switch (m) {
        case Method::grace: return "grace";
        case Method::gca_de: return "gca-de";
        case Method::grace_adv: return "grace-adv";
        case Method::groc: return "groc";
    }
    return "?";
}

Method parse_method(const std::string& s) {
    if (s == "grace") return Method::grace;
    if (s == "gca-de") return Method::gca_de;
    if (s == "grace-adv") return Method::grace_adv;
    if (s == "groc") return Method::groc;
    throw ConfigError("unknown method '" + s + "' (expected grace, gca-de, grace-adv or groc)");
}

namespace {

bool adversarial(Method m) { return m == Method::grace_adv || m == Method::groc; }

double parse_number(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': '" + value + "' is not a number");
    }
}

std::size_t parse_count(const std::string& key, const std::string& value) {
    double v = parse_number(key, value);
    if (v < 0 || v != std::floor(v)) throw ConfigError("config key '" + key + "' must be a non-negative integer");
    return std::size_t(v);
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("config key '" + key + "' must be true or false");
}

void check_key(const TrainConfig& cfg, const std::string& key) {
    const auto keys = config_keys(cfg.method);
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
        throw ConfigError("config key '" + key + "' is not valid for method " + to_string(cfg.method));
}

} // namespace

void TrainConfig::validate() const {
    auto rate = [](double r, const char* name) {
        if (!(r >= 0.0 && r < 1.0)) throw ConfigError(std::string(name) + " must be in [0, 1)");
    };
    if (!(lr > 0.0)) throw ConfigError("lr must be positive");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (n_h < 1) throw ConfigError("n_h must be >= 1");
    if (!(similarity.temperature > 0.0)) throw ConfigError("temperature must be positive");
    if (hops < 1) throw ConfigError("hops must be >= 1");
    if (adversarial.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    rate(stochastic.p1, "p1");
    rate(stochastic.p2, "p2");
    rate(stochastic.q_minus_1, "q_minus_1");
    rate(stochastic.q_minus_2, "q_minus_2");
    rate(adversarial.q_plus_1, "q_plus_1");
    rate(adversarial.q_plus_2, "q_plus_2");
}

std::vector<std::string> config_keys(Method m) {
    std::vector<std::string> keys = {"seed",   "n_h",          "act",         "prelu_slope",
                                     "epochs", "lr",           "weight_decay", "temperature",
                                     "p1",     "p2",           "mask_axis",   "q_minus_1",
                                     "q_minus_2"};
    if (adversarial(m)) keys.push_back("detach_normalization");
    if (m == Method::groc) {
        keys.push_back("q_plus_1");
        keys.push_back("q_plus_2");
        keys.push_back("batch_size");
    }
    return keys;
}

nlohmann::ordered_json to_json(const TrainConfig& cfg) {
    nlohmann::ordered_json j;
    j["method"] = to_string(cfg.method);
    for (const auto& key : config_keys(cfg.method)) {
        if (key == "seed") j[key] = cfg.seed;
        else if (key == "n_h") j[key] = cfg.n_h;
        else if (key == "act") j[key] = to_string(cfg.act);
        else if (key == "prelu_slope") j[key] = cfg.prelu_slope;
        else if (key == "epochs") j[key] = cfg.epochs;
        else if (key == "lr") j[key] = cfg.lr;
        else if (key == "weight_decay") j[key] = cfg.weight_decay;
        else if (key == "temperature") j[key] = cfg.similarity.temperature;
        else if (key == "p1") j[key] = cfg.stochastic.p1;
        else if (key == "p2") j[key] = cfg.stochastic.p2;
        else if (key == "mask_axis") j[key] = cfg.stochastic.mask_axis == MaskAxis::column ? "column" : "entry";
        else if (key == "q_minus_1") j[key] = cfg.stochastic.q_minus_1;
        else if (key == "q_minus_2") j[key] = cfg.stochastic.q_minus_2;
        else if (key == "detach_normalization") j[key] = cfg.detach_normalization;
        else if (key == "q_plus_1") j[key] = cfg.adversarial.q_plus_1;
        else if (key == "q_plus_2") j[key] = cfg.adversarial.q_plus_2;
        else if (key == "batch_size") j[key] = cfg.adversarial.batch_size;
    }
    return j;
}

void apply_override(TrainConfig& cfg, const std::string& key_in, const std::string& value) {
    std::string key = key_in == "tau" ? "temperature" : key_in;
    if (key == "q_minus" || key == "q_plus") {
        apply_override(cfg, key + "_1", value);
        apply_override(cfg, key + "_2", value);
        return;
    }
    if (key == "method") {
        if (parse_method(value) != cfg.method)
            throw ConfigError("config method '" + value + "' does not match " + to_string(cfg.method));
        return;
    }
    check_key(cfg, key);
    if (key == "seed") cfg.seed = parse_count(key, value);
    else if (key == "n_h") cfg.n_h = parse_count(key, value);
    else if (key == "act") cfg.act = parse_activation(value);
    else if (key == "prelu_slope") cfg.prelu_slope = parse_number(key, value);
    else if (key == "epochs") cfg.epochs = parse_count(key, value);
    else if (key == "lr") cfg.lr = parse_number(key, value);
    else if (key == "weight_decay") cfg.weight_decay = parse_number(key, value);
    else if (key == "temperature") cfg.similarity.temperature = parse_number(key, value);
    else if (key == "p1") cfg.stochastic.p1 = parse_number(key, value);
    else if (key == "p2") cfg.stochastic.p2 = parse_number(key, value);
    else if (key == "mask_axis") {
        if (value == "column") cfg.stochastic.mask_axis = MaskAxis::column;
        else if (value == "entry") cfg.stochastic.mask_axis = MaskAxis::entry;
        else throw ConfigError("mask_axis must be column or entry");
    }
    else if (key == "q_minus_1") cfg.stochastic.q_minus_1 = parse_number(key, value);
    else if (key == "q_minus_2") cfg.stochastic.q_minus_2 = parse_number(key, value);
    else if (key == "detach_normalization") cfg.detach_normalization = parse_bool(key, value);
    else if (key == "q_plus_1") cfg.adversarial.q_plus_1 = parse_number(key, value);
    else if (key == "q_plus_2") cfg.adversarial.q_plus_2 = parse_number(key, value);
    else if (key == "batch_size") cfg.adversarial.batch_size = parse_count(key, value);
}

void apply_json(TrainConfig& cfg, const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [key, val] : j.items()) {
        std::string text;
        if (val.is_string()) text = val.get<std::string>();
        else if (val.is_boolean()) text = val.get<bool>() ? "true" : "false";
        else if (val.is_number_unsigned()) text = std::to_string(val.get<std::uint64_t>());
        else if (val.is_number_integer()) text = std::to_string(val.get<std::int64_t>());
        else if (val.is_number()) text = format_double(val.get<double>());
        else throw ConfigError("config key '" + key + "' has an unsupported value");
        apply_override(cfg, key, text);
    }
}

TrainConfig preset(const std::string& name, Method method) {
    TrainConfig c;
    c.method = method;
    c.stochastic.removal_scheme =
        method == Method::gca_de ? RemovalScheme::degree_weighted : RemovalScheme::uniform;
    const bool adv = adversarial(method);
    if (name == "sbm") {
        c.n_h = 32;
        c.act = Activation::relu;
        c.epochs = 200;
        c.lr = 0.001;
        c.weight_decay = 1e-5;
        c.similarity.temperature = 0.5;
        c.stochastic.p1 = 0.3;
        c.stochastic.p2 = 0.4;
        c.stochastic.q_minus_1 = adv ? 0.01 : 0.2;
        c.stochastic.q_minus_2 = adv ? 0.01 : 0.4;
        if (method == Method::groc) {
            c.epochs = 20;
            c.adversarial.batch_size = 10;
            c.adversarial.q_plus_1 = 0.01;
            c.adversarial.q_plus_2 = 0.01;
        }
    } else if (name == "cora") {
        c.n_h = 128;
        c.act = Activation::relu;
        c.epochs = 200;
        c.lr = 5e-4;
        c.weight_decay = 1e-5;
        c.similarity.temperature = 0.4;
        c.stochastic.p1 = 0.3;
        c.stochastic.p2 = 0.4;
        c.stochastic.q_minus_1 = adv ? 0.01 : 0.2;
        c.stochastic.q_minus_2 = adv ? 0.01 : 0.4;
        if (method == Method::groc) {
            c.epochs = 20;
            c.adversarial.batch_size = 10;
            c.adversarial.q_plus_1 = 0.01;
            c.adversarial.q_plus_2 = 0.01;
        }
    } else if (name == "citeseer") {
        c.n_h = 256;
        c.act = Activation::prelu;
        c.epochs = 200;
        c.lr = 0.001;
        c.weight_decay = 1e-5;
        c.similarity.temperature = 0.9;
        c.stochastic.p1 = 0.3;
        c.stochastic.p2 = 0.2;
        c.stochastic.q_minus_1 = adv ? 0.01 : 0.2;
        c.stochastic.q_minus_2 = adv ? 0.01 : 0.0;
        if (method == Method::groc) {
            c.epochs = 20;
            c.adversarial.batch_size = 10;
            c.adversarial.q_plus_1 = 0.01;
            c.adversarial.q_plus_2 = 0.01;
        }
    } else {
        throw ConfigError("unknown preset '" + name + "' (expected sbm, cora or citeseer)");
    }
    return c;
}

std::string report_csv(const TrainReport& r) {
    std::ostringstream os;
    os << "epoch,loss,removed,inserted\n";
    for (const auto& e : r.epochs)
        os << e.epoch << ',' << format_double(e.loss) << ',' << e.removed << ',' << e.inserted << '\n';
    return os.str();
}

std::vector<std::vector<NodeId>> partition_batches(std::size_t n, std::size_t b, Rng& rng) {
    if (b == 0) throw std::invalid_argument("partition_batches: batch size must be >= 1");
    std::vector<NodeId> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = NodeId(i);
    shuffle(order, rng);
    std::vector<std::vector<NodeId>> out;
    for (std::size_t start = 0; start < n; start += b) {
        const std::size_t end = std::min(n, start + b);
        out.emplace_back(order.begin() + long(start), order.begin() + long(end));
        std::sort(out.back().begin(), out.back().end());
    }
    return out;
}

void run_pass(TwoViewPass& pass, const ModelParams& params, const std::array<View, 2>& views,
              const std::vector<Edge>& extra, std::span<const NodeId> anchors,
              const TrainConfig& cfg, bool edge_grads) {
    auto& t = pass.tape;
    const std::size_t n = views[0].features.rows();
    pass.enc = bind(t, params.encoder);
    pass.head = bind(t, params.head);
    std::array<Var, 2> h{};
    for (int i = 0; i < 2; ++i) {
        AdjacencyOperator op(n, views[i].edges, extra);
        pass.adj[i] = attach(t, op, cfg.detach_normalization, edge_grads);
        Var x = t.constant(views[i].features);
        Var z = encode(t, pass.adj[i], x, pass.enc, params.encoder);
        h[i] = project(t, z, pass.head);
    }
    pass.loss = objective(t, anchors, h[0], h[1], cfg.similarity);
    t.backward(pass.loss);
}

namespace {

GradientTable gradient_table(const TwoViewPass& pass, int view_index, const View& view,
                             const CandidateSets& sets, std::size_t num_graph_edges) {
    const auto& gw = pass.tape.grad(pass.adj[view_index].weights).values();
    std::vector<std::size_t> slot_of(num_graph_edges, std::size_t(-1));
    for (std::size_t k = 0; k < view.origin.size(); ++k)
        if (view.origin[k] != kInsertedEdge) slot_of[view.origin[k]] = k;
    GradientTable table;
    for (EdgeId e : sets.removal) {
        if (slot_of[e] == std::size_t(-1))
            throw std::logic_error("removal candidate missing from the view");
        table.removal.push_back(gw[slot_of[e]]);
    }
    for (std::size_t j = 0; j < sets.insertion.size(); ++j)
        table.insertion.push_back(gw[view.edges.size() + j]);
    return table;
}

} // namespace

TrainResult train(const Graph& g, const TrainConfig& cfg_in, const EpochCallback& on_epoch) {
    TrainConfig cfg = cfg_in;
    cfg.validate();
    if (cfg.method == Method::grace) cfg.stochastic.removal_scheme = RemovalScheme::uniform;
    if (cfg.method == Method::gca_de) cfg.stochastic.removal_scheme = RemovalScheme::degree_weighted;
    if (cfg.method != Method::groc) {
        cfg.adversarial.q_plus_1 = 0.0;
        cfg.adversarial.q_plus_2 = 0.0;
    }

    const std::size_t n = g.num_nodes();
    const bool adv = adversarial(cfg.method);
    const double q_minus[2] = {cfg.stochastic.q_minus_1, cfg.stochastic.q_minus_2};
    const double q_plus[2] = {cfg.adversarial.q_plus_1, cfg.adversarial.q_plus_2};
    const double p_mask[2] = {cfg.stochastic.p1, cfg.stochastic.p2};
    const bool any_removal = q_minus[0] > 0.0 || q_minus[1] > 0.0;
    const bool any_insertion = q_plus[0] > 0.0 || q_plus[1] > 0.0;
    const bool preliminary = adv && (any_removal || any_insertion);

    std::vector<ReceptiveField> fields;
    if (preliminary) fields = receptive_fields(g, cfg.hops);

    TrainResult result;
    result.params = init_params(cfg.seed, g.num_features(), cfg.n_h, cfg.act, cfg.prelu_slope);
    AdamState adam;
    const View base = identity_view(g);

    std::vector<NodeId> all_nodes(n);
    for (std::size_t i = 0; i < n; ++i) all_nodes[i] = NodeId(i);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<std::vector<NodeId>> batches;
        if (cfg.method == Method::groc) {
            Rng prng = make_stream(cfg.seed, StreamPurpose::partition, {epoch});
            batches = partition_batches(n, cfg.adversarial.batch_size, prng);
        } else {
            batches.push_back(all_nodes);
        }

        EpochStats stats;
        stats.epoch = epoch + 1;
        stats.batches = batches.size();
        double loss_sum = 0.0;
        for (std::size_t bi = 0; bi < batches.size(); ++bi) {
            const auto& anchors = batches[bi];
            std::array<View, 2> views;
            for (int i = 0; i < 2; ++i) {
                Rng mrng = make_stream(cfg.seed, StreamPurpose::feature_mask, {epoch, bi, std::uint64_t(i)});
                auto masked = mask_features(g.features(), p_mask[i], mrng, cfg.stochastic.mask_axis);
                views[i] = base;
                views[i].features = std::move(masked.features);
                views[i].delta = std::move(masked.delta);
                if (!adv) {
                    Rng drng = make_stream(cfg.seed, StreamPurpose::edge_drop, {epoch, bi, std::uint64_t(i)});
                    views[i] = drop_edges_stochastic(g, std::move(views[i]), q_minus[i],
                                                     cfg.stochastic.removal_scheme, drng);
                }
            }

            if (preliminary) {
                const auto sets = build_candidate_sets(anchors, fields, g, any_insertion);
                std::vector<Edge> extra;
                if (!sets.insertion.empty()) {
                    const double w = 1.0 / double(sets.insertion.size());
                    for (const auto& [u, v] : sets.insertion) extra.push_back({u, v, w});
                }
                TwoViewPass pre;
                run_pass(pre, result.params, views, extra, anchors, cfg, true);
                result.report.zero_norm_rows += pre.tape.counter_value("zero_norm_rows");
                std::array<GradientTable, 2> tables;
                for (int i = 0; i < 2; ++i) tables[i] = gradient_table(pre, i, views[i], sets, g.num_edges());
                for (int i = 0; i < 2; ++i)
                    views[i] = apply_adversarial(std::move(views[i]), tables[i], sets, q_minus[i],
                                                 sets.insertion.empty() ? 0.0 : q_plus[i]);
            }

            TwoViewPass fin;
            run_pass(fin, result.params, views, {}, anchors, cfg, false);
            result.report.zero_norm_rows += fin.tape.counter_value("zero_norm_rows");
            const double loss = fin.tape.value(fin.loss).item();
            if (!std::isfinite(loss)) throw NumericalError("training diverged: non-finite loss");
            loss_sum += loss;

            auto& p = result.params;
            std::array<DenseMatrix*, 6> slots = {&p.encoder.w1, &p.encoder.w2, &p.head.w1,
                                                 &p.head.b1,    &p.head.w2,    &p.head.b2};
            std::array<const DenseMatrix*, 6> grads = {
                &fin.tape.grad(fin.enc.w1),  &fin.tape.grad(fin.enc.w2),  &fin.tape.grad(fin.head.w1),
                &fin.tape.grad(fin.head.b1), &fin.tape.grad(fin.head.w2), &fin.tape.grad(fin.head.b2)};
            adam_step(slots, grads, adam, cfg.lr, cfg.weight_decay);

            for (const auto& v : views) {
                stats.removed += v.delta.removed.size();
                stats.inserted += v.delta.inserted.size();
            }
        }
        stats.loss = loss_sum / double(batches.size());
        stats.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.report.epochs.push_back(stats);
        if (on_epoch) on_epoch(stats);
    }
    return result;
}

TrainResult train_groc(const Graph& g, const TrainConfig& cfg, const EpochCallback& on_epoch) {
    if (cfg.method != Method::groc) throw ConfigError("train_groc requires method groc");
    return train(g, cfg, on_epoch);
}

TrainResult train_baseline(const Graph& g, const TrainConfig& cfg, const EpochCallback& on_epoch) {
    if (cfg.method == Method::groc) throw ConfigError("train_baseline does not run groc");
    return train(g, cfg, on_epoch);
}

} // namespace groc
