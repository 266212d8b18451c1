#include "groc/graph_io.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "groc/errors.hpp"

namespace groc {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r' && ch != ' ' && ch != '\t') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

double parse_double(const std::string& s, const fs::path& file, std::size_t line) {
    const char* begin = s.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (s.empty() || end != begin + s.size())
        throw DataError(file.string() + ":" + std::to_string(line) + ": bad number '" + s + "'");
    return v;
}

long long parse_int(const std::string& s, const fs::path& file, std::size_t line) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
        throw DataError(file.string() + ":" + std::to_string(line) + ": bad integer '" + s + "'");
    return v;
}

std::ifstream open_in(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot open " + file.string());
    return in;
}

std::ofstream open_out(const fs::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw DataError("cannot write " + file.string());
    return out;
}

std::vector<NodeId> node_array(const nlohmann::json& j, const fs::path& file) {
    if (!j.is_array()) throw DataError(file.string() + ": split entry is not an array");
    std::vector<NodeId> out;
    for (const auto& x : j) {
        if (!x.is_number_integer() || x.get<long long>() < 0)
            throw DataError(file.string() + ": split ids must be non-negative integers");
        out.push_back(x.get<NodeId>());
    }
    return out;
}

} // namespace

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw DataError("format_double failed");
    return std::string(buf, ptr);
}

DenseMatrix read_matrix_csv(const fs::path& file) {
    auto in = open_in(file);
    std::vector<double> values;
    std::size_t rows = 0, cols = 0;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto fields = split_fields(line);
        if (rows == 0) cols = fields.size();
        if (fields.size() != cols)
            throw DataError(file.string() + ":" + std::to_string(lineno) + ": ragged row");
        for (const auto& f : fields) values.push_back(parse_double(f, file, lineno));
        ++rows;
    }
    return DenseMatrix(rows, cols, std::move(values));
}

void write_matrix_csv(const DenseMatrix& m, const fs::path& file) {
    auto out = open_out(file);
    std::string line;
    for (std::size_t r = 0; r < m.rows(); ++r) {
        line.clear();
        for (std::size_t c = 0; c < m.cols(); ++c) {
            if (c) line.push_back(',');
            line += format_double(m(r, c));
        }
        line.push_back('\n');
        out << line;
    }
}

Graph load_graph(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw DataError("dataset directory not found: " + dir.string());
    RawGraph raw;
    raw.features = read_matrix_csv(dir / "features.csv");
    raw.num_nodes = raw.features.rows();

    {
        const auto file = dir / "edges.csv";
        auto in = open_in(file);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty() || line == "\r") continue;
            auto f = split_fields(line);
            if (f.size() != 2 && f.size() != 3)
                throw DataError(file.string() + ":" + std::to_string(lineno) + ": expected u,v[,w]");
            long long u = parse_int(f[0], file, lineno);
            long long v = parse_int(f[1], file, lineno);
            if (u < 0 || v < 0) throw DataError(file.string() + ": negative node id");
            double w = f.size() == 3 ? parse_double(f[2], file, lineno) : 1.0;
            raw.edges.push_back({NodeId(u), NodeId(v), w});
        }
    }

    if (fs::exists(dir / "labels.csv")) {
        const auto file = dir / "labels.csv";
        auto in = open_in(file);
        std::vector<int> labels;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            auto f = split_fields(line);
            if (f.size() == 1 && f[0].empty()) continue;
            if (f.size() != 1) throw DataError(file.string() + ": expected one label per row");
            labels.push_back(int(parse_int(f[0], file, lineno)));
        }
        raw.labels = std::move(labels);
    }

    if (fs::exists(dir / "splits.json")) {
        const auto file = dir / "splits.json";
        auto in = open_in(file);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw DataError(file.string() + ": " + e.what());
        }
        Splits s;
        if (j.is_array() && j.size() == 3) {
            s.train = node_array(j[0], file);
            s.val = node_array(j[1], file);
            s.test = node_array(j[2], file);
        } else if (j.is_object() && j.contains("train") && j.contains("val") && j.contains("test")) {
            s.train = node_array(j["train"], file);
            s.val = node_array(j["val"], file);
            s.test = node_array(j["test"], file);
        } else {
            throw DataError(file.string() + ": expected three arrays (train, val, test)");
        }
        raw.splits = std::move(s);
    }

    return preprocess(raw);
}

void save_graph(const Graph& g, const fs::path& dir) {
    fs::create_directories(dir);
    write_matrix_csv(g.features(), dir / "features.csv");
    {
        auto out = open_out(dir / "edges.csv");
        for (const auto& e : g.edges()) {
            out << e.u << ',' << e.v;
            if (e.w != 1.0) out << ',' << format_double(e.w);
            out << '\n';
        }
    }
    if (g.labels()) {
        auto out = open_out(dir / "labels.csv");
        for (int c : *g.labels()) out << c << '\n';
    }
    if (g.splits()) {
        nlohmann::json j;
        j["train"] = g.splits()->train;
        j["val"] = g.splits()->val;
        j["test"] = g.splits()->test;
        auto out = open_out(dir / "splits.json");
        out << j.dump() << '\n';
    }
}

} // namespace groc
