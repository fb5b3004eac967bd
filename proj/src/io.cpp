#include "scatter/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace scatter {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ifstream open_input(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open file: " + path.string());
    return in;
}

std::ofstream open_output(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write file: " + path.string());
    return out;
}

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_real(std::string_view token, const fs::path& path, std::size_t line) {
    token = trim(token);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size())
        throw ValidationError(path.string() + ":" + std::to_string(line) + ": cannot parse number \"" +
                              std::string(token) + "\"");
    return value;
}

std::size_t parse_index(std::string_view token, const fs::path& path, std::size_t line) {
    token = trim(token);
    std::size_t value = 0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size())
        throw ValidationError(path.string() + ":" + std::to_string(line) + ": cannot parse index \"" +
                              std::string(token) + "\"");
    return value;
}

/// key=value pairs from a "# k1=v1 k2=v2" header line.
std::map<std::string, std::string> parse_header(const std::string& line, const fs::path& path) {
    if (line.empty() || line[0] != '#') throw ValidationError(path.string() + ": missing '#' header line");
    std::map<std::string, std::string> out;
    std::istringstream is(line.substr(1));
    std::string item;
    while (is >> item) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw ValidationError(path.string() + ": malformed header item \"" + item + "\"");
        out[item.substr(0, eq)] = item.substr(eq + 1);
    }
    return out;
}

const std::string& header_field(const std::map<std::string, std::string>& h, const std::string& key,
                                const fs::path& path) {
    const auto it = h.find(key);
    if (it == h.end()) throw ValidationError(path.string() + ": header is missing \"" + key + "\"");
    return it->second;
}

}  // namespace

std::string format_real(double value) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
    return std::string(buf, ptr);
}

SparseSystemMatrix read_matrix(const fs::path& path) {
    auto in = open_input(path);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError(path.string() + ": empty matrix file");
    const auto header = parse_header(line, path);
    const std::size_t rows = parse_index(header_field(header, "rows", path), path, 1);
    const std::size_t cols = parse_index(header_field(header, "cols", path), path, 1);
    const std::size_t nnz = parse_index(header_field(header, "nnz", path), path, 1);

    std::vector<Triplet> triplets;
    triplets.reserve(nnz);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        const auto body = trim(line);
        if (body.empty() || body[0] == '#') continue;
        std::istringstream is{std::string(body)};
        std::string a, b, c, extra;
        if (!(is >> a >> b >> c) || (is >> extra))
            throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": expected \"row col value\"");
        triplets.push_back({parse_index(a, path, lineno), parse_index(b, path, lineno), parse_real(c, path, lineno)});
    }
    if (triplets.size() != nnz)
        throw ValidationError(path.string() + ": header declares nnz=" + std::to_string(nnz) + " but file has " +
                              std::to_string(triplets.size()) + " entries");
    try {
        return SparseSystemMatrix(rows, cols, std::move(triplets));
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

void write_matrix(const fs::path& path, const SparseSystemMatrix& a) {
    auto out = open_output(path);
    out << "# rows=" << a.rows() << " cols=" << a.cols() << " nnz=" << a.nnz() << '\n';
    for (const auto& t : a.triplets()) out << t.row << ' ' << t.col << ' ' << format_real(t.value) << '\n';
}

std::vector<double> read_vector(const fs::path& path) {
    auto in = open_input(path);
    std::vector<double> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto body = trim(line);
        if (body.empty() || body[0] == '#') continue;
        out.push_back(parse_real(body, path, lineno));
    }
    return out;
}

std::vector<double> read_counts(const fs::path& path) {
    auto in = open_input(path);
    std::vector<double> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto body = trim(line);
        if (body.empty() || body[0] == '#') continue;
        std::uint64_t value = 0;
        const auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), value);
        if (ec != std::errc() || ptr != body.data() + body.size())
            throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                                  ": count must be a nonnegative integer, got \"" + std::string(body) + "\"");
        out.push_back(static_cast<double>(value));
    }
    return out;
}

void write_vector(const fs::path& path, std::span<const double> values) {
    auto out = open_output(path);
    for (double v : values) out << format_real(v) << '\n';
}

void write_counts(const fs::path& path, std::span<const double> counts) {
    auto out = open_output(path);
    for (double v : counts) out << static_cast<std::uint64_t>(v) << '\n';
}

HyperImage read_image(const fs::path& path) {
    auto in = open_input(path);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError(path.string() + ": empty image file");
    const auto h = parse_header(line, path);
    const ImageGrid grid(parse_index(header_field(h, "nz", path), path, 1),
                         parse_index(header_field(h, "ny", path), path, 1),
                         parse_index(header_field(h, "Q", path), path, 1),
                         parse_real(header_field(h, "dz", path), path, 1),
                         parse_real(header_field(h, "dy", path), path, 1),
                         parse_real(header_field(h, "q_min", path), path, 1),
                         parse_real(header_field(h, "q_max", path), path, 1));
    std::vector<double> values;
    values.reserve(grid.num_voxels());
    std::size_t lineno = 1;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto body = trim(line);
        if (body.empty() || body[0] == '#') continue;
        std::size_t cols = 0;
        std::string_view rest = body;
        while (true) {
            const auto comma = rest.find(',');
            values.push_back(parse_real(rest.substr(0, comma), path, lineno));
            ++cols;
            if (comma == std::string_view::npos) break;
            rest = rest.substr(comma + 1);
        }
        if (cols != grid.num_q())
            throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                                  std::to_string(grid.num_q()) + " columns, got " + std::to_string(cols));
        ++rows;
    }
    if (rows != grid.num_spatial())
        throw ValidationError(path.string() + ": expected " + std::to_string(grid.num_spatial()) +
                              " spatial rows, got " + std::to_string(rows));
    return HyperImage(grid, std::move(values));
}

void write_image(const fs::path& path, const HyperImage& image) {
    const ImageGrid& g = image.grid();
    auto out = open_output(path);
    out << "# nz=" << g.nz() << " ny=" << g.ny() << " Q=" << g.num_q() << " dz=" << format_real(g.dz())
        << " dy=" << format_real(g.dy()) << " q_min=" << format_real(g.q_min())
        << " q_max=" << format_real(g.q_max()) << '\n';
    for (std::size_t s = 0; s < g.num_spatial(); ++s) {
        const auto row = image.profile(s);
        for (std::size_t q = 0; q < row.size(); ++q) {
            if (q) out << ',';
            out << format_real(row[q]);
        }
        out << '\n';
    }
}

void write_trace(const fs::path& path, std::span<const TraceRecord> traces) {
    auto out = open_output(path);
    out << "iter,objective,nll,penalty,primal_res,dual_res\n";
    for (const auto& t : traces)
        out << t.iter << ',' << format_real(t.objective) << ',' << format_real(t.nll) << ','
            << format_real(t.penalty) << ',' << format_real(t.primal_res) << ',' << format_real(t.dual_res)
            << '\n';
}

namespace {

template <typename T>
T get_field(const json& obj, const std::string& key, const std::string& where) {
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError("config field \"" + where + key + "\" is missing or has the wrong type");
    }
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw ValidationError("config \"" + where + "\" must be a JSON object");
    for (const auto& [key, _] : obj.items())
        if (!allowed.count(key)) throw ValidationError("unknown config key \"" + where + key + "\"");
}

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

std::size_t get_count(const json& obj, const std::string& key, const std::string& where) {
    const auto& v = obj.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0)
        throw ValidationError("config field \"" + where + key + "\" must be a nonnegative integer");
    return v.get<std::size_t>();
}

}  // namespace

RunConfig parse_config(const json& doc, const fs::path& base_dir) {
    static const std::set<std::string> allowed{
        "beta", "lambda", "outer_iters", "inner_iters", "regularizer", "tol_rel_primal", "tol_rel_obj", "seed",
        "deterministic_reductions", "grid", "matrix", "y", "r", "weights", "truth", "output_dir"};
    static const std::set<std::string> grid_keys{"nz", "ny", "Q", "dz", "dy", "q_min", "q_max"};
    reject_unknown(doc, allowed, "");
    for (const char* key : {"beta", "grid", "matrix", "y", "r"})
        if (!doc.contains(key)) throw ValidationError(std::string("config is missing required field \"") + key + "\"");

    RunConfig out;
    SolverConfig& s = out.solver;
    s.beta = get_field<double>(doc, "beta", "");
    if (doc.contains("lambda") && !doc.at("lambda").is_null()) s.lambda = get_field<double>(doc, "lambda", "");
    if (doc.contains("outer_iters")) s.outer_iters = get_count(doc, "outer_iters", "");
    if (doc.contains("inner_iters")) s.inner_iters = get_count(doc, "inner_iters", "");
    if (doc.contains("regularizer")) s.regularizer = regularizer_from_string(get_field<std::string>(doc, "regularizer", ""));
    if (doc.contains("tol_rel_primal")) s.tol_rel_primal = get_field<double>(doc, "tol_rel_primal", "");
    if (doc.contains("tol_rel_obj")) s.tol_rel_obj = get_field<double>(doc, "tol_rel_obj", "");
    if (doc.contains("seed")) s.seed = get_count(doc, "seed", "");
    if (doc.contains("deterministic_reductions"))
        s.deterministic_reductions = get_field<bool>(doc, "deterministic_reductions", "");
    s.validate();

    const json& g = doc.at("grid");
    reject_unknown(g, grid_keys, "grid.");
    for (const auto& key : grid_keys)
        if (!g.contains(key)) throw ValidationError("config is missing required field \"grid." + key + "\"");
    out.grid = ImageGrid(get_count(g, "nz", "grid."), get_count(g, "ny", "grid."), get_count(g, "Q", "grid."),
                         get_field<double>(g, "dz", "grid."), get_field<double>(g, "dy", "grid."),
                         get_field<double>(g, "q_min", "grid."), get_field<double>(g, "q_max", "grid."));

    out.matrix = resolve(base_dir, get_field<std::string>(doc, "matrix", ""));
    out.counts = resolve(base_dir, get_field<std::string>(doc, "y", ""));
    out.background = resolve(base_dir, get_field<std::string>(doc, "r", ""));
    if (doc.contains("weights")) out.weights = resolve(base_dir, get_field<std::string>(doc, "weights", ""));
    if (doc.contains("truth")) out.truth = resolve(base_dir, get_field<std::string>(doc, "truth", ""));
    out.output_dir = resolve(base_dir, doc.contains("output_dir") ? get_field<std::string>(doc, "output_dir", "")
                                                                  : std::string("output"));
    return out;
}

RunConfig load_config(const fs::path& path) {
    auto in = open_input(path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(path.string() + ": invalid JSON: " + e.what());
    }
    return parse_config(doc, path.has_parent_path() ? path.parent_path() : fs::path("."));
}

json to_json(const SolverConfig& c) {
    json j;
    j["beta"] = c.beta;
    j["lambda"] = c.effective_lambda();
    j["outer_iters"] = c.outer_iters;
    j["inner_iters"] = c.inner_iters;
    j["regularizer"] = to_string(c.regularizer);
    j["tol_rel_primal"] = c.tol_rel_primal;
    j["tol_rel_obj"] = c.tol_rel_obj;
    j["seed"] = c.seed;
    j["deterministic_reductions"] = c.deterministic_reductions;
    return j;
}

json to_json(const ImageGrid& g) {
    return json{{"nz", g.nz()}, {"ny", g.ny()}, {"Q", g.num_q()}, {"dz", g.dz()},
                {"dy", g.dy()}, {"q_min", g.q_min()}, {"q_max", g.q_max()}};
}

json to_json(const RunConfig& c) {
    json j = to_json(c.solver);
    j["grid"] = to_json(c.grid);
    j["matrix"] = c.matrix.string();
    j["y"] = c.counts.string();
    j["r"] = c.background.string();
    if (c.weights) j["weights"] = c.weights->string();
    if (c.truth) j["truth"] = c.truth->string();
    j["output_dir"] = c.output_dir.string();
    return j;
}

}  // namespace scatter
