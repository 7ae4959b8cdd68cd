#pragma once

// Data ingestion (CSV), PCA preprocessing, JSON serialisation of results and
// run manifests with input checksums.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "gbt/efficiency.hpp"
#include "gbt/graph.hpp"
#include "gbt/matrix.hpp"
#include "gbt/simulate.hpp"
#include "gbt/twosample.hpp"

namespace gbt {

inline constexpr const char* kVersion = "1.0.0";

using Json = nlohmann::ordered_json;

/// Malformed input file. The message names the source and, where it applies,
/// the 1-based row and column.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Dataset {
    std::string source;
    std::vector<std::string> columns;  // empty without a header
    PointCloud points;

    std::size_t n() const { return points.size(); }
    std::size_t d() const { return points.dim(); }
};

namespace detail {

/// Splits CSV text into records. Quoted fields may contain commas, newlines
/// and doubled quotes. Blank lines are skipped.
inline std::vector<std::vector<std::string>> split_csv(const std::string& text, const std::string& source) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false, field_started = false;
    std::size_t line = 1;
    auto end_field = [&] {
        row.push_back(field);
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        const bool blank = row.empty() && field.empty() && !field_started;
        if (!blank) {
            end_field();
            rows.push_back(std::move(row));
        }
        row.clear();
    };
    std::size_t i = 0;
    if (text.size() >= 3 && text.compare(0, 3, "\xEF\xBB\xBF") == 0) i = 3;
    for (; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') ++line;
                field += c;
            }
            continue;
        }
        switch (c) {
            case '"':
                quoted = true;
                field_started = true;
                break;
            case ',': end_field(); break;
            case '\r': break;
            case '\n':
                end_row();
                ++line;
                break;
            default: field += c; field_started = true;
        }
    }
    if (quoted) throw InputError(source + ": unterminated quoted field at line " + std::to_string(line));
    end_row();
    return rows;
}

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

inline double parse_cell(const std::string& raw, const std::string& source, std::size_t row, std::size_t col) {
    const std::string s = trim(raw);
    double v = 0.0;
    const char* first = s.data();
    if (!s.empty() && s[0] == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
        throw InputError(source + ": row " + std::to_string(row) + ", column " + std::to_string(col) + ": '" + s +
                         "' is not a finite number");
    return v;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace detail

/// Parses numeric CSV text. Rows are reported 1-based counting the header.
inline Dataset parse_csv(const std::string& text, bool has_header, const std::string& source = "<input>") {
    auto rows = detail::split_csv(text, source);
    Dataset ds;
    ds.source = source;
    std::size_t first = 0;
    if (has_header) {
        if (rows.empty()) throw InputError(source + ": missing header row");
        for (auto& c : rows[0]) ds.columns.push_back(detail::trim(c));
        first = 1;
    }
    if (rows.size() <= first) throw InputError(source + ": no data rows");
    const std::size_t d = has_header ? ds.columns.size() : rows[first].size();
    std::vector<double> coords;
    coords.reserve((rows.size() - first) * d);
    for (std::size_t r = first; r < rows.size(); ++r) {
        if (rows[r].size() != d)
            throw InputError(source + ": row " + std::to_string(r + 1) + " has " + std::to_string(rows[r].size()) +
                             " fields, expected " + std::to_string(d));
        for (std::size_t c = 0; c < d; ++c) coords.push_back(detail::parse_cell(rows[r][c], source, r + 1, c + 1));
    }
    ds.points = PointCloud(rows.size() - first, d, std::move(coords));
    return ds;
}

inline Dataset ingest_csv(const std::string& path, bool has_header) {
    return parse_csv(detail::read_file(path), has_header, path);
}

/// Splits a headed CSV on a label column with exactly two distinct values.
/// Rows whose label sorts first form the first sample.
inline std::pair<Dataset, Dataset> parse_labeled_csv(const std::string& text, const std::string& label_col,
                                                     const std::string& source = "<input>") {
    auto rows = detail::split_csv(text, source);
    if (rows.empty()) throw InputError(source + ": missing header row");
    std::vector<std::string> header;
    for (auto& c : rows[0]) header.push_back(detail::trim(c));
    const auto it = std::find(header.begin(), header.end(), label_col);
    if (it == header.end()) throw InputError(source + ": no column named '" + label_col + "' (--label-col)");
    const std::size_t lc = static_cast<std::size_t>(it - header.begin());
    std::vector<std::string> labels;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != header.size())
            throw InputError(source + ": row " + std::to_string(r + 1) + " has " + std::to_string(rows[r].size()) +
                             " fields, expected " + std::to_string(header.size()));
        labels.push_back(detail::trim(rows[r][lc]));
    }
    std::vector<std::string> distinct = labels;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() != 2)
        throw InputError(source + ": label column '" + label_col + "' must contain exactly two distinct values, found " +
                         std::to_string(distinct.size()));
    std::pair<Dataset, Dataset> out;
    std::vector<double> cx, cy;
    for (std::size_t c = 0; c < header.size(); ++c)
        if (c != lc) out.first.columns.push_back(header[c]);
    if (out.first.columns.empty()) throw InputError(source + ": no feature columns besides the label");
    out.second.columns = out.first.columns;
    out.first.source = source + "[" + label_col + "=" + distinct[0] + "]";
    out.second.source = source + "[" + label_col + "=" + distinct[1] + "]";
    for (std::size_t r = 1; r < rows.size(); ++r) {
        auto& dst = labels[r - 1] == distinct[0] ? cx : cy;
        for (std::size_t c = 0; c < header.size(); ++c)
            if (c != lc) dst.push_back(detail::parse_cell(rows[r][c], source, r + 1, c + 1));
    }
    const std::size_t d = out.first.columns.size();
    const std::size_t nx = cx.size() / d, ny = cy.size() / d;
    out.first.points = PointCloud(nx, d, std::move(cx));
    out.second.points = PointCloud(ny, d, std::move(cy));
    return out;
}

// ---------------------------------------------------------------------------
// PCA

struct PcaModel {
    std::vector<double> mean;
    Matrix components;                 // d x k, column j is the j-th loading vector
    std::vector<double> eigenvalues;   // all d, descending
    std::vector<double> explained;     // ratio for each kept component

    double explained_total() const {
        double s = 0.0;
        for (double e : explained) s += e;
        return s;
    }

    PointCloud project(const PointCloud& p) const {
        const std::size_t d = mean.size(), k = components.cols();
        if (p.dim() != d) throw std::invalid_argument("PCA: dimension mismatch");
        PointCloud out(p.size(), k);
        for (std::size_t i = 0; i < p.size(); ++i)
            for (std::size_t j = 0; j < k; ++j) {
                double s = 0.0;
                for (std::size_t a = 0; a < d; ++a) s += (p.at(i, a) - mean[a]) * components(a, j);
                out.at(i, j) = s;
            }
        return out;
    }
};

/// Top-k principal axes of the sample covariance (divisor n - 1). Each axis is
/// signed so that its largest-magnitude loading is positive.
inline PcaModel fit_pca(const PointCloud& p, std::size_t k) {
    const std::size_t d = p.dim();
    if (k < 1 || k > d)
        throw std::invalid_argument("PCA: k=" + std::to_string(k) + " must lie between 1 and d=" + std::to_string(d));
    if (p.size() < 2) throw std::invalid_argument("PCA: need at least two rows");
    auto [mean, cov] = mean_and_covariance(p.as_matrix(), true);
    const auto eig = symmetric_eigen(cov);
    PcaModel m;
    m.mean = std::move(mean);
    m.eigenvalues = eig.values;
    m.components = Matrix(d, k);
    double total = 0.0;
    for (double v : eig.values) total += std::max(v, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
        std::size_t arg = 0;
        for (std::size_t a = 1; a < d; ++a)
            if (std::abs(eig.vectors(a, j)) > std::abs(eig.vectors(arg, j))) arg = a;
        const double sign = eig.vectors(arg, j) < 0.0 ? -1.0 : 1.0;
        for (std::size_t a = 0; a < d; ++a) m.components(a, j) = sign * eig.vectors(a, j);
        m.explained.push_back(total > 0.0 ? std::max(eig.values[j], 0.0) / total : 0.0);
    }
    return m;
}

inline Dataset pca_project(const Dataset& data, std::size_t k) {
    const auto model = fit_pca(data.points, k);
    Dataset out;
    out.source = data.source;
    for (std::size_t j = 0; j < k; ++j) out.columns.push_back("PC" + std::to_string(j + 1));
    out.points = model.project(data.points);
    return out;
}

// ---------------------------------------------------------------------------
// Checksums and JSON

inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

inline std::string checksum(const std::string& bytes) { return "fnv1a64:" + hex64(fnv1a64(bytes)); }

inline std::string file_checksum(const std::string& path) { return checksum(detail::read_file(path)); }

namespace detail {

inline Json opt(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

/// Finite doubles pass through; NaN and infinities become null.
inline Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace detail

inline Json to_json(const TestResult& r) {
    Json j;
    j["functional"] = r.functional;
    j["n1"] = r.n1;
    j["n2"] = r.n2;
    j["cross"] = r.cross;
    j["edges"] = r.edges;
    j["t"] = r.t;
    j["null_mean"] = r.null_mean;
    j["null_mean_exact"] = r.null_mean_exact.str();
    j["r_centered"] = r.r_centered;
    j["sigma11_sq"] = r.sigma11_sq;
    j["sigma1_sq"] = r.sigma1_sq;
    j["degenerate"] = r.degenerate;
    j["z"] = detail::opt(r.z);
    j["p_asymptotic"] = detail::opt(r.p_asymptotic);
    j["p_permutation"] = detail::opt(r.p_permutation);
    j["permutations"] = r.permutations;
    j["direction"] = to_string(r.direction);
    j["seed"] = r.seed;
    j["warnings"] = r.warnings;
    return j;
}

inline Json to_json(const EfficiencyReport& r) {
    Json j;
    j["functional"] = r.functional;
    j["family"] = r.family;
    j["theta"] = r.theta;
    j["h"] = r.h;
    j["p"] = r.p;
    j["r"] = r.r;
    j["sigma12"] = detail::num(r.sigma12);
    j["numerator"] = detail::num(r.numerator);
    j["radicand"] = detail::num(r.radicand);
    j["denominator"] = detail::num(r.denominator);
    j["ae"] = detail::opt(r.ae);
    j["degenerate"] = r.degenerate;
    j["explanation"] = r.explanation;
    Json params;
    params["directed"] = r.params.directed;
    params["provenance"] = r.params.provenance;
    const auto names = r.params.names();
    const auto values = r.params.values();
    Json vals = Json::object();
    for (std::size_t i = 0; i < names.size(); ++i) vals[names[i]] = detail::num(values[i]);
    params["values"] = vals;
    if (!r.params.std_errors.empty()) {
        Json ses = Json::object();
        for (std::size_t i = 0; i < names.size() && i < r.params.std_errors.size(); ++i)
            ses[names[i]] = detail::num(r.params.std_errors[i]);
        params["std_errors"] = ses;
        params["n"] = r.params.n;
        params["reps"] = r.params.reps;
    }
    j["params"] = params;
    Json ints = Json::array();
    for (const auto& i : r.integrals)
        ints.push_back(Json{{"name", i.name}, {"value", detail::num(i.value)}, {"error", detail::num(i.error)}, {"method", i.method}});
    j["integrals"] = ints;
    j["notes"] = r.notes;
    return j;
}

inline Json to_json(const PowerExperimentConfig& c) {
    Json j;
    j["family"] = c.family;
    j["dim"] = c.dim;
    j["theta1"] = c.theta1;
    j["h"] = c.h;
    j["deltas"] = c.deltas;
    j["n1"] = c.n1;
    j["n2"] = c.n2;
    j["replications"] = c.replications;
    j["alpha"] = c.alpha;
    j["tests"] = c.tests;
    j["seed"] = c.seed;
    j["permutations"] = c.permutations;
    j["local"] = c.local;
    j["knn_k"] = c.knn_k;
    j["halfspace_projections"] = c.halfspace.projections;
    return j;
}

inline Json to_json(const PowerCurve& c) {
    Json cells = Json::array();
    for (const auto& cell : c.cells)
        cells.push_back(Json{{"test", cell.test},
                             {"delta", cell.delta},
                             {"power", detail::num(cell.power)},
                             {"se", detail::num(cell.se)},
                             {"mean_stat", detail::num(cell.mean_stat)},
                             {"mean_p", detail::num(cell.mean_p)},
                             {"valid", cell.valid},
                             {"failed", cell.failed}});
    return Json{{"cells", cells}, {"warnings", c.warnings}};
}

inline Json to_json(const Estimate& e) { return Json{{"value", detail::num(e.value)}, {"se", detail::num(e.se)}}; }

inline Json to_json(const LeCamReport& r) {
    Json j;
    j["n1"] = r.n1;
    j["n2"] = r.n2;
    j["reps"] = r.reps;
    j["cov_r_l"] = to_json(r.cov_r_l);
    j["mean_r_null"] = to_json(r.mean_r_null);
    j["var_r_null"] = to_json(r.var_r_null);
    j["mean_l_null"] = to_json(r.mean_l_null);
    j["mean_r_alt"] = to_json(r.mean_r_alt);
    j["power_alt"] = to_json(r.power_alt);
    j["sigma12"] = detail::num(r.sigma12);
    j["sigma1_sq"] = detail::num(r.sigma1_sq);
    j["ae"] = detail::opt(r.ae);
    j["predicted_power"] = detail::opt(r.predicted_power);
    j["notes"] = r.notes;
    return j;
}

// ---------------------------------------------------------------------------
// Run manifests

struct RunManifest {
    std::string subcommand;
    std::vector<std::string> args;                   // full argument vector after the program name
    std::uint64_t seed = 0;
    std::string version = kVersion;
    std::map<std::string, std::string> inputs;       // path -> checksum
    std::map<std::string, std::string> outputs;      // name -> checksum
    std::string timestamp;                           // UTC, informational only

    static std::string utc_now() {
        const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm tm{};
        gmtime_r(&t, &tm);
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
        return buf;
    }

    Json to_json() const {
        Json j;
        j["subcommand"] = subcommand;
        j["args"] = args;
        j["seed"] = seed;
        j["version"] = version;
        j["inputs"] = inputs;
        j["outputs"] = outputs;
        j["timestamp"] = timestamp;
        return j;
    }

    static RunManifest from_json(const Json& j) {
        RunManifest m;
        try {
            m.subcommand = j.at("subcommand").get<std::string>();
            m.args = j.at("args").get<std::vector<std::string>>();
            m.seed = j.at("seed").get<std::uint64_t>();
            m.version = j.at("version").get<std::string>();
            m.inputs = j.value("inputs", std::map<std::string, std::string>{});
            m.outputs = j.value("outputs", std::map<std::string, std::string>{});
            m.timestamp = j.value("timestamp", std::string{});
        } catch (const Json::exception& e) {
            throw InputError(std::string("malformed manifest: ") + e.what());
        }
        return m;
    }
};

}  // namespace gbt
