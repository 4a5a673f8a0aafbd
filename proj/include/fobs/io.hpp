#pragma once

#include "fobs/core_model.hpp"
#include "fobs/expr.hpp"
#include "fobs/linear_design.hpp"
#include "fobs/nonlinear_design.hpp"

#include <json.hpp>

#include <charconv>
#include <complex>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fobs::io {

using nlohmann::json;

class InputError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix matrix_from_json(const json& j, const std::string& what) {
    if (!j.is_array() || j.empty() || !j[0].is_array())
        throw InputError(what + ": expected a nested array of numbers");
    const std::size_t cols = j[0].size();
    Matrix m(j.size(), cols);
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_array() || j[i].size() != cols)
            throw InputError(what + ": rows must all have the same width");
        for (std::size_t k = 0; k < cols; ++k) {
            if (!j[i][k].is_number()) throw InputError(what + ": entries must be numbers");
            m(i, k) = j[i][k].get<double>();
        }
    }
    return m;
}

inline json vector_to_json(const Vector& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

inline Vector vector_from_json(const json& j, const std::string& what) {
    if (!j.is_array()) throw InputError(what + ": expected an array of numbers");
    Vector v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw InputError(what + ": entries must be numbers");
        v[i] = j[i].get<double>();
    }
    return v;
}

/// Nonlinear system declared through expression strings, compiled on demand.
struct NonlinearSpec {
    int n = 0;
    int p = 0;
    std::vector<std::string> f;  // n component expressions
    std::vector<std::string> h;  // p component expressions
    std::string q;
    std::map<std::string, double> params;
    Box domain;

    NonlinearSystem compile() const {
        std::set<std::string> names;
        for (const auto& [k, v] : params) names.insert(k);
        std::vector<expr::Expr> f_exprs, h_exprs;
        for (const auto& s : f) f_exprs.push_back(expr::parse(s, n, names));
        for (const auto& s : h) h_exprs.push_back(expr::parse(s, n, names));
        expr::Expr q_expr = expr::parse(q, n, names);

        auto table = params;  // owned copy shared by the closures
        return NonlinearSystem(
            [f_exprs, table, n = n](const Vector& x) -> Vector {
                Vector out(n);
                for (int i = 0; i < n; ++i) out[i] = f_exprs[i].eval(x, table);
                return out;
            },
            [h_exprs, table, p = p](const Vector& x) -> Vector {
                Vector out(p);
                for (int i = 0; i < p; ++i) out[i] = h_exprs[i].eval(x, table);
                return out;
            },
            [q_expr, table](const Vector& x) -> double { return q_expr.eval(x, table); },
            n, p, domain);
    }
};

/// On-disk system description, either matrices or expressions.
struct SystemSpec {
    std::string name;
    std::optional<LinearSystem> linear;
    std::optional<NonlinearSpec> nonlinear;

    bool is_linear() const { return linear.has_value(); }

    int state_dim() const { return linear ? linear->state_dim() : nonlinear->n; }
    int output_dim() const { return linear ? linear->output_dim() : nonlinear->p; }
};

inline SystemSpec system_from_json(const json& j) {
    if (!j.is_object() || !j.contains("kind"))
        throw InputError("system spec: missing \"kind\"");
    SystemSpec spec;
    spec.name = j.value("name", "");
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "linear") {
        const Matrix f = matrix_from_json(j.at("F"), "F");
        const Matrix h = matrix_from_json(j.at("H"), "H");
        const Matrix q = matrix_from_json(j.at("q"), "q");
        if (q.rows() != 1) throw InputError("q: expected a single row");
        try {
            spec.linear.emplace(f, h, RowVector(q.row(0)));
        } catch (const std::invalid_argument& e) {
            throw InputError(std::string("system spec: ") + e.what());
        }
    } else if (kind == "nonlinear") {
        NonlinearSpec nl;
        nl.n = j.at("n").get<int>();
        nl.p = j.at("p").get<int>();
        nl.f = j.at("F").get<std::vector<std::string>>();
        nl.h = j.at("H").get<std::vector<std::string>>();
        nl.q = j.at("q").get<std::string>();
        if (j.contains("params")) nl.params = j.at("params").get<std::map<std::string, double>>();
        const json& box = j.at("domain_box");
        if (!box.is_array() || static_cast<int>(box.size()) != nl.n)
            throw InputError("domain_box: need one [lo, hi] pair per state");
        Vector lo(nl.n), hi(nl.n);
        for (int i = 0; i < nl.n; ++i) {
            if (!box[i].is_array() || box[i].size() != 2)
                throw InputError("domain_box: entries must be [lo, hi]");
            lo[i] = box[i][0].get<double>();
            hi[i] = box[i][1].get<double>();
        }
        if (static_cast<int>(nl.f.size()) != nl.n)
            throw InputError("F: need one expression per state component");
        if (static_cast<int>(nl.h.size()) != nl.p)
            throw InputError("H: need one expression per output component");
        try {
            nl.domain = Box(lo, hi);
            nl.compile();  // surfaces expression errors at load time
        } catch (const std::exception& e) {
            throw InputError(std::string("system spec: ") + e.what());
        }
        spec.nonlinear = std::move(nl);
    } else {
        throw InputError("system spec: kind must be \"linear\" or \"nonlinear\"");
    }
    return spec;
}

inline json system_to_json(const SystemSpec& spec) {
    json j;
    if (!spec.name.empty()) j["name"] = spec.name;
    if (spec.linear) {
        j["kind"] = "linear";
        j["F"] = matrix_to_json(spec.linear->F);
        j["H"] = matrix_to_json(spec.linear->H);
        j["q"] = matrix_to_json(Matrix(spec.linear->q));
    } else {
        const NonlinearSpec& nl = *spec.nonlinear;
        j["kind"] = "nonlinear";
        j["n"] = nl.n;
        j["p"] = nl.p;
        j["F"] = nl.f;
        j["H"] = nl.h;
        j["q"] = nl.q;
        j["params"] = nl.params;
        json box = json::array();
        for (int i = 0; i < nl.n; ++i) box.push_back({nl.domain.lo[i], nl.domain.hi[i]});
        j["domain_box"] = std::move(box);
    }
    return j;
}

/// Full designed-observer record written by the design commands.
struct DesignReport {
    std::string kind;  // "linear" or "nonlinear"
    int order = 0;
    bool feasible = false;
    std::vector<double> alpha;
    std::optional<BetaCoefficients> beta;
    std::optional<ObserverRealization> observer;
    std::optional<Matrix> t_matrix;                // linear designs
    std::vector<std::string> t_components;         // nonlinear designs, descriptive
    std::map<std::string, double> residuals;
    std::vector<std::string> diagnostics;
};

inline json report_to_json(const DesignReport& r) {
    json j;
    j["kind"] = r.kind;
    j["order"] = r.order;
    j["feasible"] = r.feasible;
    j["alpha"] = r.alpha;
    if (r.beta) j["beta"] = matrix_to_json(r.beta->rows);
    if (r.observer) {
        j["A"] = matrix_to_json(r.observer->A);
        j["B"] = matrix_to_json(r.observer->B);
        j["C"] = matrix_to_json(Matrix(r.observer->C));
        j["D"] = matrix_to_json(Matrix(r.observer->D));
    }
    if (r.t_matrix) j["T"] = matrix_to_json(*r.t_matrix);
    if (!r.t_components.empty()) j["T_components"] = r.t_components;
    j["residuals"] = r.residuals;
    j["diagnostics"] = r.diagnostics;
    return j;
}

inline DesignReport report_from_json(const json& j) {
    DesignReport r;
    r.kind = j.at("kind").get<std::string>();
    r.order = j.at("order").get<int>();
    r.feasible = j.at("feasible").get<bool>();
    r.alpha = j.at("alpha").get<std::vector<double>>();
    if (j.contains("beta")) r.beta = BetaCoefficients(matrix_from_json(j.at("beta"), "beta"));
    if (j.contains("A")) {
        ObserverRealization obs;
        obs.A = matrix_from_json(j.at("A"), "A");
        obs.B = matrix_from_json(j.at("B"), "B");
        obs.C = RowVector(matrix_from_json(j.at("C"), "C").row(0));
        obs.D = RowVector(matrix_from_json(j.at("D"), "D").row(0));
        r.observer = std::move(obs);
    }
    if (j.contains("T")) r.t_matrix = matrix_from_json(j.at("T"), "T");
    if (j.contains("T_components"))
        r.t_components = j.at("T_components").get<std::vector<std::string>>();
    if (j.contains("residuals"))
        r.residuals = j.at("residuals").get<std::map<std::string, double>>();
    if (j.contains("diagnostics"))
        r.diagnostics = j.at("diagnostics").get<std::vector<std::string>>();
    return r;
}

/// beta row vectors as {"beta": [[...], ...]}.
inline BetaCoefficients beta_from_json(const json& j) {
    return BetaCoefficients(matrix_from_json(j.at("beta"), "beta"));
}

inline json beta_to_json(const BetaCoefficients& beta) {
    return json{{"beta", matrix_to_json(beta.rows)}};
}

inline json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw InputError("'" + path + "': " + e.what());
    }
    return j;
}

inline void save_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write '" + path + "'");
    out << j.dump(2) << '\n';
}

/// "a+bi" complex literal: real part, optional signed imaginary part
/// terminated by 'i'. Pure-imaginary forms like "0.4i" and "-i" also parse.
inline std::complex<double> parse_complex(const std::string& text) {
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto fail = [&]() -> std::complex<double> {
        throw InputError("malformed complex number '" + text + "' (expected forms: 1.5, 0.3+0.4i)");
    };

    auto read_number = [&](const char* p, double& out) -> const char* {
        const char* q = p;
        if (q < end && (*q == '+' || *q == '-')) ++q;
        if (q < end && (*q == 'i')) {  // bare "i" / "+i" / "-i"
            out = (p < end && *p == '-') ? -1.0 : 1.0;
            return q;
        }
        double value = 0.0;
        const auto res = std::from_chars(q, end, value);
        if (res.ec != std::errc{}) return nullptr;
        out = (p < end && *p == '-') ? -value : value;
        return res.ptr;
    };

    double first = 0.0;
    const char* p = read_number(begin, first);
    if (!p) fail();
    if (p == end) return {first, 0.0};
    if (*p == 'i') {
        if (p + 1 != end) fail();
        return {0.0, first};
    }
    if (*p != '+' && *p != '-') fail();
    double second = 0.0;
    const char* p2 = read_number(p, second);
    if (!p2 || p2 >= end || *p2 != 'i' || p2 + 1 != end) fail();
    return {first, second};
}

/// Comma-separated eigenvalue list from the command line.
inline std::vector<std::complex<double>> parse_eigenvalue_list(const std::string& text) {
    std::vector<std::complex<double>> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto first = item.find_first_not_of(" \t");
        if (first == std::string::npos) throw InputError("empty eigenvalue entry");
        const auto last = item.find_last_not_of(" \t");
        out.push_back(parse_complex(item.substr(first, last - first + 1)));
    }
    if (out.empty()) throw InputError("no eigenvalues supplied");
    return out;
}

}  // namespace fobs::io
