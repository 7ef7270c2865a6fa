#pragma once

// Parsing of field descriptions in CLI configs. A field is either a short string
// ("0", "1", "z", "z^2", "exp", "cos", "1/(4-z^2)", a number) or an object with a "type" key.

#include "reachkit/mildsolver.hpp"

#include <json.hpp>

#include <set>

namespace reachkit::cli {

using json = nlohmann::json;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void allow_keys(const json& j, const std::set<std::string>& keys, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!keys.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

inline double get_number(const json& j, const std::string& where) {
    if (!j.is_number()) throw ConfigError(where + " must be a number");
    return j.get<double>();
}

// complex scalars: a number or [re, im]
inline cplx get_complex(const json& j, const std::string& where) {
    if (j.is_number()) return j.get<double>();
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
        return {j[0].get<double>(), j[1].get<double>()};
    throw ConfigError(where + " must be a number or [re, im]");
}

inline CVec get_complex_list(const json& j, const std::string& where) {
    if (!j.is_array()) throw ConfigError(where + " must be an array");
    CVec out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(get_complex(j[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

inline RVec get_real_list(const json& j, const std::string& where) {
    if (j.is_number()) return {j.get<double>()};
    if (!j.is_array()) throw ConfigError(where + " must be a number or an array of numbers");
    RVec out;
    for (const auto& v : j) out.push_back(get_number(v, where));
    return out;
}

// Rational fields get the widest diamond of opening `alpha` that stays clear of the poles.
inline AnalyticField rational_field(CVec num, CVec poles, cplx scale, double alpha) {
    double s = 1e6;
    DiamondDomain probe(alpha, 1.0, 1);
    for (auto p : poles) s = std::min(s, probe.gauge(&p));
    if (!(s > 1.0)) throw ConfigError("rational field has a pole in the closed unit diamond of opening " +
                                      std::to_string(alpha));
    return fields::rational(std::move(num), std::move(poles), scale, DiamondDomain(alpha, 0.5 * (1.0 + s), 1));
}

inline AnalyticField parse_field(const json& j, double alpha, const std::string& where = "field") {
    if (j.is_number()) return fields::constant(j.get<double>());
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (s == "z") return fields::polynomial({0.0, 1.0});
        if (s == "z^2") return fields::polynomial({0.0, 0.0, 1.0});
        if (s == "exp" || s == "e^z") return fields::exponential(1.0);
        if (s == "cos") return fields::trig_polynomial({0.0, 1.0}, {0.0, 0.0});
        if (s == "1/(4-z^2)") return rational_field({1.0}, {2.0, -2.0}, -1.0, alpha);
        try {
            std::size_t used = 0;
            double v = std::stod(s, &used);
            if (used == s.size()) return fields::constant(v);
        } catch (const std::exception&) {
        }
        throw ConfigError("unknown field '" + s + "' in " + where);
    }
    if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
        throw ConfigError(where + " must be a string, a number or an object with a \"type\"");
    const std::string type = j["type"].get<std::string>();
    if (type == "constant") {
        allow_keys(j, {"type", "value"}, where);
        return fields::constant(get_complex(j.value("value", json(0.0)), where + ".value"));
    }
    if (type == "polynomial") {
        allow_keys(j, {"type", "coeffs"}, where);
        return fields::polynomial(get_complex_list(j.at("coeffs"), where + ".coeffs"));
    }
    if (type == "fourier") {
        allow_keys(j, {"type", "k"}, where);
        return fields::fourier(get_real_list(j.at("k"), where + ".k"));
    }
    if (type == "exponential") {
        allow_keys(j, {"type", "c"}, where);
        return fields::exponential(get_complex(j.value("c", json(1.0)), where + ".c"));
    }
    if (type == "gaussian") {
        allow_keys(j, {"type", "s", "d"}, where);
        return fields::gaussian(get_number(j.at("s"), where + ".s"), j.value("d", 1));
    }
    if (type == "trig") {
        allow_keys(j, {"type", "a", "b"}, where);
        RVec a = get_real_list(j.value("a", json::array()), where + ".a");
        RVec b = get_real_list(j.value("b", json::array()), where + ".b");
        a.resize(std::max(a.size(), b.size()), 0.0);
        b.resize(a.size(), 0.0);
        return fields::trig_polynomial(a, b);
    }
    if (type == "rational") {
        allow_keys(j, {"type", "numerator", "poles", "scale"}, where);
        return rational_field(get_complex_list(j.at("numerator"), where + ".numerator"),
                              get_complex_list(j.at("poles"), where + ".poles"),
                              get_complex(j.value("scale", json(1.0)), where + ".scale"), alpha);
    }
    if (type == "scaled") {
        allow_keys(j, {"type", "factor", "field"}, where);
        return fields::scaled(get_complex(j.at("factor"), where + ".factor"),
                              parse_field(j.at("field"), alpha, where + ".field"));
    }
    throw ConfigError("unknown field type '" + type + "' in " + where);
}

inline cplx ipow(cplx z, int n) {
    cplx r = 1.0;
    for (int i = 0; i < n; ++i) r *= z;
    return r;
}

// g(s, s_d) = coeff s^p s_d^r on the eps-ball; the Lipschitz constant there is
// |coeff| eps^(p + r - 1) sqrt(p^2 + r^2) unless given.
inline SemilinearTerm parse_semilinear(const json& j, const std::string& where = "g") {
    allow_keys(j, {"s_power", "sd_power", "coeff", "epsilon", "lipschitz"}, where);
    const int p = j.value("s_power", 2), r = j.value("sd_power", 0);
    if (p < 0 || r < 0 || p + r < 1) throw ConfigError(where + ": need s_power, sd_power >= 0 with sum >= 1");
    const cplx c = get_complex(j.value("coeff", json(1.0)), where + ".coeff");
    SemilinearTerm g;
    g.epsilon = get_number(j.value("epsilon", json(1.0)), where + ".epsilon");
    if (!(g.epsilon > 0)) throw ConfigError(where + ".epsilon must be positive");
    g.lipschitz_C0 = j.contains("lipschitz")
                         ? get_number(j["lipschitz"], where + ".lipschitz")
                         : std::abs(c) * std::pow(g.epsilon, p + r - 1) * std::sqrt(double(p * p + r * r));
    g.g = [p, r, c](double, cplx, cplx s, cplx sd) { return c * ipow(s, p) * ipow(sd, r); };
    return g;
}

}  // namespace reachkit::cli
