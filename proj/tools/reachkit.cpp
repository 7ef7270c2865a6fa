// reachkit command-line front end.
//
//   reachkit --config run.json
//   reachkit <command> [--flag value ...] [--params '{...}'] [--output-dir D] [--seed S] [--tier T]
//
// Exit status: 0 all checks pass, 1 numerical stage failure, 2 invalid configuration,
// 3 run completed but at least one check failed. Nothing is written unless the run completes.

#include "fieldspec.hpp"
#include "reachkit/verify.hpp"

#include <CLI11.hpp>

#include <cfloat>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unistd.h>

namespace fs = std::filesystem;
using namespace reachkit;
using namespace reachkit::cli;
using verify::Check;

namespace {

struct Tier {
    std::string name;
    int n_samples;
    double h, dt;
    int panels;
};

const std::vector<Tier> tiers{{"coarse", 200, 0.04, 0.02, 12}, {"standard", 1000, 0.02, 0.01, 16},
                              {"fine", 4000, 0.01, 0.005, 24}};

Tier tier_named(const std::string& s) {
    for (const auto& t : tiers)
        if (t.name == s) return t;
    throw ConfigError("unknown tier '" + s + "' (coarse, standard, fine)");
}

struct RunConfig {
    std::string command;
    json params = json::object();
    std::string output_dir = "reachkit-out";
    std::uint64_t seed = 20260101;
    Tier tier = tiers[1];
};

// Reads command parameters with defaults and records what was used.
class Params {
public:
    Params(const json& in, const std::set<std::string>& allowed) : in_(in) { allow_keys(in, allowed, "params"); }

    double num(const std::string& k, double def) {
        double v = in_.contains(k) ? get_number(in_[k], "params." + k) : def;
        used_[k] = v;
        return v;
    }
    int integer(const std::string& k, int def) {
        if (in_.contains(k) && !in_[k].is_number_integer()) throw ConfigError("params." + k + " must be an integer");
        int v = in_.contains(k) ? in_[k].get<int>() : def;
        used_[k] = v;
        return v;
    }
    bool flag(const std::string& k, bool def) {
        if (in_.contains(k) && !in_[k].is_boolean()) throw ConfigError("params." + k + " must be true or false");
        bool v = in_.contains(k) ? in_[k].get<bool>() : def;
        used_[k] = v;
        return v;
    }
    RVec list(const std::string& k, const RVec& def) {
        RVec v = in_.contains(k) ? get_real_list(in_[k], "params." + k) : def;
        used_[k] = v;
        return v;
    }
    std::optional<json> raw(const std::string& k) {
        if (!in_.contains(k)) return std::nullopt;
        used_[k] = in_[k];
        return in_[k];
    }
    json raw_or(const std::string& k, json def) {
        json v = in_.contains(k) ? in_[k] : std::move(def);
        used_[k] = v;
        return v;
    }
    const json& used() const { return used_; }

private:
    const json& in_;
    json used_ = json::object();
};

// Files are written into a staging directory and moved into output_dir only on success.
class Staging {
public:
    explicit Staging(const fs::path& out) {
        fs::path parent = out.has_parent_path() ? out.parent_path() : fs::path(".");
        dir_ = parent / ("." + out.filename().string() + ".staging-" + std::to_string(::getpid()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    ~Staging() {
        std::error_code ec;
        fs::remove_all(dir_, ec);
    }
    std::string path(const std::string& name) {
        files_.push_back(name);
        return (dir_ / name).string();
    }
    void text(const std::string& name, const std::string& body) {
        std::ofstream f(path(name));
        f << body;
        if (!f) throw Error("io", "cannot write " + name);
    }
    const std::vector<std::string>& files() const { return files_; }
    void commit(const fs::path& out) {
        fs::create_directories(out);
        for (const auto& f : files_) fs::rename(dir_ / f, out / f);
    }

private:
    fs::path dir_;
    std::vector<std::string> files_;
};

struct RunResult {
    json resolved;
    json measured = json::object();
    std::vector<Check> checks;
};

std::string num(double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
}

std::string checks_csv(const std::vector<Check>& cs) {
    std::ostringstream s;
    s << "name,value,bound,pass\n";
    for (const auto& c : cs) s << '"' << c.name << "\"," << num(c.value) << "," << num(c.bound) << "," << c.pass << "\n";
    return s.str();
}

Check finite_check(const std::string& name, double v) { return verify::at_most(name, v, DBL_MAX); }

QuadratureRule rule_for(const Tier& t) {
    QuadratureRule r;
    r.panels = t.panels;
    return r;
}

// ---------------------------------------------------------------- semigroup-eval

RunResult cmd_semigroup_eval(const RunConfig& cfg, Staging& st) {
    Params p(cfg.params, {"field", "alpha", "t", "n_points"});
    const double alpha = p.num("alpha", 2.0);
    if (!(alpha > 0)) throw ConfigError("params.alpha must be positive");
    json fj = p.raw_or("field", "cos");
    AnalyticField y0 = parse_field(fj, alpha);
    RVec ts = p.list("t", {0.01, 0.1, 1.0});
    for (double t : ts)
        if (!(t > 0)) throw ConfigError("params.t must be positive");
    const int n = p.integer("n_points", cfg.tier.n_samples);
    check_validity(y0, DiamondDomain(alpha, 1.0, y0.dim));

    std::vector<CVec> pts;
    if (y0.dim == 1)
        for (auto z : verify::diamond_points(alpha, n)) pts.push_back({z});
    else
        pts = boundary_sample_c(DiamondDomain(alpha, 1.0, y0.dim), n);
    const QuadratureRule rule = rule_for(cfg.tier);
    RVec all_t;
    std::vector<CVec> all_z;
    std::vector<ComplexEvalReport> reps;
    for (double t : ts) {
        std::vector<ComplexEvalReport> r(pts.size());
        parallel_for(pts.size(), [&](std::size_t i) { r[i] = propagate_complex(y0, alpha, t, pts[i], rule, true); });
        for (std::size_t i = 0; i < pts.size(); ++i) {
            all_t.push_back(t);
            all_z.push_back(pts[i]);
            reps.push_back(r[i]);
        }
    }
    write_reports_csv(st.path("reports.csv"), all_t, all_z, reps);

    RunResult res;
    double vmax = 0, trunc = 0;
    bool finite = true;
    for (const auto& r : reps) {
        finite = finite && std::isfinite(std::abs(r.value));
        vmax = std::max(vmax, std::abs(r.value));
        trunc = std::max(trunc, r.truncation_bound);
    }
    res.checks.push_back(finite_check("sup |T_t y0| over the samples (finite)", finite ? vmax : NAN));
    res.checks.push_back(verify::at_most("quadrature truncation bound", trunc, rule.tol));
    if (fj.is_object() && fj.value("type", "") == "fourier") {
        RVec k = get_real_list(fj["k"], "field.k");
        double k2 = 0, worst = 0;
        for (double v : k) k2 += v * v;
        for (std::size_t i = 0; i < reps.size(); ++i) {
            cplx kz = 0;
            for (std::size_t j = 0; j < k.size(); ++j) kz += k[j] * all_z[i][j];
            cplx exact = std::exp(-k2 * all_t[i]) * std::exp(I * kz);
            worst = std::max(worst, std::abs(reps[i].value - exact) / std::abs(exact));
        }
        res.checks.push_back(verify::at_most("Fourier closed form, relative", worst, 1e-6));
        res.measured["fourier_relative_error"] = worst;
    }
    res.measured["sup_value"] = vmax;
    res.measured["n_points"] = pts.size();
    res.resolved = p.used();
    return res;
}

// ---------------------------------------------------------------- verify-estimates

RunResult cmd_verify_estimates(const RunConfig& cfg, Staging& st) {
    Params p(cfg.params, {"alpha", "d", "count", "max_degree", "t", "n_points", "slack"});
    const double alpha = p.num("alpha", 2.0);
    if (!(alpha > 1)) throw ConfigError("params.alpha must exceed 1 for the explicit constants");
    const int d = p.integer("d", 1);
    const int count = p.integer("count", 20), deg = p.integer("max_degree", 8);
    if (count < 1 || deg < 1) throw ConfigError("params.count and params.max_degree must be positive");
    RVec ts = p.list("t", {1e-3, 1e-2, 1e-1, 1.0});
    const int n = p.integer("n_points", cfg.tier.n_samples);
    const double slack = p.num("slack", 1e-6);
    if (d != 1) throw Error("verify", "the explicit-constant suite is implemented for d = 1");

    auto family = verify::random_trig_family(cfg.seed, count, deg);
    auto rep = verify::estimate_constants(alpha, family, ts, n, rule_for(cfg.tier), slack);
    std::ostringstream csv;
    csv << "field,t,y0_sup,y0e_sup,y1_max,y1_bound,y2_max,y2_bound,z1_max,z1_bound,z2_max,z2_bound\n";
    const double f2 = verify::y2_factor(alpha), g2 = verify::z2_factor(alpha);
    for (const auto& r : rep.rows)
        csv << r.field << "," << num(r.t) << "," << num(r.y0_sup) << "," << num(r.y0e_sup) << "," << num(r.y1_max) << ","
            << num(r.y0_sup) << "," << num(r.y2_max) << "," << num(f2 * r.y0e_sup) << "," << num(r.z1_max) << ","
            << num(r.y0_sup) << "," << num(r.z2_max) << "," << num(g2 * r.y0e_sup) << "\n";
    st.text("constants.csv", csv.str());

    RunResult res;
    res.checks = rep.checks;
    res.measured["n_points"] = rep.n_points;
    res.measured["worst_ratio"] = {{"y1", rep.worst_ratio[0]},
                                   {"y2", rep.worst_ratio[1]},
                                   {"z1", rep.worst_ratio[2]},
                                   {"z2", rep.worst_ratio[3]}};
    res.resolved = p.used();
    return res;
}

// ---------------------------------------------------------------- solve

RunResult cmd_solve(const RunConfig& cfg, Staging& st) {
    Params p(cfg.params, {"y0", "q", "W", "f", "g", "delta", "T", "alpha", "steps"});
    const double alpha = p.num("alpha", 2.0), T = p.num("T", 0.5);
    if (!(alpha > 1) || !(T > 0)) throw ConfigError("need params.alpha > 1 and params.T > 0");
    AnalyticField y0 = parse_field(p.raw_or("y0", "cos"), alpha, "params.y0");
    LowerOrderTerms lot;
    if (auto q = p.raw("q")) lot.q = steady(parse_field(*q, alpha, "params.q"));
    if (auto w = p.raw("W")) lot.W = steady(parse_field(*w, alpha, "params.W"));
    TimeField f;
    if (auto fj = p.raw("f")) f = steady(parse_field(*fj, alpha, "params.f"));
    std::optional<SemilinearTerm> g;
    if (auto gj = p.raw("g")) g = parse_semilinear(*gj, "params.g");
    if (g && (lot.q || lot.W)) throw ConfigError("params: g cannot be combined with q or W");
    double delta = 0;
    if (g) {
        auto dj = p.raw("delta");
        if (!dj) throw ConfigError("params.delta is required with params.g");
        delta = get_number(*dj, "params.delta");
    }
    MildOptions o;
    o.h = cfg.tier.h;
    o.steps = p.integer("steps", std::max(8, int(std::lround(T / cfg.tier.dt))));
    o.rule = rule_for(cfg.tier);
    if (o.steps < 1) throw ConfigError("params.steps must be positive");

    MildTrajectory tr = g ? solve_semilinear(y0, *g, f, T, alpha, delta, o) : solve_linear(y0, lot, f, T, alpha, o);
    tr.write_csv(st.path("trajectory.csv"));

    double worst = 0;
    int measured = 0;
    json log = json::array();
    for (const auto& e : tr.iteration_log) {
        log.push_back({{"k_begin", e.k_begin},
                       {"k_end", e.k_end},
                       {"sweep", e.sweep},
                       {"difference", e.difference},
                       {"ratio", e.ratio},
                       {"measured", e.measured},
                       {"accepted", e.accepted}});
        if (e.accepted && e.measured) {
            worst = std::max(worst, e.ratio);
            ++measured;
        }
    }
    json norms = json::array();
    for (std::size_t k = 0; k < tr.y.size(); ++k) norms.push_back({{"t", tr.times[k]}, {"norm", tr.engine->norm(tr.y[k])}});
    auto rhs = g ? semilinear_rhs(*g, f) : linear_rhs(lot, f);
    auto rr = residual_check(trajectory_eval(tr), rhs, T, T / 20, 0.05);
    st.text("trajectory.json", json{{"iteration_log", log}, {"norms", norms}}.dump(2) + "\n");

    std::ostringstream sweeps;
    sweeps << "k_begin,k_end,sweep,difference,ratio,measured,accepted\n";
    for (const auto& e : tr.iteration_log)
        sweeps << e.k_begin << "," << e.k_end << "," << e.sweep << "," << num(e.difference) << "," << num(e.ratio) << ","
               << e.measured << "," << e.accepted << "\n";
    st.text("picard.csv", sweeps.str());

    RunResult res;
    res.checks.push_back(verify::at_most("max accepted Picard sweep ratio", worst, 0.55));
    res.measured["picard_max_ratio"] = worst;
    res.measured["picard_measured_sweeps"] = measured;
    res.measured["subinterval_T0"] = tr.T0;
    res.measured["halvings"] = tr.halvings;
    res.measured["constant_C"] = tr.constant;
    res.measured["residual_h"] = rr.residual_h;
    res.measured["residual_h2"] = rr.residual_h2;
    res.measured["residual_order"] = rr.order;
    res.resolved = p.used();
    return res;
}

// ---------------------------------------------------------------- nullcontrol

RunResult cmd_nullcontrol(const RunConfig& cfg, Staging& st) {
    Params p(cfg.params,
             {"L", "T", "omega", "y0", "penalty_eps", "cg_max", "cg_tol", "h", "dt", "eta_outer", "glue"});
    GridProblem P;
    P.L = p.num("L", 6.0);
    P.T = p.num("T", 1.0);
    P.omega_inner = p.num("omega", 2.0);
    P.h = p.num("h", cfg.tier.h);
    P.dt = p.num("dt", cfg.tier.dt);
    HumOptions o;
    o.penalty_eps = p.num("penalty_eps", 1e-8);
    o.cg_max = p.integer("cg_max", 500);
    o.cg_tol = p.num("cg_tol", 1e-3);
    const double eta_outer = p.num("eta_outer", 3.0);
    const bool glue = p.flag("glue", true);
    json yj = p.raw_or("y0", "bump");
    std::function<cplx(double)> y0fn;
    if (yj.is_string() && yj.get<std::string>() == "bump") {
        Cutoff b = cutoff(CutoffProfile::bump, 0.0, 1.0);
        y0fn = [b](double x) { return cplx(b.value(x)); };
    } else {
        AnalyticField f = parse_field(yj, 2.0, "params.y0");
        y0fn = [f](double x) { return f.real_at(x); };
    }
    try {
        P.validate();
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }

    CVec y0 = sample_interior(P, y0fn);
    auto sol = hum_control(P, y0, nullptr, o);
    const int N = P.intervals();
    RunResult res;
    const double ratio = sol.final_norm / sol.initial_norm;
    res.checks.push_back(verify::at_most("||Y(T)|| / ||y0||", ratio, 1e-3));
    res.checks.push_back(verify::at_most("CG iterations", sol.cg_iterations, o.cg_max));
    res.checks.push_back(verify::at_most("duality identity (relative)", sol.duality_gap, 1e-8));
    res.measured["final_ratio"] = ratio;
    res.measured["cg_iterations"] = sol.cg_iterations;
    res.measured["duality_gap"] = sol.duality_gap;
    json wn = json::object();
    for (const auto& [k, v] : sol.weighted_norms) wn[k] = v;
    res.measured["log10_weighted_norms"] = wn;

    std::ostringstream cg;
    cg << "iteration,relative_residual\n";
    for (std::size_t i = 0; i < sol.residual_history.size(); ++i) cg << i << "," << num(sol.residual_history[i]) << "\n";
    st.text("cg.csv", cg.str());

    std::optional<GluedControl> gl;
    if (glue) {
        auto ycheck = solve_forward(P, y0);
        gl = glue_control(P, sol, ycheck, cutoff(CutoffProfile::quintic, P.omega_inner, eta_outer));
        double yT = 0, y00 = 0, inside = 0;
        for (int i = 0; i <= P.cells(); ++i) {
            yT += std::norm(gl->y.v[N][i]);
            y00 += std::norm(gl->y.v[0][i]);
            if (std::abs(P.x(i)) < P.omega_inner)
                for (int k = 0; k <= N; ++k) inside = std::max(inside, std::abs(gl->h.v[k][i]));
        }
        res.checks.push_back(verify::at_most("glued ||y(T)|| / ||y0||", std::sqrt(yT / y00), 1e-3));
        res.checks.push_back(verify::at_most("glued control inside B(omega)", inside, 0.0));
        std::ostringstream h;
        h << "t,x,re_h,im_h\n";
        for (int k = 0; k <= N; ++k)
            for (int i = 0; i <= P.cells(); ++i)
                h << num(k * P.dt) << "," << num(P.x(i)) << "," << num(gl->h.v[k][i].real()) << ","
                  << num(gl->h.v[k][i].imag()) << "\n";
        st.text("control.csv", h.str());
    }
    std::ostringstream s;
    s << "x,re_y0,im_y0,re_Y_T,im_Y_T" << (glue ? ",re_glued_T,im_glued_T" : "") << "\n";
    for (int i = 0; i <= P.cells(); ++i) {
        cplx a = (i > 0 && i < P.cells()) ? y0[i - 1] : cplx(0.0), b = sol.Y.v[N][i];
        s << num(P.x(i)) << "," << num(a.real()) << "," << num(a.imag()) << "," << num(b.real()) << "," << num(b.imag());
        if (glue) s << "," << num(gl->y.v[N][i].real()) << "," << num(gl->y.v[N][i].imag());
        s << "\n";
    }
    st.text("state.csv", s.str());
    res.resolved = p.used();
    return res;
}

// ---------------------------------------------------------------- reach

RunResult cmd_reach(const RunConfig& cfg, Staging& st) {
    Params p(cfg.params, {"target", "alpha", "alpha1", "alpha0", "T", "q", "W", "g", "y0", "delta_alpha", "delta0",
                          "steps", "tolerance"});
    ReachProblem pb;
    pb.alpha = p.num("alpha", 0.5);
    pb.alpha1 = p.num("alpha1", 0.0);
    pb.alpha0 = p.num("alpha0", 0.0);
    pb.T = p.num("T", 0.5);
    if (!(pb.alpha > 0 && pb.alpha < 1)) throw ConfigError("params.alpha must lie in (0, 1)");
    auto tj = p.raw("target");
    if (!tj) throw ConfigError("params.target is required");
    pb.y1 = parse_field(*tj, pb.alpha, "params.target");
    const double acoef = pb.alpha0 > 0 ? pb.alpha0 : pb.alpha;
    if (auto q = p.raw("q")) pb.lot.q = steady(parse_field(*q, acoef, "params.q"));
    if (auto w = p.raw("W")) pb.lot.W = steady(parse_field(*w, acoef, "params.W"));
    if (auto gj = p.raw("g")) pb.g = parse_semilinear(*gj, "params.g");
    if (auto y0 = p.raw("y0")) pb.y0 = parse_field(*y0, pb.alpha, "params.y0");
    pb.delta_alpha = p.num("delta_alpha", 0.0);
    pb.delta0 = p.num("delta0", 0.0);
    ReachOptions o;
    o.mild.steps = p.integer("steps", 48);
    o.mild.rule = rule_for(cfg.tier);
    const double tol = p.num("tolerance", pb.g ? 5e-2 : 1e-2);

    auto cert = reach_with_initial(pb, o);

    std::ostringstream tr;
    tr << "t,re_left,im_left,re_right,im_right\n";
    for (std::size_t k = 0; k < cert.u.t.size(); ++k)
        tr << num(cert.u.t[k]) << "," << num(cert.u.left[k].real()) << "," << num(cert.u.left[k].imag()) << ","
           << num(cert.u.right[k].real()) << "," << num(cert.u.right[k].imag()) << "\n";
    st.text("trace.csv", tr.str());
    std::ostringstream sc;
    sc << "x,re_target,im_target,re_coarse,im_coarse,re_fine,im_fine,re_extrapolated,im_extrapolated\n";
    const auto& fw = cert.forward;
    for (std::size_t i = 0; i < fw.x.size(); ++i) {
        cplx tv = pb.y1.real_at(fw.x[i]);
        sc << num(fw.x[i]) << "," << num(tv.real()) << "," << num(tv.imag()) << "," << num(fw.coarse[i].real()) << ","
           << num(fw.coarse[i].imag()) << "," << num(fw.fine[i].real()) << "," << num(fw.fine[i].imag()) << ","
           << num(fw.extrapolated[i].real()) << "," << num(fw.extrapolated[i].imag()) << "\n";
    }
    st.text("state.csv", sc.str());
    std::ostringstream cc;
    cc << "k,abs_coeff\n";
    for (std::size_t k = 0; k < cert.decay.abs_coeffs.size(); ++k) cc << k << "," << num(cert.decay.abs_coeffs[k]) << "\n";
    st.text("coefficients.csv", cc.str());

    RunResult res;
    res.checks.push_back(verify::at_most("L^inf relative error on [-0.9, 0.9]", cert.linf_rel, tol));
    res.checks.push_back(finite_check("control_norm / ||y1||_{L^inf(Omega_alpha)} (finite)", cert.control_ratio));
    res.measured = {{"linf_rel", cert.linf_rel},
                    {"linf_rel_coarse", fw.linf_rel_coarse},
                    {"linf_rel_fine", fw.linf_rel_fine},
                    {"l2_rel", cert.l2_rel},
                    {"control_norm", cert.control_norm},
                    {"target_norm", cert.target_norm},
                    {"control_ratio", cert.control_ratio},
                    {"decay_rho", cert.decay.rho},
                    {"decay_geometric", cert.decay.geometric},
                    {"alpha1", cert.alpha1},
                    {"T1", cert.T1},
                    {"initial_residual", cert.initial_residual},
                    {"endpoint_residual", cert.endpoint_residual},
                    {"free_observation", cert.free_obs},
                    {"final_observation", cert.final_obs},
                    {"fixed_point_iterations", cert.fixed_point_iterations}};
    if (pb.y0) {
        res.measured["phase1_final"] = cert.phase1_final;
        res.measured["phase1_cg"] = cert.phase1_cg;
    }
    res.resolved = p.used();
    return res;
}

// ---------------------------------------------------------------- smoothing-check

RunResult cmd_smoothing(const RunConfig& cfg, Staging& st) {
    Params p(cfg.params, {"T", "n_noise", "degree", "window", "cells", "steps"});
    const double T = p.num("T", 0.5), window = p.num("window", 0.9);
    const int n_noise = p.integer("n_noise", 100), degree = p.integer("degree", 24);
    const int cells = p.integer("cells", 400), steps = p.integer("steps", 3200);
    if (!(T > 0) || !(window > 0 && window < 1) || n_noise < 1 || degree < 4 || cells < 8 || steps < 1)
        throw ConfigError("smoothing-check: need T > 0, 0 < window < 1, n_noise >= 1, degree >= 4, cells >= 8");
    auto u = verify::rough_trace(cfg.seed, T, n_noise);
    auto rep = verify::smoothing_check(u, T, window, degree, cells, steps);

    std::ostringstream tr;
    tr << "t,left,right\n";
    for (std::size_t k = 0; k < u.t.size(); ++k)
        tr << num(u.t[k]) << "," << num(u.left[k].real()) << "," << num(u.right[k].real()) << "\n";
    st.text("trace.csv", tr.str());
    std::ostringstream cc;
    cc << "k,abs_coeff\n";
    for (std::size_t k = 0; k < rep.abs_coeffs.size(); ++k) cc << k << "," << num(rep.abs_coeffs[k]) << "\n";
    st.text("coefficients.csv", cc.str());

    RunResult res;
    res.checks.push_back(verify::at_most("decay ratio at the full degree", rep.rho_full, 0.75));
    res.checks.push_back(verify::at_most("relative change of the ratio at half degree", rep.change, 0.10));
    res.measured = {{"rho_full", rep.rho_full},         {"rho_half", rep.rho_half},
                    {"change", rep.change},             {"geometric_full", rep.geometric_full},
                    {"geometric_half", rep.geometric_half}, {"discretization", rep.discretization}};
    res.resolved = p.used();
    return res;
}

using Command = RunResult (*)(const RunConfig&, Staging&);

const std::map<std::string, Command> commands{{"semigroup-eval", cmd_semigroup_eval},
                                              {"verify-estimates", cmd_verify_estimates},
                                              {"solve", cmd_solve},
                                              {"nullcontrol", cmd_nullcontrol},
                                              {"reach", cmd_reach},
                                              {"smoothing-check", cmd_smoothing}};

// per-command flags; each maps to the params key of the same name
const std::map<std::string, std::vector<std::string>> command_flags{
    {"semigroup-eval", {"field", "alpha", "t", "n_points"}},
    {"verify-estimates", {"alpha", "d", "count", "max_degree", "t", "n_points", "slack"}},
    {"solve", {"y0", "q", "W", "f", "g", "delta", "T", "alpha", "steps"}},
    {"nullcontrol", {"L", "T", "omega", "y0", "penalty_eps", "cg_max", "cg_tol", "h", "dt", "eta_outer", "glue"}},
    {"reach", {"target", "alpha", "alpha1", "alpha0", "T", "q", "W", "g", "y0", "delta_alpha", "delta0", "steps",
               "tolerance"}},
    {"smoothing-check", {"T", "n_noise", "degree", "window", "cells", "steps"}}};

RunConfig config_from_json(const json& j) {
    allow_keys(j, {"command", "params", "output_dir", "seed", "tier"}, "config");
    RunConfig c;
    if (!j.contains("command") || !j["command"].is_string()) throw ConfigError("config.command must be a string");
    c.command = j["command"].get<std::string>();
    if (!commands.count(c.command)) throw ConfigError("unknown command '" + c.command + "'");
    if (j.contains("params")) {
        if (!j["params"].is_object()) throw ConfigError("config.params must be an object");
        c.params = j["params"];
    }
    if (j.contains("output_dir")) {
        if (!j["output_dir"].is_string()) throw ConfigError("config.output_dir must be a string");
        c.output_dir = j["output_dir"].get<std::string>();
    }
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned()) throw ConfigError("config.seed must be a non-negative integer");
        c.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("tier")) {
        if (!j["tier"].is_string()) throw ConfigError("config.tier must be a string");
        c.tier = tier_named(j["tier"].get<std::string>());
    }
    return c;
}

std::string flag_for(const std::string& key) {
    if (key == "h") return "--spacing";  // -h is help
    if (key == "dt") return "--time-step";
    std::string f = "--" + key;
    std::replace(f.begin() + 2, f.end(), '_', '-');
    return f;
}

// Flag values are read as JSON when they parse (numbers, arrays, objects), else as strings.
json flag_value(const std::string& s) {
    json v = json::parse(s, nullptr, false);
    return v.is_discarded() ? json(s) : v;
}

int run(const RunConfig& cfg) {
    const fs::path out(cfg.output_dir);
    Staging st(out);
    RunResult res = commands.at(cfg.command)(cfg, st);
    bool pass = true;
    json checks = json::array();
    for (const auto& c : res.checks) {
        pass = pass && c.pass;
        checks.push_back({{"name", c.name}, {"value", c.value}, {"bound", c.bound}, {"pass", c.pass}});
    }
    st.text("checks.csv", checks_csv(res.checks));
    json artifacts = st.files();
    artifacts.push_back("manifest.json");
    json manifest = {{"command", cfg.command},
                     {"params", cfg.params},
                     {"resolved_params", res.resolved},
                     {"tier",
                      {{"name", cfg.tier.name},
                       {"n_samples", cfg.tier.n_samples},
                       {"h", cfg.tier.h},
                       {"dt", cfg.tier.dt},
                       {"panels", cfg.tier.panels}}},
                     {"seed", cfg.seed},
                     {"measured", res.measured},
                     {"checks", checks},
                     {"artifacts", artifacts},
                     {"version", version},
                     {"pass", pass}};
    st.text("manifest.json", manifest.dump(2) + "\n");
    st.commit(out);
    std::cout << cfg.command << ": " << (pass ? "PASS" : "FAIL") << " (" << res.checks.size() << " checks) -> "
              << (out / "manifest.json").string() << "\n";
    for (const auto& c : res.checks)
        std::cout << "  " << (c.pass ? "ok     " : "FAILED ") << c.name << ": " << c.value << " (bound " << c.bound
                  << ")\n";
    return pass ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"reachkit: analytic heat semigroup, mild solutions, null control and reachability certificates"};
    std::string config_path;
    app.add_option("--config", config_path, "JSON run configuration {command, params, output_dir, seed, tier}");
    app.require_subcommand(0, 1);

    struct Sub {
        CLI::App* app;
        std::map<std::string, std::string> flags;
        std::string params, output_dir, tier;
        std::uint64_t seed = 0;
    };
    const std::map<std::string, std::string> blurbs = {
        {"semigroup-eval", "evaluate the heat semigroup of a field at real and complex points"},
        {"verify-estimates", "measure the d = 1 semigroup constants against their closed-form bounds"},
        {"solve", "mild solution with source, potentials and optional semilinear term"},
        {"nullcontrol", "penalized HUM null control on a box, glued to a control outside B(2)"},
        {"reach", "boundary control on (-1, 1) reaching a holomorphic target"},
        {"smoothing-check", "solve from a rough boundary trace and certify analyticity of the final state"}};
    std::map<std::string, Sub> subs;
    for (const auto& [name, keys] : command_flags) {
        Sub& s = subs[name];
        s.app = app.add_subcommand(name, blurbs.at(name));
        s.app->add_option("--params", s.params, "command parameters as a JSON object");
        s.app->add_option("--output-dir", s.output_dir, "output directory");
        s.app->add_option("--seed", s.seed, "seed for randomized sample sets");
        s.app->add_option("--tier", s.tier, "resolution tier: coarse, standard, fine");
        for (const auto& k : keys) s.app->add_option(flag_for(k), s.flags[k], "params." + k);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    RunConfig cfg;
    try {
        const CLI::App* chosen = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front();
        if (!config_path.empty()) {
            if (chosen) throw ConfigError("--config cannot be combined with a command");
            std::ifstream f(config_path);
            if (!f) throw ConfigError("cannot read " + config_path);
            json j = json::parse(f);
            cfg = config_from_json(j);
        } else if (chosen) {
            Sub& s = subs.at(chosen->get_name());
            cfg.command = chosen->get_name();
            if (!s.params.empty()) {
                cfg.params = json::parse(s.params);
                if (!cfg.params.is_object()) throw ConfigError("--params must be a JSON object");
            }
            for (const auto& [k, v] : s.flags)
                if (chosen->count(flag_for(k))) cfg.params[k] = flag_value(v);
            if (chosen->count("--output-dir")) cfg.output_dir = s.output_dir;
            if (chosen->count("--seed")) cfg.seed = s.seed;
            if (chosen->count("--tier")) cfg.tier = tier_named(s.tier);
        } else {
            std::cout << app.help();
            return 2;
        }
    } catch (const json::exception& e) {
        std::cerr << "reachkit: invalid configuration: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "reachkit: invalid configuration: " << e.what() << "\n";
        return 2;
    }

    try {
        return run(cfg);
    } catch (const ConfigError& e) {
        std::cerr << "reachkit: invalid configuration: " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "reachkit: invalid configuration: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "reachkit: stage error [" << e.stage() << "]: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "reachkit: stage error [internal]: " << e.what() << "\n";
        return 1;
    }
}
