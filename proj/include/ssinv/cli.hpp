#ifndef SSINV_CLI_HPP
#define SSINV_CLI_HPP

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ssinv/config.hpp"
#include "ssinv/fluctuation.hpp"
#include "ssinv/mc_simulator.hpp"
#include "ssinv/policy_solver.hpp"
#include "ssinv/scale_kernel.hpp"

namespace ssinv::cli {

enum exit_code : int { ok = 0, check_failed = 1, config_error = 2, numerical_failure = 3 };

/// Command-line overrides applied on top of the config file.
struct overrides {
    std::string config_path;
    std::optional<std::string> out_dir;
    std::optional<double> x_min;
    std::optional<double> x_max;
    std::optional<double> x_step;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> sweep_param;
    std::optional<std::vector<double>> sweep_values;
};

namespace detail {

inline run_config load(const overrides& o) {
    auto cfg = load_run_config(o.config_path);
    if (o.out_dir) cfg.out_dir = *o.out_dir;
    if (o.x_min) cfg.grid.x_min = *o.x_min;
    if (o.x_max) cfg.grid.x_max = *o.x_max;
    if (o.x_step) cfg.grid.x_step = *o.x_step;
    ssinv::detail::check_grid(cfg.grid);
    if (o.seed) cfg.sim.seed = *o.seed;
    if (o.sweep_param) {
        if (*o.sweep_param != "C" && *o.sweep_param != "K") throw error(errc::config, "sweep param must be C or K");
        cfg.sweep_param = *o.sweep_param;
    }
    if (o.sweep_values) cfg.sweep_values = *o.sweep_values;
    return cfg;
}

inline std::ofstream open_output(const run_config& cfg, const std::string& name) {
    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    const auto path = std::filesystem::path(cfg.out_dir) / name;
    std::ofstream f(path);
    if (!f) throw error(errc::config, "cannot write '" + path.string() + "'");
    return f;
}

inline std::string quoted(const std::string& s) {
    std::ostringstream o;
    o << std::quoted(s);
    return o.str();
}

/// Runs `body` and maps failures onto exit codes with one machine-readable stderr line.
template <class Body>
int guarded(std::ostream& err, Body&& body) {
    try {
        return body();
    } catch (const error& e) {
        err << "error code=" << to_string(e.code()) << " message=" << quoted(e.what()) << '\n';
        return e.is_input_error() ? config_error : numerical_failure;
    } catch (const std::exception& e) {
        err << "error code=internal message=" << quoted(e.what()) << '\n';
        return numerical_failure;
    }
}

inline const char* bool_text(bool b) { return b ? "true" : "false"; }

inline std::vector<std::string> solution_row(double param, const policy_solution& sol) {
    return {format_number(param),          format_number(sol.s_star),     format_number(sol.S_star),
            format_number(sol.a0),         format_number(sol.residual_g), format_number(sol.residual_h)};
}

inline const std::vector<std::string> solution_header{"param",  "s_star",     "S_star",
                                                      "a0",     "residual_g", "residual_h"};

}  // namespace detail

inline policy_solution solve_config(const run_config& cfg) {
    const auto k = build_kernel(*cfg.model, cfg.q, cfg.n_terms);
    return solve(k, cfg.spec(), cfg.solver);
}

/// Solve for the optimal policy; report on `out`, write solution.csv.
inline int cmd_solve(const overrides& o, std::ostream& out, std::ostream& err) {
    return detail::guarded(err, [&] {
        const auto cfg = detail::load(o);
        const auto sol = solve_config(cfg);
        const auto& f = sol.fit;
        out << "policy=" << (sol.kind == policy_kind::ss ? "ss" : "barrier") << '\n';
        if (sol.kind == policy_kind::ss) {
            out << "s_star=" << format_number(sol.s_star) << '\n';
            out << "S_star=" << format_number(sol.S_star) << '\n';
        }
        out << "a0=" << format_number(sol.a0) << '\n';
        out << "residual_g=" << format_number(sol.residual_g) << '\n';
        out << "residual_h=" << format_number(sol.residual_h) << '\n';
        out << "variation=" << (f.variation == variation_kind::bounded ? "bounded" : "unbounded") << '\n';
        out << "fit.value_gap=" << format_number(f.left_value - f.right_value) << '\n';
        out << "fit.slope_gap=" << format_number(f.left_slope - f.right_slope) << '\n';
        out << "fit.right_second=" << format_number(f.right_second) << '\n';
        if (sol.kind == policy_kind::ss) out << "fit.slope_at_S=" << format_number(f.slope_at_S) << '\n';
        out << "fit.continuous=" << detail::bool_text(f.continuous_fit) << '\n';
        out << "fit.smooth=" << detail::bool_text(f.smooth_fit) << '\n';
        out << "fit.passed=" << detail::bool_text(f.passed) << '\n';
        auto file = detail::open_output(cfg, "solution.csv");
        csv_writer csv(file, detail::solution_header);
        csv.row(detail::solution_row(cfg.K, sol));
        return static_cast<int>(ok);
    });
}

/// Region label of x under the solved policy.
inline const char* region_of(const policy_solution& sol, double x) {
    if (x < sol.threshold()) return "below_s";
    if (sol.kind == policy_kind::ss && x <= sol.S_star) return "between";
    return "above_S";
}

inline int cmd_value(const overrides& o, std::ostream& out, std::ostream& err) {
    return detail::guarded(err, [&] {
        const auto cfg = detail::load(o);
        const auto sol = solve_config(cfg);
        auto file = detail::open_output(cfg, "value.csv");
        csv_writer csv(file, {"x", "v", "v_tilde", "region"});
        const auto xs = cfg.grid.points();
        for (double x : xs) {
            const double vt = value_function_tilde(sol, x);
            csv.row({format_number(x), format_number(vt - cfg.C * x), format_number(vt), region_of(sol, x)});
        }
        out << "rows=" << xs.size() << '\n';
        return static_cast<int>(ok);
    });
}

inline int cmd_sweep(const overrides& o, std::ostream& out, std::ostream& err) {
    return detail::guarded(err, [&] {
        const auto cfg = detail::load(o);
        if (cfg.sweep_values.empty()) throw error(errc::config, "sweep needs at least one value");
        const auto k = build_kernel(*cfg.model, cfg.q, cfg.n_terms);
        std::vector<std::string> header{"param", "s_star", "S_star", "a0"};
        for (double x : cfg.value_x) header.push_back("v_at_" + format_number(x));
        // rows are flushed one by one, so a failure keeps the finished ones
        auto file = detail::open_output(cfg, "sweep.csv");
        csv_writer csv(file, header);
        for (double p : cfg.sweep_values) {
            const bool is_c = cfg.sweep_param == "C";
            const auto spec = cfg.spec_with(is_c ? p : cfg.C, is_c ? cfg.K : p);
            const auto sol = solve(k, spec, cfg.solver);
            std::vector<std::string> row{format_number(p), format_number(sol.s_star), format_number(sol.S_star),
                                         format_number(sol.a0)};
            for (double x : cfg.value_x) row.push_back(format_number(value_function(sol, x)));
            csv.row(row);
            out << cfg.sweep_param << '=' << format_number(p) << " s_star=" << format_number(sol.s_star)
                << " S_star=" << format_number(sol.S_star) << '\n';
        }
        return static_cast<int>(ok);
    });
}

inline int cmd_simulate(const overrides& o, std::ostream& out, std::ostream& err) {
    return detail::guarded(err, [&] {
        const auto cfg = detail::load(o);
        const auto k = build_kernel(*cfg.model, cfg.q, cfg.n_terms);
        const levy_simulator sim(*cfg.model, cfg.sim);
        auto file = detail::open_output(cfg, "mc.csv");
        csv_writer csv(file, {"quantity", "x", "estimate", "std_error", "analytic", "z_score", "horizon",
                              "horizon_bias_bound", "n_paths"});
        auto emit = [&](const std::string& name, double x, const cost_estimate& e, double analytic) {
            const double z = e.std_error > 0.0 ? (e.mean - analytic) / e.std_error : (e.mean == analytic ? 0.0 : INFINITY);
            csv.row({name, format_number(x), format_number(e.mean), format_number(e.std_error),
                     format_number(analytic), format_number(z), format_number(e.horizon),
                     format_number(e.horizon_bias_bound), std::to_string(e.n_paths)});
            out << name << " x=" << format_number(x) << " estimate=" << format_number(e.mean)
                << " se=" << format_number(e.std_error) << " analytic=" << format_number(analytic)
                << " z=" << format_number(z) << '\n';
        };
        std::optional<policy_solution> ss;
        std::optional<policy_solution> barrier;
        for (const auto& what : cfg.sim_quantities) {
            for (double x : cfg.sim_x) {
                if (what == "value") {
                    if (!ss) ss = solve(k, cfg.spec(), cfg.solver);
                    if (ss->kind == policy_kind::ss) {
                        emit("value_ss", x, estimate_ss_cost(sim, ss->spec, ss->s_star, ss->S_star, x),
                             value_function(*ss, x));
                    } else {
                        emit("value_barrier", x, estimate_barrier_cost(sim, ss->spec, ss->a0, x),
                             value_function(*ss, x));
                    }
                } else if (what == "barrier") {
                    if (!barrier) barrier = solve_barrier(k, cfg.spec_with(cfg.C, 0.0));
                    emit("value_barrier", x, estimate_barrier_cost(sim, barrier->spec, barrier->a0, x),
                         value_function(*barrier, x));
                } else if (what == "ruin") {
                    emit("ruin_lt", x, estimate_exit_functional(sim, cfg.q, exit_functional::ruin_lt, x, 0.0),
                         ruin_lt(k, x));
                } else {
                    emit("overshoot", x,
                         estimate_exit_functional(sim, cfg.q, exit_functional::overshoot, x, 0.0),
                         overshoot_expectation(k, x, 0.0));
                }
            }
        }
        return static_cast<int>(ok);
    });
}

/// One row of the check table.
struct check_result {
    std::string name;
    double value = 0.0;
    double tolerance = 0.0;
    bool passed = false;
    std::string note;
};

/// Consistency checks for the configured model and costs.
inline std::vector<check_result> run_checks(const run_config& cfg) {
    std::vector<check_result> rows;
    auto attempt = [&](const std::string& name, double tol, const std::function<double()>& fn) {
        check_result r{name, 0.0, tol, false, ""};
        try {
            r.value = fn();
            r.passed = std::isfinite(r.value) && r.value < tol;
        } catch (const std::exception& e) {
            r.value = NAN;
            r.note = e.what();
        }
        rows.push_back(r);
    };

    std::optional<scale_kernel> kernel;
    attempt("kernel_build", 0.5, [&] {
        kernel = build_kernel(*cfg.model, cfg.q, cfg.n_terms);
        return 0.0;
    });
    if (!kernel) return rows;
    const auto& k = *kernel;

    attempt("laplace_identity", 1e-4, [&] {
        double worst = 0.0;
        for (int i = 1; i <= cfg.check_laplace_points; ++i) {
            const double s = k.phi_q + 5.0 * i / cfg.check_laplace_points;
            worst = std::max(worst, std::abs(laplace_check(k, s) - 1.0));
        }
        return worst;
    });
    attempt("w_zero", 1e-3, [&] {
        // relative for a positive W(0), absolute when W(0) = 0
        const double theory = k.w_zero_theory;
        return std::abs(k.w_zero_series - theory) / std::max(1.0, std::abs(theory));
    });
    if (cfg.model->as_beta()) {
        attempt("root_residuals", 1e-10, [&] {
            const auto rs = make_root_sequence(*cfg.model, cfg.q, std::min(cfg.n_terms, 50));
            double worst = 0.0;
            for (double xi : rs.xis) {
                worst = std::max(worst, std::abs(laplace_exponent_continued(*cfg.model, -xi) - cfg.q));
            }
            return worst;
        });
    }

    const auto spec = cfg.spec();
    std::optional<policy_solution> sol;
    attempt("solver_converged", 0.5, [&] {
        sol = solve(k, spec, cfg.solver);
        return 0.0;
    });
    if (sol) {
        if (sol->kind == policy_kind::ss) {
            attempt("residual_G", 1e-8 * spec.K, [&] { return std::abs(sol->residual_g); });
            attempt("residual_H", 1e-8, [&] { return std::abs(sol->residual_h); });
            attempt("ordering_s_a0_S", 0.5, [&] {
                return sol->s_star < sol->a0 && sol->a0 < sol->S_star ? 0.0 : 1.0;
            });
        } else {
            attempt("residual_Psi_a0", 1e-8, [&] { return std::abs(sol->residual_h); });
        }
        attempt("fit_conditions", 0.5, [&] { return sol->fit.passed ? 0.0 : 1.0; });

        const policy_functions pf(k, spec);
        const double a0 = sol->a0;
        attempt("H_equals_dG_dx", 1e-6, [&] {
            double worst = 0.0;
            for (double ds : {-0.5, -1.5}) {
                for (double dx : {0.3, 1.0, 2.5}) {
                    const double s = a0 + ds;
                    const double x = a0 + dx;
                    const double h = 1e-3;
                    const double fd = (-pf.g_minus_k(s, x + 2 * h) + 8 * pf.g_minus_k(s, x + h) -
                                       8 * pf.g_minus_k(s, x - h) + pf.g_minus_k(s, x - 2 * h)) / (12 * h);
                    worst = std::max(worst, std::abs(fd - pf.h_value(s, x)) / (1.0 + std::abs(fd)));
                }
            }
            return worst;
        });
    }
    attempt("resolvent_unit_cost", 1e-8, [&] {
        const auto one = integrand::constant(1.0);
        double worst = 0.0;
        for (double s : {-1.0, 0.0, 0.5}) {
            for (double dx : {0.1, 1.0, 3.0}) {
                const double lhs = resolvent_cost(k, s + dx, s, one);
                const double rhs = (1.0 - ruin_lt(k, dx)) / cfg.q;
                worst = std::max(worst, std::abs(lhs - rhs) / (1.0 + std::abs(rhs)));
            }
        }
        return worst;
    });

    if (cfg.check_mc_paths > 0) {
        auto sc = cfg.sim;
        sc.n_paths = cfg.check_mc_paths;
        const levy_simulator sim(*cfg.model, sc);
        attempt("mc_ruin_lt_z", 3.0, [&] {
            const auto e = estimate_exit_functional(sim, cfg.q, exit_functional::ruin_lt, 1.0, 0.0);
            return std::abs(e.mean - ruin_lt(k, 1.0)) / e.std_error;
        });
        attempt("mc_overshoot_z", 3.0, [&] {
            const auto e = estimate_exit_functional(sim, cfg.q, exit_functional::overshoot, 1.0, 0.0);
            return std::abs(e.mean - overshoot_expectation(k, 1.0, 0.0)) / e.std_error;
        });
    }
    return rows;
}

inline int cmd_check(const overrides& o, std::ostream& out, std::ostream& err) {
    return detail::guarded(err, [&] {
        const auto cfg = detail::load(o);
        const auto rows = run_checks(cfg);
        bool all = true;
        out << std::left << std::setw(22) << "check" << std::setw(14) << "value" << std::setw(12) << "tolerance"
            << "result\n";
        for (const auto& r : rows) {
            all = all && r.passed;
            std::ostringstream v;
            v << std::setprecision(4) << r.value;
            std::ostringstream t;
            t << std::setprecision(3) << r.tolerance;
            out << std::left << std::setw(22) << r.name << std::setw(14) << v.str() << std::setw(12) << t.str()
                << (r.passed ? "PASS" : "FAIL");
            if (!r.note.empty()) out << "  " << r.note;
            out << '\n';
        }
        return static_cast<int>(all ? ok : check_failed);
    });
}

}  // namespace ssinv::cli

#endif  // SSINV_CLI_HPP
