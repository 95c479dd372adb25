#ifndef SSINV_CONFIG_HPP
#define SSINV_CONFIG_HPP

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "ssinv/cost_model.hpp"
#include "ssinv/error.hpp"
#include "ssinv/levy_model.hpp"
#include "ssinv/mc_simulator.hpp"
#include "ssinv/policy_solver.hpp"

namespace ssinv {

struct x_grid {
    double x_min = -3.0;
    double x_max = 3.0;
    double x_step = 0.01;

    std::vector<double> points() const {
        std::vector<double> xs;
        const auto n = static_cast<long>(std::floor((x_max - x_min) / x_step + 1e-9));
        for (long i = 0; i <= n; ++i) xs.push_back(x_min + static_cast<double>(i) * x_step);
        return xs;
    }
};

enum class cost_shape { quadratic, piecewise_linear };

struct run_config {
    std::optional<levy_model> model;
    double C = 0.0;
    double K = 0.0;
    double q = 0.0;
    cost_shape shape = cost_shape::quadratic;
    double holding = 1.0;
    double backlog = 1.0;

    int n_terms = 128;
    solver_options solver;

    sim_config sim;
    std::vector<double> sim_x{0.0};
    std::vector<std::string> sim_quantities{"value", "barrier", "ruin", "overshoot"};

    std::string out_dir = ".";
    x_grid grid;
    std::vector<double> value_x{0.0};

    std::string sweep_param = "C";
    std::vector<double> sweep_values;

    int check_laplace_points = 10;
    int check_mc_paths = 0;

    cost_spec spec_with(double C_, double K_) const {
        if (shape == cost_shape::quadratic) return cost_spec(C_, K_, q);
        return cost_spec(C_, K_, q, piecewise_linear_cost(holding, backlog, C_, q));
    }
    cost_spec spec() const { return spec_with(C, K); }
};

namespace detail {

inline double parse_double(std::string_view key, std::string_view text) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    double v = 0.0;
    const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || p != text.data() + text.size() || text.empty()) {
        throw error(errc::config, "not a number for '" + std::string(key) + "': '" + std::string(text) + "'");
    }
    if (!std::isfinite(v)) throw error(errc::config, "non-finite value for '" + std::string(key) + "'");
    return v;
}

inline long parse_integer(std::string_view key, std::string_view text) {
    const double v = parse_double(key, text);
    if (v != std::floor(v) || std::abs(v) > 9e15) {
        throw error(errc::config, "expected an integer for '" + std::string(key) + "'");
    }
    return static_cast<long>(v);
}

inline bool parse_bool(std::string_view key, const std::string& text) {
    if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
    if (text == "false" || text == "0" || text == "no" || text == "off") return false;
    throw error(errc::config, "expected a boolean for '" + std::string(key) + "'");
}

inline std::vector<double> parse_list(std::string_view key, const std::string& text) {
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto end = std::min(text.find(',', start), text.size());
        out.push_back(parse_double(key, std::string_view(text).substr(start, end - start)));
        start = end + 1;
    }
    return out;
}

inline std::vector<std::string> parse_words(const std::string& text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto end = std::min(text.find(',', start), text.size());
        std::string w = text.substr(start, end - start);
        w.erase(0, w.find_first_not_of(" \t"));
        w.erase(w.find_last_not_of(" \t") + 1);
        if (!w.empty()) out.push_back(w);
        start = end + 1;
    }
    return out;
}

/// One INI section with strict key checking.
class section_reader {
public:
    section_reader(const boost::property_tree::ptree* tree, std::string name, std::set<std::string> allowed)
        : tree_(tree), name_(std::move(name)) {
        if (!tree_) return;
        for (const auto& [key, node] : *tree_) {
            if (!node.empty()) throw error(errc::config, "nested key in [" + name_ + "]");
            if (!allowed.count(key)) throw error(errc::config, "unknown key '" + key + "' in [" + name_ + "]");
        }
    }

    bool present() const noexcept { return tree_ != nullptr; }

    std::optional<std::string> raw(const std::string& key) const {
        if (!tree_) return std::nullopt;
        auto v = tree_->get_optional<std::string>(key);
        if (!v) return std::nullopt;
        return *v;
    }
    std::string label(const std::string& key) const { return "[" + name_ + "] " + key; }

    double number(const std::string& key, std::optional<double> fallback = std::nullopt) const {
        if (auto r = raw(key)) return parse_double(label(key), *r);
        if (fallback) return *fallback;
        throw error(errc::config, "missing key " + label(key));
    }
    long integer(const std::string& key, long fallback) const {
        if (auto r = raw(key)) return parse_integer(label(key), *r);
        return fallback;
    }
    bool boolean(const std::string& key, bool fallback) const {
        if (auto r = raw(key)) return parse_bool(label(key), *r);
        return fallback;
    }
    std::vector<double> list(const std::string& key, std::vector<double> fallback) const {
        if (auto r = raw(key)) return parse_list(label(key), *r);
        return fallback;
    }
    std::string word(const std::string& key, std::string fallback) const {
        if (auto r = raw(key)) return *r;
        return fallback;
    }

private:
    const boost::property_tree::ptree* tree_;
    std::string name_;
};

inline void check_grid(const x_grid& g) {
    if (!(g.x_step > 0.0) || !(g.x_max >= g.x_min)) {
        throw error(errc::config, "x grid requires x_step > 0 and x_max >= x_min");
    }
    if ((g.x_max - g.x_min) / g.x_step > 1e7) throw error(errc::config, "x grid has too many points");
}

}  // namespace detail

/// Parse and validate an INI run configuration. Every problem is reported as errc::config,
/// errc::invalid_model or errc::invalid_spec before any computation starts.
inline run_config parse_run_config(std::istream& in) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw error(errc::config, std::string("malformed INI: ") + e.message() + " at line " +
                                      std::to_string(e.line()));
    }
    const std::set<std::string> sections{"model", "cost", "solver", "sim", "output", "sweep", "check"};
    for (const auto& [name, node] : tree) {
        if (!sections.count(name)) throw error(errc::config, "unknown section [" + name + "]");
        if (node.empty() && !node.data().empty()) throw error(errc::config, "key '" + name + "' outside a section");
    }
    auto sec = [&](const char* name) -> const pt::ptree* {
        auto it = tree.find(name);
        return it == tree.not_found() ? nullptr : &it->second;
    };

    run_config cfg;

    detail::section_reader model(sec("model"), "model",
                                 {"type", "delta_hat", "mu_hat", "sigma", "alpha", "beta", "varpi", "lambda"});
    if (!model.present()) throw error(errc::config, "missing section [model]");
    const auto type = model.word("type", "");
    if (type == "beta") {
        if (model.raw("mu_hat")) throw error(errc::config, "mu_hat is not a beta-family parameter");
        beta_family p;
        p.delta_hat = model.number("delta_hat");
        p.sigma = model.number("sigma");
        p.alpha = model.number("alpha");
        p.beta = model.number("beta");
        p.varpi = model.number("varpi");
        p.lambda = model.number("lambda");
        cfg.model.emplace(p);
    } else if (type == "brownian") {
        for (const char* k : {"delta_hat", "alpha", "beta", "varpi", "lambda"}) {
            if (model.raw(k)) throw error(errc::config, std::string(k) + " is not a Brownian parameter");
        }
        brownian_drift p;
        p.mu_hat = model.number("mu_hat");
        p.sigma = model.number("sigma");
        cfg.model.emplace(p);
    } else {
        throw error(errc::config, "[model] type must be 'beta' or 'brownian'");
    }

    detail::section_reader cost(sec("cost"), "cost", {"C", "K", "q", "f_type", "holding", "backlog"});
    if (!cost.present()) throw error(errc::config, "missing section [cost]");
    cfg.C = cost.number("C");
    cfg.K = cost.number("K");
    cfg.q = cost.number("q");
    const auto ftype = cost.word("f_type", "quadratic");
    if (ftype == "quadratic") {
        if (cost.raw("holding") || cost.raw("backlog")) {
            throw error(errc::config, "holding/backlog only apply to f_type = piecewise_linear");
        }
        cfg.shape = cost_shape::quadratic;
    } else if (ftype == "piecewise_linear") {
        cfg.shape = cost_shape::piecewise_linear;
        cfg.holding = cost.number("holding");
        cfg.backlog = cost.number("backlog");
        if (!(cfg.holding > 0.0) || !(cfg.backlog > cfg.C * cfg.q)) {
            throw error(errc::invalid_spec, "piecewise_linear cost requires holding > 0 and backlog > C q");
        }
    } else {
        throw error(errc::config, "[cost] f_type must be 'quadratic' or 'piecewise_linear'");
    }
    (void)cfg.spec();  // validates C, K, q and the cost shape

    detail::section_reader solver(sec("solver"), "solver", {"tol", "n_terms", "scan_points", "max_iter"});
    cfg.solver.tol = solver.number("tol", 1e-10);
    cfg.n_terms = static_cast<int>(solver.integer("n_terms", 128));
    cfg.solver.scan_points = static_cast<int>(solver.integer("scan_points", 64));
    cfg.solver.max_iter = static_cast<int>(solver.integer("max_iter", 200));
    if (!(cfg.solver.tol > 0.0) || cfg.n_terms < 1 || cfg.n_terms > 5000 || cfg.solver.scan_points < 4 ||
        cfg.solver.max_iter < 1) {
        throw error(errc::config, "[solver] requires tol > 0, 1 <= n_terms <= 5000, scan_points >= 4, max_iter >= 1");
    }

    detail::section_reader sim(sec("sim"), "sim",
                               {"eps", "dt", "horizon", "bias_fraction", "n_paths", "pilot_paths", "seed",
                                "antithetic", "workers", "block_paths", "x_values", "quantities"});
    cfg.sim.jump_cutoff_eps = sim.number("eps", 1e-3);
    cfg.sim.time_step = sim.number("dt", 1e-3);
    cfg.sim.horizon = sim.number("horizon", 0.0);
    cfg.sim.bias_fraction = sim.number("bias_fraction", 0.1);
    cfg.sim.n_paths = static_cast<int>(sim.integer("n_paths", 10000));
    cfg.sim.pilot_paths = static_cast<int>(sim.integer("pilot_paths", 256));
    const long seed = sim.integer("seed", 1);
    if (seed < 0) throw error(errc::config, "[sim] seed must be nonnegative");
    cfg.sim.seed = static_cast<std::uint64_t>(seed);
    cfg.sim.antithetic = sim.boolean("antithetic", true);
    cfg.sim.workers = static_cast<int>(sim.integer("workers", 0));
    cfg.sim.block_paths = static_cast<int>(sim.integer("block_paths", 64));
    cfg.sim_x = sim.list("x_values", {0.0});
    if (auto r = sim.raw("quantities")) cfg.sim_quantities = detail::parse_words(*r);
    for (const auto& w : cfg.sim_quantities) {
        if (w != "value" && w != "barrier" && w != "ruin" && w != "overshoot") {
            throw error(errc::config, "[sim] quantities must be drawn from value, barrier, ruin, overshoot");
        }
    }
    try {
        validate_sim_config(cfg.sim);
    } catch (const error& e) {
        throw error(errc::config, e.what());
    }

    detail::section_reader output(sec("output"), "output", {"dir", "x_min", "x_max", "x_step", "x_values"});
    cfg.out_dir = output.word("dir", ".");
    cfg.grid.x_min = output.number("x_min", -3.0);
    cfg.grid.x_max = output.number("x_max", 3.0);
    cfg.grid.x_step = output.number("x_step", 0.01);
    detail::check_grid(cfg.grid);
    cfg.value_x = output.list("x_values", {0.0});

    detail::section_reader sweep(sec("sweep"), "sweep", {"param", "values"});
    cfg.sweep_param = sweep.word("param", "C");
    if (cfg.sweep_param != "C" && cfg.sweep_param != "K") throw error(errc::config, "[sweep] param must be C or K");
    cfg.sweep_values = sweep.list("values", {});
    for (double v : cfg.sweep_values) {
        if (!(v >= 0.0)) throw error(errc::config, "[sweep] values must be nonnegative");
    }

    detail::section_reader check(sec("check"), "check", {"laplace_points", "mc_paths"});
    cfg.check_laplace_points = static_cast<int>(check.integer("laplace_points", 10));
    cfg.check_mc_paths = static_cast<int>(check.integer("mc_paths", 0));
    if (cfg.check_laplace_points < 1 || cfg.check_mc_paths < 0) {
        throw error(errc::config, "[check] requires laplace_points >= 1 and mc_paths >= 0");
    }
    return cfg;
}

inline run_config load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw error(errc::config, "cannot read config file '" + path + "'");
    return parse_run_config(in);
}

/// Shortest round-trip decimal text, independent of the global locale.
inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0.0 ? "inf" : "-inf";
    char buf[64];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

/// Minimal CSV emitter: fixed header, one flushed line per row.
class csv_writer {
public:
    csv_writer(std::ostream& out, const std::vector<std::string>& header) : out_(out), width_(header.size()) {
        write_cells(header);
    }

    void row(const std::vector<std::string>& cells) {
        if (cells.size() != width_) throw error(errc::domain, "CSV row width differs from header");
        write_cells(cells);
    }

private:
    void write_cells(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
        out_.flush();
    }

    std::ostream& out_;
    std::size_t width_;
};

}  // namespace ssinv

#endif  // SSINV_CONFIG_HPP
