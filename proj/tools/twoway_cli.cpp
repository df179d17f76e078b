// twoway: command-line front end for the two-way protocol rate machinery.
//
// Subcommands: rate, threshold, figures, simulate.  All file output is
// deterministic (no clocks, no hostnames): rerunning a command reproduces
// the bytes.  Every output starts with a provenance header naming the tool
// version and the fully resolved configuration.
//
// Exit codes: 0 success, 2 usage or parameter validation, 3 numeric failure.

#include "cvqkd/mc_oracle.hpp"
#include "cvqkd/thresholds.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr const char* kVersion = "0.1.0";

using cvqkd::AttackParams;
using cvqkd::Circuit;
using cvqkd::Detection;
using cvqkd::ProtocolSpec;
using cvqkd::Reconciliation;

using KvList = std::vector<std::pair<std::string, std::string>>;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

Detection parse_det(const std::string& s) {
    if (s == "het" || s == "heterodyne") return Detection::heterodyne;
    if (s == "hom" || s == "homodyne") return Detection::homodyne;
    throw CLI::ValidationError("--det", "expected het|hom, got '" + s + "'");
}

Reconciliation parse_rec(const std::string& s) {
    if (s == "dr" || s == "direct") return Reconciliation::direct;
    if (s == "rr" || s == "reverse") return Reconciliation::reverse;
    throw CLI::ValidationError("--rec", "expected dr|rr, got '" + s + "'");
}

Circuit parse_circuit(const std::string& s) {
    if (s == "on") return Circuit::on;
    if (s == "off") return Circuit::off;
    if (s == "oneway" || s == "one-way") return Circuit::one_way;
    throw CLI::ValidationError("--circuit", "expected on|off|oneway, got '" + s + "'");
}

cvqkd::CorrelationRule parse_rule(const std::string& s) {
    if (s == "collective") return cvqkd::CorrelationRule::collective;
    if (s == "max-separable") return cvqkd::CorrelationRule::max_separable;
    if (s == "anti-separable") return cvqkd::CorrelationRule::anti_separable;
    if (s == "max-entangled") return cvqkd::CorrelationRule::max_entangled;
    throw CLI::ValidationError(
        "--rule", "expected collective|max-separable|anti-separable|max-entangled, got '" + s + "'");
}

const char* circuit_name(Circuit c) {
    switch (c) {
        case Circuit::on: return "on";
        case Circuit::off: return "off";
        case Circuit::one_way: return "oneway";
    }
    return "?";
}

// Table sink with a provenance header; csv or json-lines.
class TableWriter {
public:
    TableWriter(std::ostream& os, std::string format, std::vector<std::string> columns)
        : os_(os), jsonl_(format == "jsonl"), columns_(std::move(columns)) {
        if (format != "csv" && format != "jsonl")
            throw CLI::ValidationError("--format", "expected csv|jsonl, got '" + format + "'");
    }

    void provenance(const std::string& command, const KvList& config) {
        if (jsonl_) {
            nlohmann::json j;
            j["provenance"]["tool"] = "twoway";
            j["provenance"]["version"] = kVersion;
            j["provenance"]["command"] = command;
            for (const auto& [k, v] : config) j["provenance"]["config"][k] = v;
            os_ << j.dump() << "\n";
        } else {
            os_ << "# twoway " << kVersion << "\n# command: " << command << "\n";
            os_ << "# config:";
            for (const auto& [k, v] : config) os_ << " " << k << "=" << v;
            os_ << "\n";
            for (size_t i = 0; i < columns_.size(); ++i)
                os_ << (i ? "," : "") << columns_[i];
            os_ << "\n";
        }
    }

    // values align with the constructor's columns; numeric fields go through
    // fmt() upstream so csv and jsonl carry identical digits
    void row(const std::vector<std::string>& values, const std::vector<bool>& quoted) {
        if (jsonl_) {
            nlohmann::json j;
            for (size_t i = 0; i < columns_.size(); ++i) {
                if (quoted[i])
                    j[columns_[i]] = values[i];
                else
                    j[columns_[i]] = nlohmann::json::parse(values[i]);
            }
            os_ << j.dump() << "\n";
        } else {
            for (size_t i = 0; i < values.size(); ++i) os_ << (i ? "," : "") << values[i];
            os_ << "\n";
        }
    }

private:
    std::ostream& os_;
    bool jsonl_;
    std::vector<std::string> columns_;
};

struct CommonOpts {
    std::string output_dir = ".";
    std::string format = "csv";
};

// The environment wins over flags and config files for the output directory,
// so batch jobs can redirect a pinned configuration without editing it.
void apply_env(CommonOpts& o) {
    if (const char* env = std::getenv("TWOWAY_OUTPUT_DIR"); env && *env) o.output_dir = env;
}

std::ofstream open_output(const CommonOpts& o, const std::string& name) {
    std::filesystem::create_directories(o.output_dir);
    const auto path = std::filesystem::path(o.output_dir) / name;
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open output file " + path.string());
    return f;
}

struct ChannelOpts {
    double T = 0.3;
    double omega = -1.0;  // resolved against --noise below
    double noise = -1.0;
    double g = 0.0;
    double gp = 0.0;

    AttackParams resolve() const {
        double w = omega;
        if (noise >= 0.0 && omega >= 0.0)
            throw CLI::ValidationError("--omega", "give either --omega or --noise, not both");
        if (noise >= 0.0)
            w = cvqkd::omega_from_excess(T, noise);
        else if (omega < 0.0)
            w = 1.0;
        return {T, w, g, gp};
    }
};

void add_channel_opts(CLI::App* cmd, ChannelOpts& c) {
    cmd->add_option("--T", c.T, "channel transmissivity per pass");
    cmd->add_option("--omega", c.omega, "Eve ancilla variance (>= 1)");
    cmd->add_option("--noise", c.noise, "round-trip excess noise N (alternative to --omega)");
    cmd->add_option("--g", c.g, "Eve q-quadrature correlation");
    cmd->add_option("--gp", c.gp, "Eve p-quadrature correlation");
}

KvList channel_kv(const AttackParams& a) {
    return {{"T", fmt(a.T)}, {"omega", fmt(a.omega)}, {"g", fmt(a.g)}, {"gp", fmt(a.gp)}};
}

// ---------------------------------------------------------------- rate ----

struct RateOpts {
    ChannelOpts chan;
    std::string det = "het", rec = "rr", circuit = "off";
    bool auto_circuit = false;
};

void run_rate(const RateOpts& o) {
    const AttackParams a = o.chan.resolve();
    const Detection det = parse_det(o.det);
    const Reconciliation rec = parse_rec(o.rec);

    cvqkd::RateBreakdown rb;
    if (o.auto_circuit) {
        const auto post = cvqkd::postselect(det, rec, a);
        rb = post.rate;
        std::cout << "circuit: " << circuit_name(post.choice) << " (post-selected; attack class: ";
        switch (post.attack_class) {
            case cvqkd::AttackClass::collective: std::cout << "collective"; break;
            case cvqkd::AttackClass::separable_correlated: std::cout << "separable-correlated"; break;
            case cvqkd::AttackClass::entangled: std::cout << "entangled"; break;
        }
        std::cout << ")\n";
    } else {
        rb = cvqkd::key_rate({det, rec, parse_circuit(o.circuit)}, a);
        std::cout << "circuit: " << o.circuit << "\n";
    }

    std::cout << "T: " << fmt(a.T) << "  omega: " << fmt(a.omega) << "  g: " << fmt(a.g)
              << "  gp: " << fmt(a.gp) << "  N: " << fmt(cvqkd::excess_noise(a.T, a.omega))
              << "\n";
    std::cout << "I   = " << fmt(rb.mutual_information.mu_coeff) << " * log2(mu) + "
              << fmt(rb.mutual_information.constant) << "\n";
    std::cout << "chi = " << fmt(rb.holevo_bound.mu_coeff) << " * log2(mu) + "
              << fmt(rb.holevo_bound.constant) << "\n";
    std::cout << "R   = " << fmt(rb.rate) << " bits/use (" << (rb.rate > 0.0 ? "secure" : "insecure")
              << ")\n";
    std::cout << "total spectrum:";
    for (double nu : rb.total_spectrum) std::cout << " " << fmt(nu);
    std::cout << "\nconditional spectrum:";
    for (double nu : rb.conditional_spectrum) std::cout << " " << fmt(nu);
    std::cout << "\nLambda: " << fmt(rb.scalars.Lambda)
              << "  Lambda~: " << fmt(rb.scalars.Lambda_tilde) << "  nu-: " << fmt(rb.scalars.nu_minus)
              << "  nu+: " << fmt(rb.scalars.nu_plus) << "\n";
}

// ----------------------------------------------------------- threshold ----

struct ThresholdOpts {
    CommonOpts common;
    std::string det = "het", rec = "rr", circuit = "off", rule = "collective";
    double T_min = 0.01, T_max = 0.99;
    int steps = 99;
    std::string out;  // empty = stdout
};

std::vector<double> make_grid(double lo, double hi, int steps) {
    std::vector<double> g;
    if (steps <= 0 || lo > hi || !(lo > 0.0) || !(hi < 1.0)) return g;
    if (steps == 1) return {lo};
    g.reserve(steps);
    for (int i = 0; i < steps; ++i) g.push_back(lo + (hi - lo) * i / (steps - 1));
    return g;
}

void write_threshold_curve(TableWriter& w, const cvqkd::ThresholdCurve& c) {
    for (size_t i = 0; i < c.T.size(); ++i)
        w.row({fmt(c.T[i]), fmt(c.results[i].N_star), fmt(c.results[i].omega_star),
               c.results[i].status},
              {false, false, false, true});
}

void run_threshold(const ThresholdOpts& o) {
    const auto grid = make_grid(o.T_min, o.T_max, o.steps);
    if (grid.empty())
        throw CLI::ValidationError("--T-min/--T-max/--steps", "transmissivity grid is empty");
    const ProtocolSpec spec{parse_det(o.det), parse_rec(o.rec), parse_circuit(o.circuit)};
    const auto curve = cvqkd::threshold_curve(spec, grid, parse_rule(o.rule));

    const KvList cfg = {{"det", o.det},     {"rec", o.rec},   {"circuit", o.circuit},
                        {"rule", o.rule},   {"T_min", fmt(o.T_min)}, {"T_max", fmt(o.T_max)},
                        {"steps", fmt(o.steps)}};
    std::ofstream file;
    std::ostream* os = &std::cout;
    if (!o.out.empty()) {
        file = open_output(o.common, o.out);
        os = &file;
    }
    TableWriter w(*os, o.common.format, {"T", "N_star", "omega_star", "status"});
    w.provenance("threshold", cfg);
    write_threshold_curve(w, curve);
}

// ------------------------------------------------------------- figures ----

struct FigureOpts {
    CommonOpts common;
    std::string which = "all";
    std::string rec = "rr";
    int curve_points = 99;
    int boundary_points = 256;
};

void emit_figure(const FigureOpts& o, const std::string& tag, Detection det, double T,
                 double omega) {
    const Reconciliation rec = parse_rec(o.rec);
    const auto grid = make_grid(0.01, 0.99, o.curve_points);
    const KvList cfg = {{"figure", tag},
                        {"det", det == Detection::heterodyne ? "het" : "hom"},
                        {"rec", o.rec},
                        {"T", fmt(T)},
                        {"omega", fmt(omega)},
                        {"curve_points", fmt(o.curve_points)},
                        {"boundary_points", fmt(o.boundary_points)}};
    const std::string ext = o.common.format == "jsonl" ? ".jsonl" : ".csv";

    {  // panel 1: ON vs one-way security thresholds over T
        auto f = open_output(o.common, tag + "_thresholds_on_vs_oneway" + ext);
        TableWriter w(f, o.common.format, {"curve", "T", "N_star", "omega_star", "status"});
        w.provenance("figures", cfg);
        const auto on = cvqkd::threshold_curve({det, rec, Circuit::on}, grid,
                                               cvqkd::CorrelationRule::collective);
        const auto ow = cvqkd::threshold_curve({det, rec, Circuit::one_way}, grid,
                                               cvqkd::CorrelationRule::collective);
        for (size_t i = 0; i < grid.size(); ++i)
            w.row({"two-way-on", fmt(on.T[i]), fmt(on.results[i].N_star),
                   fmt(on.results[i].omega_star), on.results[i].status},
                  {true, false, false, false, true});
        for (size_t i = 0; i < grid.size(); ++i)
            w.row({"one-way", fmt(ow.T[i]), fmt(ow.results[i].N_star),
                   fmt(ow.results[i].omega_star), ow.results[i].status},
                  {true, false, false, false, true});
    }

    {  // panel 2: OFF thresholds along the four correlation rules
        auto f = open_output(o.common, tag + "_thresholds_off_rules" + ext);
        TableWriter w(f, o.common.format, {"rule", "T", "N_star", "omega_star", "status"});
        w.provenance("figures", cfg);
        for (const auto rule :
             {cvqkd::CorrelationRule::max_entangled, cvqkd::CorrelationRule::max_separable,
              cvqkd::CorrelationRule::anti_separable, cvqkd::CorrelationRule::collective}) {
            const auto c = cvqkd::threshold_curve({det, rec, Circuit::off}, grid, rule);
            for (size_t i = 0; i < grid.size(); ++i)
                w.row({cvqkd::to_string(rule), fmt(c.T[i]), fmt(c.results[i].N_star),
                       fmt(c.results[i].omega_star), c.results[i].status},
                      {true, false, false, false, true});
        }
    }

    {  // panel 3: physicality boundary in the correlation plane
        auto f = open_output(o.common, tag + "_attack_plane" + ext);
        TableWriter w(f, o.common.format, {"label", "g", "gp"});
        w.provenance("figures", cfg);
        const auto b = cvqkd::attack_plane_boundary(omega, o.boundary_points);
        for (const auto& p : b.points) w.row({"boundary", fmt(p.g), fmt(p.gp)}, {true, false, false});
        const std::pair<const char*, cvqkd::BoundaryPoint> named[] = {
            {"max-entangled+", b.max_entangled_pos},   {"max-entangled-", b.max_entangled_neg},
            {"max-separable+", b.max_separable_pos},   {"max-separable-", b.max_separable_neg},
            {"anti-separable+", b.anti_separable_pos}, {"anti-separable-", b.anti_separable_neg},
            {"collective", b.collective}};
        for (const auto& [label, p] : named) w.row({label, fmt(p.g), fmt(p.gp)}, {true, false, false});
    }

    {  // panel 4: OFF rate and Eve's information along the entangled ray
        auto f = open_output(o.common, tag + "_off_rate_vs_correlations" + ext);
        TableWriter w(f, o.common.format, {"g", "gp", "I_E", "R_off", "R_oneway"});
        w.provenance("figures", cfg);
        const double gmax = std::sqrt(omega * omega - 1.0);
        const int n = 101;
        const double r_ow = cvqkd::key_rate({det, rec, Circuit::one_way}, {T, omega, 0, 0}).rate;
        for (int i = 0; i < n; ++i) {
            const double g = gmax * i / (n - 1);
            const AttackParams a{T, omega, g, -g};
            w.row({fmt(g), fmt(-g), fmt(cvqkd::eve_mutual_information(a)),
                   fmt(cvqkd::key_rate({det, rec, Circuit::off}, a).rate), fmt(r_ow)},
                  {false, false, false, false, false});
        }
    }
}

void run_figures(const FigureOpts& o) {
    if (o.which != "all" && o.which != "fig3" && o.which != "figS1")
        throw CLI::ValidationError("--which", "expected all|fig3|figS1, got '" + o.which + "'");
    if (o.which != "figS1") emit_figure(o, "fig3", Detection::heterodyne, 0.3, 1.097);
    if (o.which != "fig3") emit_figure(o, "figS1", Detection::homodyne, 0.2, 1.049);
    std::cout << "wrote figure tables to " << o.common.output_dir << "\n";
}

// ------------------------------------------------------------ simulate ----

struct SimulateOpts {
    CommonOpts common;
    ChannelOpts chan;
    std::string det = "het", rec = "rr", circuit = "off";
    double mu = 20.0;
    int rounds = 20000;
    std::uint64_t seed = 1;
    std::string out = "samples.csv";
};

void run_simulate(const SimulateOpts& o) {
    const AttackParams a = o.chan.resolve();
    const ProtocolSpec spec{parse_det(o.det), parse_rec(o.rec), parse_circuit(o.circuit)};
    const auto batch = cvqkd::sample_protocol_run(spec, a, o.mu, o.rounds, o.seed);

    auto f = open_output(o.common, o.out);
    f << "# twoway " << kVersion << "\n# command: simulate\n# config:";
    for (const auto& [k, v] : channel_kv(a)) f << " " << k << "=" << v;
    f << " det=" << o.det << " rec=" << o.rec << " circuit=" << o.circuit << " mu=" << fmt(o.mu)
      << " rounds=" << o.rounds << " seed=" << o.seed << "\n";
    cvqkd::export_csv(batch, f);

    if (o.rounds < 1000) {
        std::cerr << "warning: " << o.rounds
                  << " rounds is below the 1000 needed for the estimators; wrote samples only\n";
        return;
    }
    const auto mi = cvqkd::empirical_mutual_info(batch);
    const double closed = cvqkd::finite_mu_mutual_info(spec, a, o.mu);
    std::cout << "empirical mutual information: " << fmt(mi.bits_per_use) << " +- "
              << fmt(mi.std_error) << " bits/use (closed form: " << fmt(closed) << ")\n";
    if (spec.circuit == Circuit::off) {
        const auto est = cvqkd::estimate_channel(batch);
        std::cout << "channel estimate: T = " << fmt(est.T) << " +- " << fmt(est.se_T)
                  << ", omega = " << fmt(est.omega) << " +- " << fmt(est.se_omega);
        if (est.correlations_available)
            std::cout << ", g = " << fmt(est.g) << " +- " << fmt(est.se_g)
                      << ", gp = " << fmt(est.gp) << " +- " << fmt(est.se_gp);
        else
            std::cout << ", correlations unavailable (1 - T too small)";
        std::cout << "\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-way Gaussian protocol: rates, thresholds, figure tables, sampling"};
    app.set_version_flag("--version", std::string("twoway ") + kVersion);
    app.set_config("--config", "",
                   "INI config file: key=value lines under a [subcommand] section; "
                   "flags override it");
    app.require_subcommand(1);

    RateOpts rate_opts;
    auto* rate = app.add_subcommand("rate", "asymptotic secret-key rate at one channel point");
    add_channel_opts(rate, rate_opts.chan);
    rate->add_option("--det", rate_opts.det, "detection: het|hom");
    rate->add_option("--rec", rate_opts.rec, "reconciliation: dr|rr");
    rate->add_option("--circuit", rate_opts.circuit, "circuit: on|off|oneway");
    rate->add_flag("--auto", rate_opts.auto_circuit,
                   "post-select the circuit from the attack classification");
    rate->callback([&] { run_rate(rate_opts); });

    ThresholdOpts th_opts;
    auto* th = app.add_subcommand("threshold", "security threshold curve over a T grid");
    th->add_option("--det", th_opts.det, "detection: het|hom");
    th->add_option("--rec", th_opts.rec, "reconciliation: dr|rr");
    th->add_option("--circuit", th_opts.circuit, "circuit: on|off|oneway");
    th->add_option("--rule", th_opts.rule,
                   "correlations along the curve: collective|max-separable|anti-separable|max-entangled");
    th->add_option("--T-min", th_opts.T_min, "grid start");
    th->add_option("--T-max", th_opts.T_max, "grid end");
    th->add_option("--steps", th_opts.steps, "grid size");
    th->add_option("--out", th_opts.out, "output file name (default: stdout)");
    th->add_option("--output-dir", th_opts.common.output_dir,
                   "output directory (TWOWAY_OUTPUT_DIR overrides)");
    th->add_option("--format", th_opts.common.format, "csv|jsonl");
    th->callback([&] {
        apply_env(th_opts.common);
        run_threshold(th_opts);
    });

    FigureOpts fig_opts;
    auto* fig = app.add_subcommand("figures", "deterministic data tables behind the figures");
    fig->add_option("--which", fig_opts.which, "all|fig3|figS1");
    fig->add_option("--rec", fig_opts.rec, "reconciliation: dr|rr");
    fig->add_option("--curve-points", fig_opts.curve_points, "T grid size for threshold panels");
    fig->add_option("--boundary-points", fig_opts.boundary_points,
                    "sampling density of the correlation-plane boundary");
    fig->add_option("--output-dir", fig_opts.common.output_dir,
                    "output directory (TWOWAY_OUTPUT_DIR overrides)");
    fig->add_option("--format", fig_opts.common.format, "csv|jsonl");
    fig->callback([&] {
        apply_env(fig_opts.common);
        run_figures(fig_opts);
    });

    SimulateOpts sim_opts;
    auto* sim = app.add_subcommand("simulate", "shot-level Monte Carlo with estimator readback");
    add_channel_opts(sim, sim_opts.chan);
    sim->add_option("--det", sim_opts.det, "detection: het|hom");
    sim->add_option("--rec", sim_opts.rec, "reconciliation: dr|rr");
    sim->add_option("--circuit", sim_opts.circuit, "circuit: on|off|oneway");
    sim->add_option("--mu", sim_opts.mu, "modulation variance");
    sim->add_option("--rounds", sim_opts.rounds, "number of protocol rounds");
    sim->add_option("--seed", sim_opts.seed, "counter RNG seed");
    sim->add_option("--out", sim_opts.out, "samples file name");
    sim->add_option("--output-dir", sim_opts.common.output_dir,
                    "output directory (TWOWAY_OUTPUT_DIR overrides)");
    sim->callback([&] {
        apply_env(sim_opts.common);
        run_simulate(sim_opts);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const std::domain_error& e) {  // includes unsupported_combination
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
