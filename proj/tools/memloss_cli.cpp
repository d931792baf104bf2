// memloss: command-line front end. One subcommand per experiment; CSV
// artifacts plus a JSON summary on stdout. Exit codes: 0 pass, 1 failed
// expectation gate, 2 usage or configuration error.

#include "memloss/memloss.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace memloss;

namespace {

struct Options {
    std::string config;
    std::string family = "lsv";
    std::vector<double> gamma; // empty: family default
    double beta = 1.0;
    std::size_t k = 1;
    std::size_t n_max = 0;
    std::size_t grid = 1 << 14;
    std::size_t samples = 0;
    std::uint64_t seed = 1;
    std::string base = "m_k";
    std::string out;
    std::string summary;
    std::optional<std::size_t> fit_min, fit_max;
    std::optional<double> expect_slope;
    double tol = 0.1;
    std::optional<double> expect_min;
    std::optional<double> max_z;
    bool expect_plateau = false;
    // memloss / evolve
    std::string f_spec = "holder:1:0";
    std::string g_spec = "holder:1:1";
    std::string density = "uniform";
    std::size_t n0 = 2;
    // frequency
    double threshold = 0.5;
    double b = 0.5;
    std::vector<std::string> inputs;
};

ParamSequence sequence_from(const Options& o) {
    if (!o.config.empty()) return sequence_from_json(load_json(o.config));
    const Family f = parse_family(o.family);
    std::vector<double> gammas = o.gamma;
    if (gammas.empty()) gammas = {f == Family::Pikovsky || f == Family::GrossmannHorner ? 2.0 : 0.5};
    std::vector<MapParams> cycle;
    for (double g : gammas) cycle.push_back(params_for(f, g, o.beta));
    return ParamSequence::periodic(cycle);
}

// "uniform", "holder:<exponent>:<profile>", "cone:<beta>"
DensitySpec density_from(const std::string& s) {
    if (s == "uniform") return DensitySpec::uniform();
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (;;) {
        const auto c = s.find(':', start);
        parts.push_back(s.substr(start, c == std::string::npos ? std::string::npos : c - start));
        if (c == std::string::npos) break;
        start = c + 1;
    }
    if (parts[0] == "holder" && parts.size() == 3)
        return DensitySpec::holder(parse_double(parts[1]), static_cast<int>(parse_double(parts[2])));
    if (parts[0] == "cone" && parts.size() == 2) return DensitySpec::cone(parse_double(parts[1]));
    throw ParamError("density spec '" + s + "' not understood (uniform | holder:<a>:<id> | cone:<beta>)");
}

std::pair<std::size_t, std::size_t> window_for(const std::string& kind, std::size_t n_max, const Options& o) {
    auto w = kind == "memloss" && n_max > 10 ? std::pair<std::size_t, std::size_t>{10, n_max} : default_fit_window(n_max);
    if (o.fit_min) w.first = *o.fit_min;
    if (o.fit_max) w.second = *o.fit_max;
    return w;
}

json fit_json(const std::vector<double>& values, std::pair<std::size_t, std::size_t> w) {
    try {
        const PowerFit f = fit_power_law(values, w.first, w.second);
        return {{"slope", f.slope}, {"intercept", f.intercept}, {"r_squared", f.r_squared},
                {"window", {w.first, w.second}}};
    } catch (const Error& e) {
        return {{"error", e.what()}, {"window", {w.first, w.second}}};
    }
}

std::string csv_kind(const Csv& csv) {
    const std::string h = csv.header_line();
    if (h == "n,value,stderr") return "tails";
    if (h == "n,tv") return "memloss";
    if (h == "n,mass") return "mixing";
    if (h == "n,p_dp,p_mc,stderr,ratio") return "coupling";
    if (h == "n,theta,theta_star") return "frequency";
    if (h == "x,density") return "evolve";
    throw FormatError("unrecognized CSV header '" + h + "'");
}

// Everything here is recomputed from the CSV text alone, so `summarize`
// reproduces the run-time analysis exactly.
json analyze(const Csv& csv, const Options& o) {
    const std::string kind = csv_kind(csv);
    if (csv.rows.empty()) throw FormatError("CSV has a header but no rows");
    json a{{"kind", kind}, {"rows", csv.rows.size()}};
    if (kind == "evolve") {
        const auto x = csv.column("x"), d = csv.column("density");
        const double h = x.size() > 1 ? x[1] - x[0] : 1.0;
        double mass = 0.0, lo = d[0], hi = d[0];
        for (double v : d) {
            mass += v * h;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        a["mass"] = mass;
        a["min"] = lo;
        a["max"] = hi;
        return a;
    }
    const auto n = csv.column("n");
    const std::size_t n_max = static_cast<std::size_t>(n.back());
    a["n_max"] = n_max;
    const auto w = window_for(kind, n_max, o);
    if (kind == "tails") {
        const auto v = csv.column("value");
        a["t1"] = v.size() > 1 ? v[1] : 1.0;
        a["fit"] = fit_json(v, w);
        a["monte_carlo"] = !csv.rows.front()[2].empty();
    } else if (kind == "memloss") {
        const auto v = csv.column("tv");
        a["tv_0"] = v.front();
        a["tv_last"] = v.back();
        a["fit"] = fit_json(v, w);
    } else if (kind == "mixing") {
        const auto v = csv.column("mass");
        double lo = 1.0, hi = 0.0;
        std::size_t arg = 0;
        for (std::size_t i = std::min<std::size_t>(2, v.size() - 1); i < v.size(); ++i) {
            if (v[i] < lo) {
                lo = v[i];
                arg = i;
            }
        }
        for (double x : v) hi = std::max(hi, x);
        a["min_from_2"] = lo;
        a["argmin"] = arg;
        a["max"] = hi;
    } else if (kind == "coupling") {
        const auto dp = csv.column("p_dp"), mc = csv.column("p_mc"), se = csv.column("stderr"),
                   ratio = csv.column("ratio");
        double sup = 0.0;
        std::size_t arg = 0;
        for (std::size_t i = 1; i < ratio.size(); ++i)
            if (ratio[i] > sup) {
                sup = ratio[i];
                arg = i;
            }
        bool noninc = true;
        for (std::size_t i = arg + 1; i < ratio.size(); ++i) noninc = noninc && ratio[i] <= ratio[i - 1];
        a["sup_ratio"] = sup;
        a["argmax_n"] = arg;
        a["plateau"] = arg <= n_max / 2;
        a["nonincreasing_after_argmax"] = noninc;
        a["fit"] = fit_json(dp, w);
        if (!std::isnan(mc.front())) {
            double z = 0.0;
            for (std::size_t i = 0; i < dp.size(); ++i)
                if (se[i] > 0.0) z = std::max(z, std::abs(dp[i] - mc[i]) / se[i]);
            a["max_z"] = z;
            a["fit_mc"] = fit_json(mc, w);
        }
    } else if (kind == "frequency") {
        const auto th = csv.column("theta"), star = csv.column("theta_star");
        a["theta_star_last"] = star.back();
        a["fit_theta_star"] = fit_json(star, w);
    }
    return a;
}

struct Gates {
    json report = json::object();
    bool pass = true;

    void check(const std::string& name, bool ok, json detail) {
        detail["pass"] = ok;
        report[name] = std::move(detail);
        pass = pass && ok;
    }
};

void slope_gate(Gates& g, const json& analysis, const Options& o, const char* fit_key = "fit") {
    if (!o.expect_slope) return;
    const json& fit = analysis.at(fit_key);
    const bool ok = fit.contains("slope") && std::abs(fit["slope"].get<double>() - *o.expect_slope) <= o.tol;
    g.check("slope", ok, {{"expected", *o.expect_slope}, {"tol", o.tol}, {"fit", fit}});
}

int finish(const std::string& command, const Csv& csv, const Options& o, json extra = json::object()) {
    const std::string out = o.out.empty() ? command + ".csv" : o.out;
    const std::string text = csv.text();
    write_file_atomic(out, text);
    const json analysis = analyze(parse_csv(text, out), o);
    Gates gates;
    if (command == "mixing") {
        if (o.expect_min)
            gates.check("min", analysis["min_from_2"].get<double>() >= *o.expect_min, {{"expected_min", *o.expect_min}});
        gates.check("at_most_one", analysis["max"].get<double>() <= 1.0 + 1e-8, {{"max", analysis["max"]}});
    } else if (command == "coupling") {
        slope_gate(gates, analysis, o);
        if (o.expect_plateau)
            gates.check("plateau", analysis["plateau"].get<bool>() && analysis["nonincreasing_after_argmax"].get<bool>(),
                        {{"argmax_n", analysis["argmax_n"]}});
        if (o.max_z && analysis.contains("max_z"))
            gates.check("max_z", analysis["max_z"].get<double>() <= *o.max_z, {{"limit", *o.max_z}});
    } else if (command == "frequency") {
        slope_gate(gates, analysis, o, "fit_theta_star");
    } else if (command != "evolve") {
        slope_gate(gates, analysis, o);
    }
    json summary{{"command", command}, {"csv", out}, {"analysis", analysis}, {"gates", gates.report},
                 {"pass", gates.pass}};
    for (auto& [key, v] : extra.items()) summary[key] = v;
    const std::string text_summary = summary.dump(2) + "\n";
    if (!o.summary.empty()) write_file_atomic(o.summary, text_summary);
    std::cout << text_summary;
    return gates.pass ? 0 : 1;
}

int run_tails(const Options& o) {
    const auto seq = sequence_from(o);
    const std::size_t n_max = o.n_max ? o.n_max : 1000;
    const TailBase base = parse_base(o.base);
    const TailTable t = o.samples > 0 ? return_time_tail_mc(seq, o.k, n_max, o.samples, o.seed, base)
                                      : return_time_tail(seq, o.k, n_max, base);
    return finish("tails", tail_csv(t), o, {{"truncated_mass", t.truncated_mass}});
}

int run_evolve(const Options& o) {
    const auto seq = sequence_from(o);
    const Interval X = state_interval(seq.family());
    const GridDensity f = evolve(seq, make_density(density_from(o.density), X, o.grid), o.n_max);
    Csv csv{{"x", "density"}, {}};
    for (std::size_t i = 0; i < f.size(); ++i) csv.rows.push_back({format_double(f.midpoint(i)), format_double(f[i])});
    return finish("evolve", csv, o);
}

int run_memloss(const Options& o) {
    const auto seq = sequence_from(o);
    const Interval X = state_interval(seq.family());
    const std::size_t n_max = o.n_max ? o.n_max : 200;
    const TailTable tv = memory_loss_curve(seq, make_density(density_from(o.f_spec), X, o.grid),
                                           make_density(density_from(o.g_spec), X, o.grid), n_max);
    Csv csv{{"n", "tv"}, {}};
    for (std::size_t n = 0; n <= n_max; ++n) csv.rows.push_back({std::to_string(n), format_double(tv.values[n])});
    return finish("memloss", csv, o);
}

int run_mixing(const Options& o) {
    const auto seq = sequence_from(o);
    const std::size_t n_max = o.n_max ? o.n_max : 200;
    const MixingReport r = mixing_mass(seq, o.k, n_max, o.grid, o.n0);
    Csv csv{{"n", "mass"}, {}};
    for (std::size_t n = 0; n <= n_max; ++n) csv.rows.push_back({std::to_string(n), format_double(r.mass.values[n])});
    return finish("mixing", csv, o);
}

int run_coupling(const Options& o) {
    const std::size_t n_max = o.n_max ? o.n_max : 1000;
    json cfg = o.config.empty() ? json{{"tails", "synthetic:power:2"}, {"beta", 2.0}, {"beta_prime", 2.0}}
                                : load_json(o.config);
    const fs::path base_dir = o.config.empty() ? fs::path(".") : fs::path(o.config).parent_path();
    const CouplingModel model = coupling_model_from_json(cfg, n_max, base_dir.empty() ? "." : base_dir);
    const TailTable dp = s_tail_dp(model, n_max);
    std::optional<TailTable> mc;
    if (o.samples > 0) mc = s_tail_mc(model, n_max, o.samples, o.seed);
    double theta_star = 0.0;
    for (double t : model.family().bounds().Theta) theta_star = std::max(theta_star, t);
    const double bp = model.family().bounds().beta_prime;
    const double scale = std::pow(theta_star * static_cast<double>(model.k()) + 1.0, bp);
    Csv csv{{"n", "p_dp", "p_mc", "stderr", "ratio"}, {}};
    for (std::size_t n = 0; n <= n_max; ++n)
        csv.rows.push_back({std::to_string(n), format_double(dp.values[n]), mc ? format_double(mc->values[n]) : "",
                            mc ? format_double(mc->std_error[n]) : "",
                            format_double(std::pow(static_cast<double>(n), bp) * dp.values[n] / scale)});
    const auto& c = model.constants();
    json extra{{"constants",
                {{"theta", c.theta}, {"n0", c.n0}, {"K", c.K}, {"lambda", c.lambda}, {"K1", c.K1}, {"K2", c.K2},
                 {"C_h", c.C_h}, {"theta_star", theta_star}, {"theta_star_note", "tabulated-range supremum"}}},
               {"theta_warning", model.family().theta_warning()}};
    return finish("coupling", csv, o, extra);
}

int run_frequency(const Options& o) {
    const auto seq = sequence_from(o);
    const std::size_t n_max = o.n_max ? o.n_max : 10000;
    const ThetaProfile prof = theta_profile(seq, o.threshold, o.b, n_max);
    json extra;
    try {
        const FrequencyReport fr = check_frequency(seq, o.threshold, n_max);
        extra["frequency"] = {{"a", fr.a}, {"kappa", fr.kappa}, {"N", fr.N}};
    } catch (const NoGoodMaps& e) {
        extra["frequency"] = {{"error", e.what()}};
    }
    extra["theta_star_note"] = "tabulated-range supremum";
    Csv csv{{"n", "theta", "theta_star"}, {}};
    for (std::size_t n = 0; n <= n_max; ++n)
        csv.rows.push_back({std::to_string(n), format_double(prof.theta.values[n]),
                            format_double(prof.theta_star.values[n])});
    return finish("frequency", csv, o, extra);
}

int run_summarize(const Options& o) {
    if (o.inputs.empty()) throw ParamError("summarize needs at least one CSV path");
    json out = json::array();
    for (const auto& path : o.inputs) {
        json a = analyze(read_csv(path), o);
        a["csv"] = path;
        out.push_back(std::move(a));
    }
    const std::string text = out.dump(2) + "\n";
    if (!o.summary.empty()) write_file_atomic(o.summary, text);
    std::cout << text;
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"memloss: memory loss experiments for nonstationary intermittent maps"};
    app.require_subcommand(1);
    Options o;

    auto add_sequence = [&](CLI::App* s) {
        s->add_option("--config", o.config, "JSON config (sequence schema)");
        s->add_option("--family", o.family, "lsv | cui | pikovsky | gh");
        s->add_option("--gamma", o.gamma, "gamma values; several values form a periodic cycle")->expected(1, -1);
        s->add_option("--beta", o.beta, "Cui right-branch exponent");
    };
    auto add_output = [&](CLI::App* s) {
        s->add_option("--out", o.out, "CSV output path (default <command>.csv)");
        s->add_option("--summary", o.summary, "also write the JSON summary here");
        s->add_option("--fit-min", o.fit_min, "fit window start");
        s->add_option("--fit-max", o.fit_max, "fit window end");
        s->add_option("--expect-slope", o.expect_slope, "gate: expected fitted slope");
        s->add_option("--tol", o.tol, "gate: slope tolerance");
    };

    auto* tails = app.add_subcommand("tails", "return-time tail table (exact, or Monte Carlo with --samples)");
    add_sequence(tails);
    add_output(tails);
    tails->add_option("--k", o.k, "start index");
    tails->add_option("--n-max", o.n_max, "table depth");
    tails->add_option("--base", o.base, "m_k | lebesgue");
    tails->add_option("--samples", o.samples, "Monte Carlo samples (0 = exact)");
    tails->add_option("--seed", o.seed, "random seed");

    auto* evolve_cmd = app.add_subcommand("evolve", "push a density through n maps");
    add_sequence(evolve_cmd);
    add_output(evolve_cmd);
    evolve_cmd->add_option("--density", o.density, "uniform | holder:<a>:<id> | cone:<beta>");
    evolve_cmd->add_option("--n-max,--steps", o.n_max, "number of steps");
    evolve_cmd->add_option("--grid", o.grid, "cell count (power of two)");

    auto* memloss_cmd = app.add_subcommand("memloss", "total variation between two evolved densities");
    add_sequence(memloss_cmd);
    add_output(memloss_cmd);
    memloss_cmd->add_option("--f", o.f_spec, "first density");
    memloss_cmd->add_option("--g", o.g_spec, "second density");
    memloss_cmd->add_option("--n-max", o.n_max, "steps");
    memloss_cmd->add_option("--grid", o.grid, "cell count (power of two)");

    auto* mixing = app.add_subcommand("mixing", "pushforward mass of m_k on Y_{k+n}");
    add_sequence(mixing);
    add_output(mixing);
    mixing->add_option("--k", o.k, "start index");
    mixing->add_option("--n-max", o.n_max, "steps");
    mixing->add_option("--grid", o.grid, "cell count (power of two)");
    mixing->add_option("--n0", o.n0, "first n in the reported minimum");
    mixing->add_option("--expect-min", o.expect_min, "gate: lower bound for the minimum");

    auto* coupling = app.add_subcommand("coupling", "tail of the random sum S: exact DP and Monte Carlo");
    coupling->add_option("--config", o.config, "JSON config (coupling schema)");
    add_output(coupling);
    coupling->add_option("--n-max", o.n_max, "table depth");
    coupling->add_option("--samples", o.samples, "Monte Carlo samples (0 = DP only)");
    coupling->add_option("--seed", o.seed, "random seed");
    coupling->add_flag("--expect-plateau", o.expect_plateau, "gate: sup of n^beta' P(S >= n) before n_max/2");
    coupling->add_option("--max-z", o.max_z, "gate: largest DP vs MC z-score");

    auto* frequency = app.add_subcommand("frequency", "good-map frequency and Theta profile");
    add_sequence(frequency);
    add_output(frequency);
    frequency->add_option("--threshold", o.threshold, "good maps have gamma <= threshold");
    frequency->add_option("--b", o.b, "reference frequency");
    frequency->add_option("--n-max", o.n_max, "prefix length");

    auto* summarize = app.add_subcommand("summarize", "recompute the analysis from CSV files");
    summarize->add_option("csv", o.inputs, "CSV files")->required();
    summarize->add_option("--summary", o.summary, "also write the JSON here");
    summarize->add_option("--fit-min", o.fit_min, "fit window start");
    summarize->add_option("--fit-max", o.fit_max, "fit window end");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*tails) return run_tails(o);
        if (*evolve_cmd) return run_evolve(o);
        if (*memloss_cmd) return run_memloss(o);
        if (*mixing) return run_mixing(o);
        if (*coupling) return run_coupling(o);
        if (*frequency) return run_frequency(o);
        if (*summarize) return run_summarize(o);
    } catch (const Error& e) {
        std::cerr << "memloss: " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "memloss: config: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "memloss: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
