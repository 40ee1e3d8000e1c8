// chainctl: command-line driver for the boundary-driven XXZ chain toolkit.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "xxz/xxz.hpp"

using namespace xxz;
using json = nlohmann::ordered_json;

namespace {

constexpr int schema_version = 1;

enum Exit { ok = 0, invalid = 2, contract = 3 };

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    json summary = json::object();
};

struct Common {
    std::string out;
    std::string format = "csv";
    int jobs = 0;
    unsigned seed = 12345;
    bool gnuplot = false;
};

std::string num(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

std::string to_csv(const Table& t)
{
    std::ostringstream os;
    os << "# chainctl " << t.name << " schema " << schema_version << "\n";
    for (size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
    os << "\n";
    for (const auto& r : t.rows) {
        for (size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << num(r[i]);
        os << "\n";
    }
    return os.str();
}

json to_json(const Table& t)
{
    json j;
    j["experiment"] = t.name;
    j["schema"] = schema_version;
    j["columns"] = t.columns;
    j["rows"] = t.rows;
    j["summary"] = t.summary;
    return j;
}

std::string gnuplot_script(const Table& t, const std::string& data)
{
    std::ostringstream os;
    os << "set datafile separator ','\nset key autotitle columnhead\nset xlabel '" << t.columns[0] << "'\n";
    os << "plot ";
    for (size_t i = 1; i < t.columns.size(); ++i)
        os << (i > 1 ? ", \\\n     " : "") << "'" << data << "' using 1:" << i + 1 << " with linespoints";
    os << "\n";
    return os.str();
}

void emit(const Table& t, const Common& c)
{
    std::string body = c.format == "json" ? to_json(t).dump(2) + "\n" : to_csv(t);
    if (c.out.empty()) {
        std::cout << body;
    } else {
        std::filesystem::create_directories(c.out);
        std::string file = t.name + (c.format == "json" ? ".json" : ".csv");
        std::ofstream(std::filesystem::path(c.out) / file) << body;
        if (c.gnuplot && c.format == "csv")
            std::ofstream(std::filesystem::path(c.out) / (t.name + ".gp")) << gnuplot_script(t, file);
    }
    for (const auto& [k, v] : t.summary.items()) std::cerr << k << ": " << v.dump() << "\n";
}

// "lo..hi" or a single integer.
std::pair<int, int> parse_range(const std::string& s)
{
    auto dots = s.find("..");
    try {
        if (dots == std::string::npos) {
            int v = std::stoi(s);
            return {v, v};
        }
        int lo = std::stoi(s.substr(0, dots)), hi = std::stoi(s.substr(dots + 2));
        if (lo > hi) throw Error(ErrorKind::InvalidArgument, "chainctl", "empty size range " + s);
        return {lo, hi};
    } catch (const std::logic_error&) {
        throw Error(ErrorKind::InvalidArgument, "chainctl", "bad size range " + s);
    }
}

std::vector<double> parse_list(const std::string& s)
{
    std::vector<double> v;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            v.push_back(std::stod(item));
        } catch (const std::logic_error&) {
            throw Error(ErrorKind::InvalidArgument, "chainctl", "bad number list " + s);
        }
    }
    if (v.empty()) throw Error(ErrorKind::InvalidArgument, "chainctl", "empty number list");
    return v;
}

// "lo:hi:step" (inclusive, endpoints kept exactly) or a comma list.
std::vector<double> parse_grid(const std::string& s)
{
    if (s.find(':') == std::string::npos) return parse_list(s);
    std::vector<double> p;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ':')) p.push_back(item == "pi" ? pi : item == "-pi" ? -pi : std::stod(item));
    if (p.size() != 3 || !(p[2] > 0) || p[1] < p[0])
        throw Error(ErrorKind::InvalidArgument, "chainctl", "grid must be lo:hi:step with step > 0");
    const int k = std::max(1, static_cast<int>(std::ceil((p[1] - p[0]) / p[2] - 1e-9)));
    std::vector<double> g;
    for (int i = 0; i <= k; ++i) g.push_back(p[0] + (p[1] - p[0]) * i / k);
    return g;
}

struct ChainOpts {
    double delta = 1.0;
    double eps = 1.0;
    std::string n = "10";
    int cutoff = 0;
};

struct DriveOpts {
    int n = 3;
    double delta = 0.5;
    double eps = 0.01;
    std::string rates;
    double mu = 0.5;
    double field = 0.0;
};

DrivingRates rates_of(const DriveOpts& d)
{
    if (d.rates.empty()) {
        if (std::abs(d.mu) > 1) throw Error(ErrorKind::InvalidArgument, "chainctl", "|mu| must be <= 1");
        return DrivingRates::symmetric(d.mu);
    }
    auto v = parse_list(d.rates);
    if (v.size() != 4) throw Error(ErrorKind::InvalidArgument, "chainctl", "--rates needs a,b,c,d");
    return {v[0], v[1], v[2], v[3]};
}

LindbladModel model_of(const DriveOpts& d, double eps)
{
    return boundary_driven(d.n, d.delta, rates_of(d), eps, d.field);
}

void add_chain(CLI::App* app, ChainOpts& o, const char* n_help)
{
    app->add_option("--delta", o.delta, "anisotropy")->capture_default_str();
    app->add_option("--eps", o.eps, "boundary coupling")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--n", o.n, n_help)->capture_default_str();
    app->add_option("--cutoff", o.cutoff, "auxiliary dimension (0 = automatic)")->check(CLI::NonNegativeNumber);
}

void add_drive(CLI::App* app, DriveOpts& o)
{
    app->add_option("--n", o.n, "chain length")->check(CLI::Range(2, 8))->capture_default_str();
    app->add_option("--delta", o.delta, "anisotropy")->capture_default_str();
    app->add_option("--rates", o.rates, "boundary rates a,b,c,d");
    app->add_option("--mu", o.mu, "symmetric driving bias (used without --rates)")->capture_default_str();
    app->add_option("--field", o.field, "staggered field h")->capture_default_str();
}

Table run_profile(const ChainOpts& o)
{
    int n = parse_range(o.n).second;
    NessModel m = make_ness(o.delta, o.eps, n, o.cutoff);
    Table t{"profile", {"j", "sz", "cos_reference"}, {}, {}};
    double dev = 0;
    for (int j = 1; j <= n; ++j) {
        double ref = n > 1 ? std::cos(pi * (j - 1) / (n - 1)) : 1.0;
        double z = m.spin_profile(j);
        dev = std::max(dev, std::abs(z - ref));
        t.rows.push_back({double(j), z, ref});
    }
    t.summary["n"] = n;
    t.summary["cutoff"] = m.family().cutoff;
    t.summary["current"] = m.current();
    t.summary["max_cos_deviation"] = dev;
    t.summary["profile_imag_max"] = m.profile_imag_max();
    return t;
}

Table run_current_scan(const ChainOpts& o, int jobs)
{
    auto [lo, hi] = parse_range(o.n);
    if (lo < 2) throw Error(ErrorKind::InvalidArgument, "chainctl", "current needs n >= 2");
    std::vector<int> sizes;
    for (int n = lo; n <= hi; ++n) sizes.push_back(n);
    auto vals = parallel_map(static_cast<int>(sizes.size()), jobs, [&](int i) {
        NessModel m = make_ness(o.delta, o.eps, sizes[i], o.cutoff);
        return std::pair<double, double>{m.current(), m.log_abs_current(sizes[i])};
    });
    Table t{"current-scan", {"n", "current", "log_current"}, {}, {}};
    std::vector<double> x, y;
    for (size_t i = 0; i < sizes.size(); ++i) {
        t.rows.push_back({double(sizes[i]), vals[i].first, vals[i].second});
        x.push_back(sizes[i]);
        y.push_back(vals[i].second);
    }
    if (sizes.size() >= 2) t.summary["log_slope"] = fit_slope(x, y);
    if (o.delta > 1) t.summary["reference_slope"] = -std::acosh(o.delta);
    return t;
}

Table run_decay_fit(const ChainOpts& o)
{
    auto [lo, hi] = parse_range(o.n);
    DecayFit f = decay_rate_easy_axis(o.delta, o.eps, lo, hi);
    Table t{"decay-fit", {"n", "log_current"}, {}, {}};
    for (size_t i = 0; i < f.sizes.size(); ++i) t.rows.push_back({double(f.sizes[i]), f.log_current[i]});
    t.summary["slope"] = f.slope;
    t.summary["reference"] = f.reference;
    t.summary["relative_deviation"] = std::abs(f.slope / f.reference - 1);
    return t;
}

Table run_fcs_lambda(const DriveOpts& d, const std::string& grid)
{
    EigenTracker tr(model_of(d, d.eps));
    DrivingRates r = rates_of(d);
    Table t{"fcs-lambda", {"chi", "lambda_re", "lambda_im", "first_order_re", "first_order_im"}, {}, {}};
    auto g = parse_grid(grid);
    TiltedSpectrum sp = scan_lambda(tr, g, 0);
    double dev = 0;
    for (size_t i = 0; i < g.size(); ++i) {
        cplx l1 = d.eps * lambda1_closed(g[i], r);
        dev = std::max(dev, std::abs(sp.lambda_values[i] - l1) / d.eps);
        t.rows.push_back({g[i], sp.lambda_values[i].real(), sp.lambda_values[i].imag(), l1.real(), l1.imag()});
    }
    t.summary["lambda_at_zero"] = std::abs(tr.at(0.0));
    t.summary["max_first_order_deviation_over_eps"] = dev;
    return t;
}

Table run_fcs_cumulants(const DriveOpts& d, int order, double h)
{
    EigenTracker tr(model_of(d, d.eps));
    Table t{"fcs-cumulants", {"order", "cumulant", "error_est"}, {}, {}};
    for (const Cumulant& c : cumulants_numeric(tr, order, h)) t.rows.push_back({double(c.order), c.value, c.error});
    DrivingRates r = rates_of(d);
    t.summary["first_order_mean"] = d.eps * (r.a * r.d - r.b * r.c) / r.sum();
    return t;
}

Table run_pert_extract(const DriveOpts& d, const std::string& chis, const std::string& eps_list, int jobs)
{
    auto chi = parse_list(chis);
    auto eps = parse_list(eps_list);
    ModelFactory make = [&](double e) { return model_of(d, e); };
    auto fits = parallel_map(static_cast<int>(chi.size()), jobs,
                             [&](int i) { return perturbative_extraction(make, chi[i], eps); });
    const bool symmetric = d.rates.empty() && d.field == 0.0;
    Table t{"pert-extract",
            {"chi", "lambda1_re", "lambda1_im", "lambda3_re", "lambda3_im", "fit_residual", "lambda1_ref_re",
             "lambda1_ref_im", "lambda3_ref_re", "lambda3_ref_im"},
            {},
            {}};
    DrivingRates r = rates_of(d);
    for (size_t i = 0; i < chi.size(); ++i) {
        cplx l1 = lambda1_closed(chi[i], r);
        cplx l3 = symmetric ? lambda3(chi[i], d.mu, d.n, d.delta) : cplx(NAN, NAN);
        const PerturbativeFit& f = fits[i];
        t.rows.push_back({chi[i], f.lambda1.real(), f.lambda1.imag(), f.lambda3.real(), f.lambda3.imag(), f.residual,
                          l1.real(), l1.imag(), l3.real(), l3.imag()});
    }
    t.summary["eps_grid"] = eps;
    if (symmetric) {
        ChainFactor cf = chain_factor_from_fit(make, d.mu, eps);
        t.summary["chain_factor_fit"] = cf.value;
        t.summary["chain_factor_mpo"] = ansatz_trace(build_z_from_mpo(d.n, d.delta).matrix, d.n);
        if (d.delta == 1.0) t.summary["chain_factor_isotropic_closed_form"] = f_isotropic(d.n);
        if (d.delta == 0.5) t.summary["chain_factor_half_closed_form"] = f_delta_half(d.n);
    }
    return t;
}

struct Check {
    std::string name;
    std::string module;
    double value;
    double tol;
};

Table run_oracle_compare(const ChainOpts& o, double tol, std::vector<Check>& failed)
{
    auto [lo, hi] = parse_range(o.n);
    if (hi > 6) throw Error(ErrorKind::InvalidArgument, "chainctl", "oracle comparison limited to n <= 6");
    Table t{"oracle-compare", {"n", "rho_deviation", "profile_deviation", "current_deviation"}, {}, {}};
    double worst = 0;
    for (int n = std::max(lo, 2); n <= hi; ++n) {
        SteadyState ss = steady_state_full(max_driven(n, o.delta, o.eps));
        CMat rho = ness_density_dense(n, ness_context(o.delta, o.eps, o.cutoff > 0 ? o.cutoff : n + 1));
        NessModel m = make_ness(o.delta, o.eps, n, o.cutoff);
        double dr = max_abs(rho - ss.rho), dp = 0, dc = 0;
        auto po = profile_oracle(ss.rho, n);
        for (int j = 1; j <= n; ++j) dp = std::max(dp, std::abs(po[j - 1] - m.spin_profile(j)));
        for (int k = 1; k < n; ++k) dc = std::max(dc, std::abs(current_oracle(ss.rho, k, n) - m.current()));
        worst = std::max({worst, dr, dp, dc});
        t.rows.push_back({double(n), dr, dp, dc});
    }
    t.summary["max_deviation"] = worst;
    t.summary["tolerance"] = tol;
    if (!(worst <= tol)) failed.push_back({"oracle agreement", "liouville-oracle/mpo-ness", worst, tol});
    return t;
}

Table run_identity_suite(unsigned seed, bool wrong_s, int jobs, std::vector<Check>& failed)
{
    std::mt19937 gen(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<std::function<Check()>> checks;
    for (int i = 0; i < 20; ++i) {
        QContext c = QContext::make(0.95 * u(gen), cplx(u(gen), 2 * u(gen)), cplx(u(gen), u(gen)), 4 + i % 8);
        checks.push_back([c] { return Check{"algebra", "qlax-core", algebra_residual(build_verma(c), c.gamma), 1e-10}; });
        checks.push_back([c] {
            double scale = 0;
            for (const CMat& b : build_lax(c).blocks) scale = std::max(scale, max_abs(b));
            return Check{"sutherland", "qlax-core", sutherland_residual(c).value / (scale * scale), 1e-12};
        });
    }
    const double shift = wrong_s ? 0.5 : 0.0;
    for (double delta : {0.5, 1.0, 1.5})
        for (double eps : {1.0, 0.2})
            checks.push_back([=] {
                QContext c = ness_context(delta, eps, 7);
                c.s += shift;
                return Check{"continuity", "mpo-ness", continuity_residual(NessModel(c, eps, 6)), 1e-9};
            });
    for (double eps : {1.0, 0.2}) {
        checks.push_back([=] {
            cplx s = ness_context(1.0, eps, 10).s;
            return Check{"vtalg", "mpo-ness", vt_algebra_residual(s + shift, s, 10).value, 1e-8};
        });
        checks.push_back([=] {
            auto [l, r] = boundary_residual(ness_context(1.0, eps, 8).s, 8);
            return Check{"boundary", "mpo-ness", std::max(l, r), 1e-9};
        });
    }
    for (int m : {3, 4, 5})
        checks.push_back([=] {
            TruncationReport r = truncation_change(std::cos(pi / m), 1.0, 30, m + 1);
            return Check{"truncation", "mpo-ness", std::max({r.partition_change, r.profile_change, r.current_change}),
                         1e-10};
        });
    auto results = parallel_map(static_cast<int>(checks.size()), jobs, [&](int i) { return checks[i](); });
    Table t{"identity-suite", {"index", "value", "tolerance", "pass"}, {}, {}};
    json list = json::array();
    for (size_t i = 0; i < results.size(); ++i) {
        const Check& c = results[i];
        bool pass = c.value <= c.tol;
        if (!pass) failed.push_back(c);
        t.rows.push_back({double(i), c.value, c.tol, pass ? 1.0 : 0.0});
        list.push_back({{"check", c.name}, {"module", c.module}, {"value", c.value}, {"tolerance", c.tol}, {"pass", pass}});
    }
    t.summary["checks"] = list;
    t.summary["all_pass"] = failed.empty();
    return t;
}

int exit_for(const Error& e)
{
    return e.kind() == ErrorKind::InvalidArgument ? invalid : contract;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Boundary-driven XXZ chain: steady states, transport and counting statistics"};
    app.require_subcommand(1);
    app.set_config("--config", "", "key = value configuration file");
    Common c;
    app.add_option("--out", c.out, "output directory (stdout if omitted)");
    app.add_option("--format", c.format, "output format")->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--jobs", c.jobs, "worker threads (default CHAINCTL_JOBS or hardware)")->check(CLI::NonNegativeNumber);
    app.add_option("--seed", c.seed, "seed for randomized checks");
    app.add_flag("--gnuplot", c.gnuplot, "also write a gnuplot script next to CSV output");

    ChainOpts prof, scan, decay, cmp;
    cmp.n = "4";
    scan.n = "4..60";
    decay.n = "10..60";
    decay.delta = 1.5;
    auto* s_prof = app.add_subcommand("profile", "magnetization profile of the steady state");
    add_chain(s_prof, prof, "chain length");
    auto* s_scan = app.add_subcommand("current-scan", "steady-state current over a size range");
    add_chain(s_scan, scan, "size range lo..hi");
    auto* s_decay = app.add_subcommand("decay-fit", "exponential decay rate of the easy-axis current");
    add_chain(s_decay, decay, "size range lo..hi");
    double tol = 1e-8;
    auto* s_cmp = app.add_subcommand("oracle-compare", "matrix-product steady state against dense Lindblad solution");
    add_chain(s_cmp, cmp, "chain length or range (<= 6)");
    s_cmp->add_option("--tol", tol, "allowed deviation")->capture_default_str();

    DriveOpts fl, fc, pe;
    std::string grid = "-pi:pi:0.05";
    auto* s_fl = app.add_subcommand("fcs-lambda", "leading eigenvalue of the tilted generator on a chi grid");
    add_drive(s_fl, fl);
    s_fl->add_option("--eps", fl.eps, "coupling")->check(CLI::PositiveNumber)->capture_default_str();
    s_fl->add_option("--chi", grid, "grid lo:hi:step or list")->capture_default_str();
    int order = 4;
    double h = 0.02;
    auto* s_fc = app.add_subcommand("fcs-cumulants", "current cumulants by differentiating the leading eigenvalue");
    add_drive(s_fc, fc);
    s_fc->add_option("--eps", fc.eps, "coupling")->check(CLI::PositiveNumber)->capture_default_str();
    s_fc->add_option("--order", order, "highest cumulant")->check(CLI::Range(1, 6))->capture_default_str();
    s_fc->add_option("--step", h, "base stencil step")->check(CLI::PositiveNumber)->capture_default_str();
    std::string chis = "0.7", eps_grid = "0.02,0.04,0.06,0.08,0.1";
    pe.n = 4;
    auto* s_pe = app.add_subcommand("pert-extract", "first- and third-order eigenvalue coefficients from an eps fit");
    add_drive(s_pe, pe);
    s_pe->add_option("--chi", chis, "comma list of chi values")->capture_default_str();
    s_pe->add_option("--eps-grid", eps_grid, "comma list of couplings in (0, 0.2]")->capture_default_str();
    bool wrong_s = false;
    auto* s_id = app.add_subcommand("identity-suite", "residual checks of every structural identity");
    s_id->add_flag("--inject-wrong-s", wrong_s, "negative control: perturb the spin parameter");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? ok : invalid;
    }

    const int jobs = resolve_jobs(c.jobs);
    try {
        Table t;
        std::vector<Check> failed;
        if (*s_prof) t = run_profile(prof);
        else if (*s_scan) t = run_current_scan(scan, jobs);
        else if (*s_decay) t = run_decay_fit(decay);
        else if (*s_cmp) t = run_oracle_compare(cmp, tol, failed);
        else if (*s_fl) t = run_fcs_lambda(fl, grid);
        else if (*s_fc) t = run_fcs_cumulants(fc, order, h);
        else if (*s_pe) t = run_pert_extract(pe, chis, eps_grid, jobs);
        else if (*s_id) t = run_identity_suite(c.seed, wrong_s, jobs, failed);
        emit(t, c);
        if (!failed.empty()) {
            for (const Check& f : failed)
                std::cerr << "contract violated: " << f.name << " [" << f.module << "] residual " << num(f.value)
                          << " > " << num(f.tol) << "\n";
            return contract;
        }
        return ok;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return contract;
    }
}
