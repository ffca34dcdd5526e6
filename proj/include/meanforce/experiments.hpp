// experiments.hpp: Sweeps that produce the benchmark tables, the invariant
// suite behind `meanforce validate`, and CSV / JSON emission.

#pragma once

#include <chrono>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "meanforce/config.hpp"
#include "meanforce/edref.hpp"
#include "meanforce/estimator.hpp"
#include "meanforce/kernel.hpp"
#include "meanforce/monte_carlo.hpp"

namespace meanforce {

inline const std::vector<double> kDefaultBetas{0.25, 0.5, 1.0, 2.0, 4.0};
inline const std::vector<double> kDefaultGs{0.25, 0.5, 1.0, 1.5, 2.0};
inline const std::vector<double> kDefaultG2s{0.0, 0.25, 1.0, 2.25, 4.0};

using Cell = std::variant<double, std::int64_t, std::string>;

struct ExperimentResult {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
    nlohmann::json metadata = nlohmann::json::object();
    std::vector<std::string> warnings;

    void add_row(std::vector<Cell> row) {
        if (row.size() != columns.size())
            throw ContractViolation("ExperimentResult: row width does not match columns");
        rows.push_back(std::move(row));
    }

    std::size_t column(const std::string& col) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == col) return i;
        throw ContractViolation("ExperimentResult: no column '" + col + "'");
    }

    double number(std::size_t row, const std::string& col) const {
        const Cell& c = rows.at(row).at(column(col));
        if (const auto* d = std::get_if<double>(&c)) return *d;
        if (const auto* i = std::get_if<std::int64_t>(&c)) return static_cast<double>(*i);
        throw ContractViolation("ExperimentResult: column '" + col + "' is not numeric");
    }
};

// Shortest round-trip decimal form.
inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

inline std::string format_cell(const Cell& c) {
    if (const auto* d = std::get_if<double>(&c)) return format_number(*d);
    if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
    return std::get<std::string>(c);
}

inline nlohmann::json cell_json(const Cell& c) {
    if (const auto* d = std::get_if<double>(&c))
        return std::isfinite(*d) ? nlohmann::json(*d) : nlohmann::json(format_number(*d));
    if (const auto* i = std::get_if<std::int64_t>(&c)) return *i;
    return std::get<std::string>(c);
}

// Header and data lines only; everything that must be reproducible.
inline std::string csv_body(const ExperimentResult& r) {
    std::string out;
    for (std::size_t i = 0; i < r.columns.size(); ++i) out += (i ? "," : "") + r.columns[i];
    out += '\n';
    for (const auto& row : r.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + format_cell(row[i]);
        out += '\n';
    }
    return out;
}

inline void write_csv(std::ostream& os, const ExperimentResult& r) {
    os << "# " << r.metadata.dump() << '\n' << csv_body(r);
}

inline void write_json(std::ostream& os, const ExperimentResult& r) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.rows) {
        nlohmann::json j = nlohmann::json::object();
        for (std::size_t i = 0; i < row.size(); ++i) j[r.columns[i]] = cell_json(row[i]);
        rows.push_back(std::move(j));
    }
    nlohmann::json doc{{"metadata", r.metadata}, {"columns", r.columns}, {"rows", rows}};
    os << doc.dump(2) << '\n';
}

inline void write_result(std::ostream& os, const ExperimentResult& r, const std::string& format) {
    if (format == "json")
        write_json(os, r);
    else
        write_csv(os, r);
}

inline nlohmann::json to_json(const RunConfig& c) {
    return {{"system", {{"energies", c.system.energies}, {"coupled_level", c.system.coupled_level}}},
            {"bath",
             {{"g", c.bath.g},
              {"omega_c", c.bath.omega_c},
              {"modes", c.bath.modes},
              {"omega_max", c.bath.omega_max},
              {"cutoff_interval", c.bath.cutoff_interval}}},
            {"grid", {{"beta", c.grid.beta}, {"slices", c.grid.slices}}},
            {"mc", {{"samples", c.mc.samples}, {"seed", c.mc.seed}, {"antithetic", c.mc.antithetic}}},
            {"ed", {{"n_max", c.ed.n_max}, {"modes_used", c.ed.modes_used}}},
            {"counterterm", c.counterterm},
            {"output", {{"format", c.output.format}}}};
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

inline LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw ContractViolation("linear_fit: need at least two paired points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - f.intercept - f.slope * x[i];
        ss_res += r * r;
    }
    f.r2 = syy > 0.0 ? 1.0 - ss_res / syy : std::numeric_limits<double>::quiet_NaN();
    return f;
}

namespace detail {

// Everything a sweep point needs, rebuilt from the config each time.
struct Point {
    RunConfig cfg;
    SpectralDensity density;
    DiscretizedBath bath;
    SystemModel bare;      // the physical system, used for analysis
    SystemModel simulated; // bare plus the counterterm when enabled
    double lambda_cont = 0.0;

    explicit Point(const RunConfig& c)
        : cfg(c), density(spectral_density(c)), bath(build_bath(c)), bare(build_system(c)),
          simulated(simulated_system(c, bath)), lambda_cont(lambda_continuum(density)) {}

    double beta() const { return cfg.grid.beta; }
    Eigen::Index coupled() const { return cfg.system.coupled_level; }
    // Expected shift of the coupled level relative to the bare Hamiltonian.
    double expected_shift() const { return cfg.counterterm ? 0.0 : -bath.lambda(); }

    Gauge gauge() const {
        return coupled() == 0 ? Gauge::traceless() : Gauge::anchor_level0(bare);
    }

    NoiseFactor factor() const {
        return factorize(covariance_matrix(bath, TimeGrid(beta(), cfg.grid.slices)));
    }

    SamplerOptions sampler(std::uint64_t point_index) const {
        SamplerOptions o;
        o.samples = cfg.mc.samples;
        o.seed = cfg.mc.seed;
        o.antithetic = cfg.mc.antithetic;
        o.stream_offset = point_index * static_cast<std::uint64_t>(cfg.mc.samples);
        return o;
    }

    FockConfig fock() const {
        FockConfig f;
        f.n_max = cfg.ed.n_max;
        f.modes_used = cfg.ed.modes_used;
        return f;
    }

    HermitianOperator analytic() const { return analytic_reduced(simulated, bath.lambda(), beta()); }
};

inline RunConfig with_point(RunConfig c, double beta, double g) {
    c.grid.beta = beta;
    c.bath.g = g;
    validate(c);
    return c;
}

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline nlohmann::json manifest_json(const std::vector<StreamRange>& m) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : m) out.push_back({r.first, r.last});
    return out;
}

inline void finish(ExperimentResult& r, const RunConfig& cfg, const Point& reference,
                   const nlohmann::json& manifest, const Stopwatch& clock) {
    r.metadata["experiment"] = r.name;
    r.metadata["config"] = to_json(cfg);
    r.metadata["lambda_disc"] = reference.bath.lambda();
    r.metadata["lambda_cont"] = reference.lambda_cont;
    r.metadata["seed_manifest"] = manifest;
    r.metadata["warnings"] = r.warnings;
    r.metadata["wall_time_s"] = clock.seconds();
}

inline void note_weights(ExperimentResult& r, const WeightDiagnostics& w, const std::string& where) {
    if (w.heavy_tailed)
        r.warnings.push_back(where + ": top 1% of samples carry " +
                             format_number(w.top_percent_share) +
                             " of the weight (effective sample size " + format_number(w.kish_ess) +
                             ")");
}

} // namespace detail

// Var(X) against 2 beta lambda_disc over a (beta, g) grid.
inline ExperimentResult run_fig1(const RunConfig& cfg, const std::vector<double>& betas,
                                 const std::vector<double>& gs) {
    if (betas.empty() || gs.empty()) throw ContractViolation("fig1: sweeps must be non-empty");
    const detail::Stopwatch clock;
    ExperimentResult r;
    r.name = "fig1";
    r.columns = {"beta", "g", "lambda_disc", "var_X_sample", "var_X_stderr", "var_X_theory",
                 "z_score", "within_4se"};
    nlohmann::json manifest = nlohmann::json::array();
    std::vector<std::vector<double>> var(betas.size(), std::vector<double>(gs.size()));
    std::uint64_t index = 0;
    for (std::size_t b = 0; b < betas.size(); ++b)
        for (std::size_t k = 0; k < gs.size(); ++k, ++index) {
            const detail::Point p(detail::with_point(cfg, betas[b], gs[k]));
            const auto run = sample_field_variance(p.factor(), p.sampler(index));
            const double theory = c_beta(p.bath, p.beta());
            const double diff = run.variance - theory;
            const double z = run.std_error > 0.0 ? diff / run.std_error
                                                 : (diff == 0.0 ? 0.0 : std::copysign(INFINITY, diff));
            var[b][k] = run.variance;
            manifest.push_back({{"beta", betas[b]}, {"g", gs[k]},
                                {"streams", {run.streams.first, run.streams.last}}});
            r.add_row({betas[b], gs[k], p.bath.lambda(), run.variance, run.std_error, theory, z,
                       std::int64_t{std::abs(diff) <= 4.0 * run.std_error}});
        }

    nlohmann::json vs_beta = nlohmann::json::array(), vs_g2 = nlohmann::json::array();
    if (betas.size() >= 2)
        for (std::size_t k = 0; k < gs.size(); ++k) {
            std::vector<double> y;
            for (std::size_t b = 0; b < betas.size(); ++b) y.push_back(var[b][k]);
            const LinearFit f = linear_fit(betas, y);
            vs_beta.push_back({{"g", gs[k]}, {"slope", f.slope}, {"r2", f.r2}});
        }
    if (gs.size() >= 2)
        for (std::size_t b = 0; b < betas.size(); ++b) {
            std::vector<double> x;
            for (double g : gs) x.push_back(g * g);
            const LinearFit f = linear_fit(x, var[b]);
            vs_g2.push_back({{"beta", betas[b]}, {"slope", f.slope}, {"r2", f.r2}});
        }
    r.metadata["regression"] = {{"var_vs_beta", vs_beta}, {"var_vs_g2", vs_g2}};
    detail::finish(r, cfg, detail::Point(cfg), manifest, clock);
    return r;
}

// Coupled-level population from every route, and the extracted lambda.
inline ExperimentResult run_fig2(const RunConfig& cfg, const std::vector<double>& betas,
                                 const std::vector<double>& gs) {
    if (betas.empty() || gs.empty()) throw ContractViolation("fig2: sweeps must be non-empty");
    const detail::Stopwatch clock;
    ExperimentResult r;
    r.name = "fig2";
    r.columns = {"beta",       "g",           "p4_bare",       "p4_analytic", "p4_ed_closed",
                 "p4_ed_fock", "fock_residual", "p4_mc",       "p4_mc_stderr", "lambda_est",
                 "lambda_est_stderr", "lambda_est_over_g2", "lambda_disc", "lambda_cont"};
    nlohmann::json manifest = nlohmann::json::array();
    std::uint64_t index = 0;
    for (double beta : betas)
        for (double g : gs) {
            const detail::Point p(detail::with_point(cfg, beta, g));
            const Eigen::Index c = p.coupled();
            const double bare = populations(gibbs_state(p.bare.hamiltonian(), beta), p.bare)(c);
            const double analytic = populations(p.analytic(), p.bare)(c);
            const double closed =
                populations(displaced_trace_reduced(p.simulated, p.bath, beta), p.bare)(c);
            const FockReduced fock = fock_ed_reduced(p.simulated, p.bath, p.fock(), beta);
            if (!fock.converged)
                r.warnings.push_back("fig2 beta=" + format_number(beta) + " g=" + format_number(g) +
                                     ": Fock truncation residual " + format_number(fock.residual));
            const auto run = sample_density(p.simulated, p.factor(), p.sampler(index++));
            detail::note_weights(r, run.weights,
                                 "fig2 beta=" + format_number(beta) + " g=" + format_number(g));
            const auto est = propagate(run.estimate, [&](const ComplexMatrix& raw) {
                const HermitianOperator rho = hermitized_normalized(raw);
                Eigen::VectorXd v(2);
                v(0) = populations(rho, p.bare)(c);
                v(1) = lambda_estimate(rho, p.bare, beta, c);
                return v;
            });
            manifest.push_back({{"beta", beta}, {"g", g},
                                {"streams", detail::manifest_json(run.estimate.seed_manifest())}});
            r.add_row({beta, g, bare, analytic, closed, populations(fock.state, p.bare)(c),
                       fock.residual, est.value(0), est.std_error(0), est.value(1),
                       est.std_error(1), est.value(1) / (g * g), p.bath.lambda(), p.lambda_cont});
        }
    detail::finish(r, cfg, detail::Point(cfg), manifest, clock);
    return r;
}

// Operator-basis fit of the sampled H_MF across coupling strengths.
inline ExperimentResult run_fig3(const RunConfig& cfg, const std::vector<double>& g2s, double beta) {
    if (g2s.empty()) throw ContractViolation("fig3: sweep must be non-empty");
    const detail::Stopwatch clock;
    ExperimentResult r;
    r.name = "fig3";
    r.columns = {"g2",         "g",          "beta",         "p4_mc",      "p4_mc_stderr",
                 "p4_analytic", "a_H",       "a_H_err",      "a_P",        "a_P_err",
                 "offdiag_norm", "offdiag_err", "residual", "minus_lambda_disc", "a_P_theory",
                 "kish_ess",   "top_percent_share", "heavy_tailed"};
    nlohmann::json manifest = nlohmann::json::array();
    std::uint64_t index = 0;
    for (double g2 : g2s) {
        if (g2 < 0.0) throw ContractViolation("fig3: g^2 must be >= 0");
        const double g = std::sqrt(g2);
        const detail::Point p(detail::with_point(cfg, beta, g));
        const Eigen::Index c = p.coupled();
        const auto run = sample_density(p.simulated, p.factor(), p.sampler(index++));
        detail::note_weights(r, run.weights, "fig3 g2=" + format_number(g2));
        const auto est = propagate(run.estimate, [&](const ComplexMatrix& raw) {
            const HermitianOperator rho = hermitized_normalized(raw);
            const HmfFit fit = fit_basis(extract_hmf(rho, beta, p.gauge()), p.bare);
            Eigen::VectorXd v(5);
            v << populations(rho, p.bare)(c), fit.a_H, fit.a_P, fit.offdiag_norm, fit.residual;
            return v;
        });
        manifest.push_back(
            {{"g2", g2}, {"streams", detail::manifest_json(run.estimate.seed_manifest())}});
        r.add_row({g2, g, beta, est.value(0), est.std_error(0),
                   populations(p.analytic(), p.bare)(c), est.value(1), est.std_error(1),
                   est.value(2), est.std_error(2), est.value(3), est.std_error(3), est.value(4),
                   -p.bath.lambda(), p.expected_shift(), run.weights.kish_ess,
                   run.weights.top_percent_share, std::int64_t{run.weights.heavy_tailed}});
    }
    detail::finish(r, cfg, detail::Point(cfg), manifest, clock);
    return r;
}

// Per-level populations and H_MF level shifts at one (beta, g).
inline ExperimentResult run_fig4(const RunConfig& cfg, double beta, double g) {
    const detail::Stopwatch clock;
    ExperimentResult r;
    r.name = "fig4";
    r.columns = {"level",  "beta",  "g",         "energy",        "p_bare",
                 "p_analytic", "p_ed", "p_ed_fock", "p_mc",       "p_mc_stderr",
                 "delta",  "delta_err", "delta_theory"};
    const detail::Point p(detail::with_point(cfg, beta, g));
    const Eigen::Index d = p.bare.dim();
    const RealVector bare = populations(gibbs_state(p.bare.hamiltonian(), beta), p.bare);
    const RealVector analytic = populations(p.analytic(), p.bare);
    const RealVector closed = populations(displaced_trace_reduced(p.simulated, p.bath, beta), p.bare);
    const FockReduced fock = fock_ed_reduced(p.simulated, p.bath, p.fock(), beta);
    if (!fock.converged)
        r.warnings.push_back("fig4: Fock truncation residual " + format_number(fock.residual));
    const RealVector fock_p = populations(fock.state, p.bare);
    const auto run = sample_density(p.simulated, p.factor(), p.sampler(0));
    detail::note_weights(r, run.weights, "fig4");
    const auto est = propagate(run.estimate, [&](const ComplexMatrix& raw) {
        const HermitianOperator rho = hermitized_normalized(raw);
        Eigen::VectorXd v(2 * d);
        v << populations(rho, p.bare), level_shifts(extract_hmf(rho, beta, p.gauge()), p.bare);
        return v;
    });
    const RealVector e = p.bare.energies();
    for (Eigen::Index i = 0; i < d; ++i)
        r.add_row({std::int64_t{i}, beta, g, e(i), bare(i), analytic(i), closed(i), fock_p(i),
                   est.value(i), est.std_error(i), est.value(d + i), est.std_error(d + i),
                   i == p.coupled() ? p.expected_shift() : 0.0});
    nlohmann::json manifest = nlohmann::json::array();
    manifest.push_back({{"beta", beta}, {"g", g},
                        {"streams", detail::manifest_json(run.estimate.seed_manifest())}});
    detail::finish(r, cfg, p, manifest, clock);
    return r;
}

// lambda_cont and lambda_disc for the configured bath.
inline ExperimentResult run_lambda(const RunConfig& cfg) {
    validate(cfg);
    const detail::Stopwatch clock;
    ExperimentResult r;
    r.name = "lambda";
    r.columns = {"g", "omega_c", "modes", "omega_limit", "lambda_cont", "lambda_disc",
                 "relative_gap"};
    const detail::Point p(cfg);
    const double gap = p.lambda_cont > 0.0 ? (p.bath.lambda() - p.lambda_cont) / p.lambda_cont : 0.0;
    r.add_row({cfg.bath.g, cfg.bath.omega_c, std::int64_t{cfg.bath.modes}, cfg.discretization_limit(),
               p.lambda_cont, p.bath.lambda(), gap});
    detail::finish(r, cfg, p, nlohmann::json::array(), clock);
    return r;
}

// K(tau) at tau = j beta / N, j = 0..N, from the mode sum and the continuum integral.
inline ExperimentResult run_kernel(const RunConfig& cfg) {
    validate(cfg);
    const detail::Stopwatch clock;
    ExperimentResult r;
    r.name = "kernel";
    r.columns = {"j", "tau", "k_discrete", "k_continuum"};
    const detail::Point p(cfg);
    const int n = cfg.grid.slices;
    for (int j = 0; j <= n; ++j) {
        const double tau = p.beta() * j / n;
        r.add_row({std::int64_t{j}, tau, kernel_discrete(p.bath, tau, p.beta()),
                   kernel_continuum(p.density, tau, p.beta())});
    }
    r.metadata["c_beta"] = c_beta(p.bath, p.beta());
    detail::finish(r, cfg, p, nlohmann::json::array(), clock);
    return r;
}

// Empirical lag covariance of sampled paths against K(lag Delta), plus Var(X).
inline ExperimentResult run_sample(const RunConfig& cfg) {
    validate(cfg);
    const detail::Stopwatch clock;
    ExperimentResult r;
    r.name = "sample";
    r.columns = {"lag", "tau", "cov_sample", "cov_stderr", "cov_theory"};
    const detail::Point p(cfg);
    const NoiseFactor factor = p.factor();
    const int n = cfg.grid.slices;
    const std::int64_t m = cfg.mc.samples;
    const std::int64_t chunks = (m + kChunkSize - 1) / kChunkSize;
    std::vector<Eigen::VectorXd> sums(static_cast<std::size_t>(chunks), Eigen::VectorXd::Zero(n));
    std::vector<Eigen::VectorXd> sums_sq(static_cast<std::size_t>(chunks), Eigen::VectorXd::Zero(n));
    detail::for_each_chunk(chunks, resolve_threads(0), [&](std::int64_t c) {
        Eigen::VectorXd& s = sums[static_cast<std::size_t>(c)];
        Eigen::VectorXd& s2 = sums_sq[static_cast<std::size_t>(c)];
        const std::int64_t end = std::min(m, (c + 1) * kChunkSize);
        for (std::int64_t i = c * kChunkSize; i < end; ++i) {
            RandomStream rng(cfg.mc.seed, static_cast<std::uint64_t>(i));
            const Eigen::VectorXd xi = sample_path(factor, rng).values;
            for (int lag = 0; lag < n; ++lag) {
                const double u = xi.head(n - lag).dot(xi.tail(n - lag)) / (n - lag);
                s(lag) += u;
                s2(lag) += u * u;
            }
        }
    });
    Eigen::VectorXd s = Eigen::VectorXd::Zero(n), s2 = Eigen::VectorXd::Zero(n);
    for (std::size_t c = 0; c < sums.size(); ++c) {
        s += sums[c];
        s2 += sums_sq[c];
    }
    const double md = static_cast<double>(m);
    const double delta = p.beta() / n;
    for (int lag = 0; lag < n; ++lag) {
        const double mean = s(lag) / md;
        const double var = std::max(s2(lag) / md - mean * mean, 0.0) * md / (md - 1.0);
        r.add_row({std::int64_t{lag}, lag * delta, mean, std::sqrt(var / md),
                   kernel_discrete(p.bath, lag * delta, p.beta())});
    }
    SamplerOptions opt;
    opt.samples = m;
    opt.seed = cfg.mc.seed;
    opt.antithetic = cfg.mc.antithetic;
    const auto fv = sample_field_variance(factor, opt);
    r.metadata["var_X_sample"] = fv.variance;
    r.metadata["var_X_stderr"] = fv.std_error;
    r.metadata["var_X_theory"] = c_beta(p.bath, p.beta());
    r.metadata["cholesky"] = factor.is_cholesky();
    r.metadata["clipped_mass"] = factor.clipped_mass();
    detail::finish(r, cfg, p, detail::manifest_json({{0, static_cast<std::uint64_t>(m)}}), clock);
    return r;
}

// ---------------------------------------------------------------------------

struct ValidationReport {
    ExperimentResult result;
    bool deterministic_ok = true;
    bool statistical_ok = true;
};

// The invariant suite: deterministic identities plus 4-sigma statistical
// checks at the configured (beta, g).
inline ValidationReport run_validate(const RunConfig& cfg) {
    validate(cfg);
    const detail::Stopwatch clock;
    ValidationReport rep;
    ExperimentResult& r = rep.result;
    r.name = "validate";
    r.columns = {"check", "kind", "value", "tolerance", "pass"};
    const auto record = [&](const std::string& name, bool statistical, double value, double tol,
                            bool pass) {
        r.add_row({name, std::string(statistical ? "statistical" : "deterministic"), value, tol,
                   std::int64_t{pass}});
        (statistical ? rep.statistical_ok : rep.deterministic_ok) &= pass;
    };
    const detail::Point p(cfg);
    const double beta = p.beta();

    {
        double worst = 0.0;
        for (double b : kDefaultBetas)
            for (double g : kDefaultGs) {
                const detail::Point q(detail::with_point(cfg, b, g));
                worst = std::max(worst, (displaced_trace_reduced(q.simulated, q.bath, b).matrix() -
                                         q.analytic().matrix())
                                            .cwiseAbs()
                                            .maxCoeff());
            }
        record("oracle_equivalence", false, worst, 1e-13, worst <= 1e-13);
    }
    std::mt19937_64 rng(cfg.mc.seed);
    std::normal_distribution<double> normal;
    const auto random_path = [&](int n, double scale) {
        NoisePath path{TimeGrid(beta, n), Eigen::VectorXd(n)};
        for (int j = 0; j < n; ++j) path.values(j) = scale * normal(rng);
        return path;
    };
    {
        double worst = 0.0;
        for (int n : {16, cfg.grid.slices})
            for (int i = 0; i < 20; ++i) {
                const NoisePath path = random_path(n, 1.0);
                const ComplexMatrix general = quenched_propagator(p.simulated, path).propagator;
                const ComplexMatrix closed =
                    commuting_propagator(p.simulated, integrated_field(path), beta).propagator;
                worst = std::max(worst, (general - closed).cwiseAbs().maxCoeff() /
                                            closed.cwiseAbs().maxCoeff());
            }
        record("commuting_identity", false, worst, 1e-12, worst <= 1e-12);
    }
    {
        const Eigen::Index c = p.coupled();
        const Eigen::Index other = c == 0 ? 1 : c - 1;
        RealMatrix f = RealMatrix::Zero(p.bare.dim(), p.bare.dim());
        f(c, c) = 1.0;
        f(c, other) = f(other, c) = 0.5;
        const SystemModel nc(p.bare.hamiltonian(), HermitianOperator::from_real(f));
        double worst = 0.0;
        for (int i = 0; i < 20; ++i) {
            const NoisePath path = random_path(32, 1.0);
            const ComplexMatrix u = quenched_propagator(nc, path).propagator;
            const ComplexMatrix v = quenched_propagator(nc, reversed(path)).propagator;
            worst = std::max(worst, (v - u.adjoint()).cwiseAbs().maxCoeff() / u.cwiseAbs().maxCoeff());
        }
        record("time_reversal_adjoint", false, worst, 1e-12, worst <= 1e-12);
    }
    {
        double lo = INFINITY, hi = -INFINITY;
        for (double b : {0.5, 1.0, 2.0, 4.0}) {
            const double a_p =
                fit_basis(extract_hmf(analytic_reduced(p.bare, p.bath.lambda(), b), b, p.gauge()),
                          p.bare)
                    .a_P;
            lo = std::min(lo, a_p);
            hi = std::max(hi, a_p);
        }
        record("temperature_independence", false, hi - lo, 1e-10, hi - lo <= 1e-10);
    }
    {
        const SystemModel ct = p.bare.with_counterterm(p.bath.lambda());
        const HermitianOperator h =
            extract_hmf(analytic_reduced(ct, p.bath.lambda(), beta), beta, p.gauge());
        const double err = (h.matrix() - p.bare.hamiltonian().matrix()).cwiseAbs().maxCoeff();
        record("counterterm_cancellation", false, err, 1e-11, err <= 1e-11);
    }
    {
        const FockReduced fock = fock_ed_reduced(p.simulated, p.bath, p.fock(), beta);
        const double err = (fock.state.matrix() -
                            displaced_trace_reduced(p.simulated, fock.modes, beta).matrix())
                               .cwiseAbs()
                               .maxCoeff();
        // Only a contract at weak coupling; elsewhere it is reported.
        const bool enforced = cfg.bath.g <= 0.5 && beta <= 2.0 && cfg.ed.n_max >= 12;
        record("fock_convergence", false, err, 1e-6, !enforced || err <= 1e-6);
        if (!enforced && err > 1e-6)
            r.warnings.push_back("fock_convergence: error " + format_number(err) +
                                 " at n_max=" + std::to_string(cfg.ed.n_max));
    }

    const NoiseFactor factor = p.factor();
    {
        const auto fv = sample_field_variance(factor, p.sampler(0));
        const double theory = c_beta(p.bath, beta);
        const double diff = std::abs(fv.variance - theory);
        record("var_X_4se", true, diff, 4.0 * fv.std_error, diff <= 4.0 * fv.std_error);
    }
    {
        const auto run = sample_density(p.simulated, factor, p.sampler(1));
        detail::note_weights(r, run.weights, "validate");
        const Eigen::Index d = p.bare.dim();
        const auto est = propagate(run.estimate, [&](const ComplexMatrix& raw) {
            const HermitianOperator rho = hermitized_normalized(raw);
            const HermitianOperator hmf = extract_hmf(rho, beta, p.gauge());
            Eigen::VectorXd v(2 * d + 1);
            v << populations(rho, p.bare), level_shifts(hmf, p.bare), fit_basis(hmf, p.bare).a_P;
            return v;
        });
        const RealVector analytic = populations(p.analytic(), p.bare);
        double worst_pop = 0.0, worst_shift = 0.0;
        for (Eigen::Index i = 0; i < d; ++i) {
            worst_pop = std::max(worst_pop, std::abs(est.value(i) - analytic(i)) / est.std_error(i));
            const double expected = i == p.coupled() ? p.expected_shift() : 0.0;
            worst_shift = std::max(worst_shift,
                                   std::abs(est.value(d + i) - expected) / est.std_error(d + i));
        }
        record("populations_max_z", true, worst_pop, 4.0, worst_pop <= 4.0);
        record("level_shifts_max_z", true, worst_shift, 4.0, worst_shift <= 4.0);
        const double z_ap = std::abs(est.value(2 * d) - p.expected_shift()) / est.std_error(2 * d);
        record("a_P_z", true, z_ap, 4.0, z_ap <= 4.0);
    }
    detail::finish(r, cfg, p,
                   detail::manifest_json({{0, 2 * static_cast<std::uint64_t>(cfg.mc.samples)}}),
                   clock);
    r.metadata["deterministic_ok"] = rep.deterministic_ok;
    r.metadata["statistical_ok"] = rep.statistical_ok;
    return rep;
}

} // namespace meanforce
