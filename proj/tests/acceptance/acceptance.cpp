// Acceptance run: prints one PASS/FAIL line per criterion and exits nonzero
// when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "mdam/estimation.hpp"
#include "mdam/gibbs_item.hpp"
#include "mdam/glm.hpp"
#include "mdam/random.hpp"
#include "mdam/study.hpp"

#ifndef MDAM_CLI_PATH
#define MDAM_CLI_PATH "mdam"
#endif

namespace fs = std::filesystem;
using namespace mdam;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
    std::printf("criterion %2d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

const StudyRow& row(const std::vector<StudyRow>& rows, const std::string& label) {
    for (const auto& r : rows)
        if (r.estimand == label) return r;
    throw Error("no row " + label);
}

// --- criteria 1-5: the desk-scale study -------------------------------------

void study_criteria() {
    StudyConfig config;  // appendix-b preset, theta1 = -2, R = 100, L = 20, MMH and IH
    config.threads = std::max(1u, std::thread::hardware_concurrency());
    const auto t0 = std::chrono::steady_clock::now();
    const StudyReport rep = run_study(config);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const std::size_t mmh = 0, ih = 1;

    {
        const double frac = rep.plausible_fraction[mmh];
        const bool ok = frac >= 0.95 && secs < 600.0 && rep.failures == 0;
        report(1, ok,
               "MMH datasets with T(X1=1), T(X2=1) inside 4 sqrt(V): " + fmt("%.4f", frac) + " (need >= 0.95); runtime " +
                   fmt("%.1f", secs) + " s (need < 600); failed replicates " + std::to_string(rep.failures));
    }
    {
        bool ok = true;
        std::string d;
        for (const char* e : {"T(X1=1)", "T(X2=1)"}) {
            const double b = row(rep.totals, e).percent_bias[mmh];
            ok = ok && b < 1.5;
            d += std::string(e) + " " + fmt("%.3f%%", b) + " ";
        }
        for (const char* e : {"T(X3=1)", "T(X4=1)", "T(X5)", "T(X6)"}) {
            const double b = row(rep.totals, e).percent_bias[mmh];
            ok = ok && b < 3.0;
            d += std::string(e) + " " + fmt("%.3f%%", b) + " ";
        }
        report(2, ok, "MMH |bias|: " + d + "(need < 1.5% on X1, X2 and < 3% on the rest)");
    }
    {
        const auto& r = row(rep.totals, "T(X2=1)");
        const bool ok = r.percent_bias[ih] > 10.0 && r.coverage[ih] < 20.0;
        report(3, ok, "IH T(X2=1) |bias| " + fmt("%.2f%%", r.percent_bias[ih]) + " (need > 10%), coverage " +
                          fmt("%.1f%%", r.coverage[ih]) + " (need < 20%)");
    }
    {
        const auto& r1 = row(rep.totals, "T(X1=1)");
        const auto& r2 = row(rep.totals, "T(X2=1)");
        const double ratio = r1.avg_est_variance[mmh] / r1.variance[mmh];
        const bool ok = r1.coverage[mmh] >= 97.0 && r2.coverage[mmh] >= 97.0 && ratio >= 5.0;
        report(4, ok, "MMH coverage T(X1=1) " + fmt("%.1f%%", r1.coverage[mmh]) + ", T(X2=1) " +
                          fmt("%.1f%%", r2.coverage[mmh]) + " (need >= 97%); avg pooled var / replicate var " +
                          fmt("%.2f", ratio) + " (need >= 5)");
    }
    {
        const double u = rep.mean_unit_nr_rate;
        bool ok = u > 0.21 && u < 0.25;
        std::string d = "unit NR " + fmt("%.4f", u) + " (need in (0.21, 0.25)); item NR";
        for (const auto& m : config.simulation.item_nonresponse) {
            if (std::isinf(m.phi[0])) continue;
            const double r = rep.mean_item_nr_rate[m.var];
            ok = ok && r > 0.22 && r < 0.28;
            d += " X" + std::to_string(m.var + 1) + " " + fmt("%.4f", r);
        }
        report(5, ok, d + " (need in (0.22, 0.28))");
    }
}

// --- criterion 6: engines agree on one replicate ----------------------------

void engine_concordance() {
    StudyConfig config;
    config.arms = {ArmKind::mmh, ArmKind::mh};
    config.gibbs.burn_in = 1000;
    config.gibbs.thin = 50;
    Rng pop_rng = make_stream(config.seed, 0, 0x706f70);
    const Population pop = generate_population(config.simulation, pop_rng);
    const auto cells = unit_nr_cell_probabilities(pop);
    const auto margins = simulation_margins(pop);
    const auto estimands = simulation_total_estimands();
    const ReplicateResult res = run_replicate(config, pop, cells, margins, estimands, 0);
    if (!res.ok) {
        report(6, false, "replicate failed: " + res.error);
        return;
    }
    bool ok = true;
    double worst = 0.0;
    std::string d;
    for (std::size_t e = 0; e < estimands.size(); ++e) {
        const auto& a = res.arms[0][e];
        const auto& b = res.arms[1][e];
        const double z = std::abs(a.qbar - b.qbar) / std::min(a.se(), b.se());
        worst = std::max(worst, z);
        ok = ok && z < 3.0;
        d += format_estimand(estimands[e]) + " " + fmt("%.2f", z) + " ";
    }
    report(6, ok, "|MICE - Gibbs| / min SE: " + d + "(need < 3 each)");
}

// --- criterion 7: oracles for the full conditional and pooling -------------

double sigmoid_log(double eta, int r) {  // log P(B = r) for B ~ Bernoulli(1/(1+e^-eta))
    const double l1p = eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
    return r * eta - l1p;
}

// Brute-force joint over three binary variables: outcome model k reads
// x_1..x_{k-1}; response model k reads every x except x_k, in order.
double log_joint(const GibbsParams& p, const std::vector<double>& x, const std::vector<std::uint8_t>& r) {
    double lj = 0.0;
    for (int k = 0; k < 3; ++k) {
        double eta = p.outcome_coef[k][0];
        for (int t = 0; t < k; ++t) eta += p.outcome_coef[k][t + 1] * x[t];
        lj += sigmoid_log(eta, int(x[k]));
    }
    for (int k = 0; k < 3; ++k) {
        double eta = p.response_coef[k][0];
        int c = 1;
        for (int t = 0; t < 3; ++t)
            if (t != k) eta += p.response_coef[k][c++] * x[t];
        lj += sigmoid_log(eta, r[k]);
    }
    return lj;
}

void oracle_criteria() {
    auto schema = std::make_shared<const Schema>(
        std::vector<VariableSpec>{VariableSpec::binary("A"), VariableSpec::binary("B"), VariableSpec::binary("C")}, "w");
    const auto fact = ConditionalFactorization::sequential(*schema, {"A", "B", "C"});
    Rng rng = make_stream(7, 7);
    std::normal_distribution<double> coef(0.0, 1.5);
    double worst = 0.0;
    for (int inst = 0; inst < 1000; ++inst) {
        GibbsParams p;
        for (int k = 0; k < 3; ++k) {
            Eigen::VectorXd b(k + 1), g(3);
            for (int t = 0; t <= k; ++t) b[t] = coef(rng);
            for (int t = 0; t < 3; ++t) g[t] = coef(rng);
            p.outcome_coef.push_back(b);
            p.outcome_sd.push_back(1.0);
            p.response_coef.push_back(g);
        }
        RowState row;
        for (int k = 0; k < 3; ++k) {
            row.values.push_back(double(uniform_index(rng, 2)));
            row.missing.push_back(std::uint8_t(uniform_index(rng, 2)));
        }
        const std::size_t j = uniform_index(rng, 3);
        const auto pmf = conditional_pmf_discrete(fact, p, row, j);
        std::vector<double> lj(2);
        for (int v = 0; v < 2; ++v) {
            auto x = row.values;
            x[j] = v;
            lj[v] = log_joint(p, x, row.missing);
        }
        const double m = std::max(lj[0], lj[1]);
        const double z = std::exp(lj[0] - m) + std::exp(lj[1] - m);
        for (int v = 0; v < 2; ++v) worst = std::max(worst, std::abs(pmf[v] - std::exp(lj[v] - m) / z));
    }
    const auto pooled = pool(std::vector<double>{4.0, 6.0}, std::vector<double>{1.0, 1.0});
    const bool pool_ok = pooled.qbar == 5.0 && pooled.ubar == 1.0 && pooled.b == 2.0 && pooled.total_var == 4.0 &&
                         std::abs(pooled.df - 16.0 / 9.0) < 1e-15;
    report(7, worst < 1e-12 && pool_ok,
           "max |pmf - enumeration| over 1000 instances " + fmt("%.3g", worst) +
               " (need < 1e-12); pooling q=(4,6), u=(1,1): total_var " + fmt("%.17g", pooled.total_var) + ", df " +
               fmt("%.17g", pooled.df) + " (need 4, 16/9)");
}

// --- criterion 8: HT identities ---------------------------------------------

void estimation_criteria() {
    Rng rng = make_stream(8, 1);
    std::normal_distribution<double> nd;
    std::vector<double> y(500), w1(500, 1.0);
    for (auto& v : y) v = 10.0 + 3.0 * nd(rng);
    const auto census = ht_total(y, w1, SamplingDesign::poisson);
    double exact = 0.0;
    for (double v : y) exact += v;
    const bool census_ok = std::abs(census.estimate - exact) <= 1e-9 * exact && census.variance == 0.0;

    // fixed population, Poisson samples
    const std::size_t N = 2000;
    std::vector<double> yp(N), pi(N);
    std::lognormal_distribution<double> size(0.0, 0.5);
    double zsum = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        pi[i] = size(rng);
        zsum += pi[i];
    }
    for (std::size_t i = 0; i < N; ++i) {
        yp[i] = 5.0 + 4.0 * pi[i] + nd(rng);
        pi[i] = std::min(1.0, 300.0 * pi[i] / zsum);
    }
    double analytic = 0.0;
    for (std::size_t i = 0; i < N; ++i) analytic += (1.0 - pi[i]) / pi[i] * yp[i] * yp[i];
    const int S = 2000;
    std::vector<double> totals;
    double mean_var = 0.0;
    for (int s = 0; s < S; ++s) {
        std::vector<double> z, w;
        for (std::size_t i = 0; i < N; ++i)
            if (uniform01(rng) < pi[i]) {
                z.push_back(yp[i]);
                w.push_back(1.0 / pi[i]);
            }
        const auto h = ht_total(z, w, SamplingDesign::poisson);
        totals.push_back(h.estimate);
        mean_var += h.variance / S;
    }
    double m = 0.0;
    for (double t : totals) m += t / S;
    double emp = 0.0;
    for (double t : totals) emp += (t - m) * (t - m) / (S - 1);
    const double rel = std::abs(mean_var / emp - 1.0);
    report(8, census_ok && rel < 0.05,
           std::string("census total exact with zero variance: ") + (census_ok ? "yes" : "no") +
               "; mean Poisson variance estimate / empirical variance over 2000 samples " +
               fmt("%.4f", mean_var / emp) + " (need within 5%); against the analytic variance: estimator mean " +
               fmt("%.4f", mean_var / analytic) + ", empirical " + fmt("%.4f", emp / analytic));
}

// --- criterion 9: GLM numerics ----------------------------------------------

// Independent log-likelihood: logistic with y in {0,1}, multinomial with y the
// level index and blocks of width p against level 0.
double oracle_loglik(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int levels, const Eigen::VectorXd& b) {
    const auto p = X.cols();
    double ll = 0.0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        std::vector<double> eta(levels, 0.0);
        for (int e = 1; e < levels; ++e) eta[e] = X.row(i).dot(b.segment((e - 1) * p, p));
        const double m = *std::max_element(eta.begin(), eta.end());
        double z = 0.0;
        for (double v : eta) z += std::exp(v - m);
        ll += eta[int(y[i])] - m - std::log(z);
    }
    return ll;
}

void glm_criteria() {
    Rng rng = make_stream(9, 1);
    std::normal_distribution<double> nd;
    double worst_grad = 0.0, worst_fd = 0.0;
    for (int fit_id = 0; fit_id < 20; ++fit_id) {
        const int levels = fit_id < 10 ? 2 : 3;
        const Family fam = levels == 2 ? Family::logistic : Family::multinomial;
        const int n = 150, p = 3;
        Eigen::MatrixXd X(n, p);
        Eigen::VectorXd y(n);
        Eigen::MatrixXd B(p, levels);
        B.setZero();
        for (int e = 1; e < levels; ++e)
            for (int k = 0; k < p; ++k) B(k, e) = 0.8 * nd(rng);
        for (int i = 0; i < n; ++i) {
            X(i, 0) = 1.0;
            for (int k = 1; k < p; ++k) X(i, k) = nd(rng);
            std::vector<double> w(levels);
            for (int e = 0; e < levels; ++e) w[e] = std::exp(X.row(i).dot(B.col(e)));
            y[i] = double(categorical(rng, w));
        }
        const FittedGlm f = fit_glm(X, y, fam, levels);
        const Eigen::VectorXd& b = f.coefficients;
        const double h = 1e-5;
        for (Eigen::Index k = 0; k < b.size(); ++k) {
            Eigen::VectorXd up = b, dn = b;
            up[k] += h;
            dn[k] -= h;
            const double g = (oracle_loglik(X, y, levels, up) - oracle_loglik(X, y, levels, dn)) / (2 * h);
            worst_fd = std::max(worst_fd, std::abs(g));
        }
        worst_grad = std::max(worst_grad, f.gradient_max);
    }

    // two-level multinomial against logistic on the same data
    const int n = 200;
    Eigen::MatrixXd X(n, 3);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = nd(rng);
        X(i, 2) = nd(rng);
        y[i] = uniform01(rng) < 1.0 / (1.0 + std::exp(-(0.3 + 0.9 * X(i, 1) - 0.5 * X(i, 2)))) ? 1.0 : 0.0;
    }
    const auto lg = fit_glm(X, y, Family::logistic, 2);
    const auto mn = fit_glm(X, y, Family::multinomial, 2);
    const double diff = (lg.coefficients - mn.coefficients).cwiseAbs().maxCoeff();

    const bool ok = worst_grad < 1e-6 && worst_fd < 1e-5 && diff < 1e-6;
    report(9, ok,
           "max |score| at MLE " + fmt("%.3g", worst_grad) + " (need < 1e-6); finite-difference gradient " +
               fmt("%.3g", worst_fd) + " (need < 1e-5); multinomial(m=2) vs logistic " + fmt("%.3g", diff) +
               " (need < 1e-6)");
}

// --- criterion 10: CLI determinism ------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

void determinism_criterion() {
    const fs::path base = fs::temp_directory_path() / "mdam_acceptance_determinism";
    fs::remove_all(base);
    const std::string cli = MDAM_CLI_PATH;
    auto run = [&](const std::string& dir, int threads) {
        const std::string cmd = "\"" + cli + "\" simulate-study --replicates 4 --datasets 3 --seed 4242 --quiet --threads " +
                                std::to_string(threads) + " --out \"" + (base / dir).string() + "\" 2>/dev/null";
        return std::system(cmd.c_str());
    };
    const int rc1 = run("a", 1);
    const int rc2 = run("b", 2);
    bool ok = rc1 == 0 && rc2 == 0;
    std::string d;
    for (const char* f : {"totals.csv", "probs.csv"}) {
        const std::string a = slurp(base / "a" / f), b = slurp(base / "b" / f);
        const bool same = !a.empty() && a == b;
        ok = ok && same;
        d += std::string(f) + (same ? " identical " : " differ ");
    }
    report(10, ok, "two simulate-study runs, seed 4242 (1 and 2 threads): " + d);
    fs::remove_all(base);
}

}  // namespace

int main() {
    const std::vector<std::pair<std::vector<int>, std::function<void()>>> steps{
        {{1, 2, 3, 4, 5}, study_criteria}, {{6}, engine_concordance}, {{7}, oracle_criteria},
        {{8}, estimation_criteria},        {{9}, glm_criteria},       {{10}, determinism_criterion}};
    for (const auto& [ids, step] : steps) {
        try {
            step();
        } catch (const std::exception& e) {
            for (int id : ids) report(id, false, std::string("error: ") + e.what());
        }
    }
    std::printf("%s: %d criterion failure(s)\n", failures == 0 ? "ACCEPTANCE PASSED" : "ACCEPTANCE FAILED", failures);
    return failures == 0 ? 0 : 1;
}
