// Acceptance suite: runs every gate criterion at its stated tolerance and
// prints one PASS/FAIL line per criterion. Exit code 0 iff all pass.

#include "fpk/bound_verifier.hpp"
#include "fpk/csvio.hpp"
#include "fpk/fpk_solver.hpp"
#include "fpk/lyapunov_bounds.hpp"
#include "fpk/pipeline.hpp"
#include "fpk/problem_spec.hpp"
#include "test_support.hpp"

#include "json.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

using namespace fpk;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::ostringstream detail;

bool expect(bool cond, const std::string& what) {
    if (!cond) detail << "  FAILED: " << what << "\n";
    return cond;
}

double gaussianPdf(double x, double mean, double var) {
    return std::exp(-0.5 * (x - mean) * (x - mean) / var) / std::sqrt(2.0 * M_PI * var);
}

DensityField sampledGaussian(const Grid& g, double mean, double var, double t) {
    DensityField f;
    f.grid = g;
    f.time = t;
    f.values.resize(g.cellCount());
    for (long i = 0; i < g.cellCount(); ++i)
        f.values[i] = gaussianPdf(g.cellCenter(i)[0], mean, var);
    return f;
}

PhiWeight gaussWeight(double a) {   // Phi = e^{a x^2}, 1d
    return PhiWeight{
        [a](const Vector& x, double) { return std::exp(a * x[0] * x[0]); },
        [a](const Vector& x, double) {
            return Vector(Vector::Constant(1, 2.0 * a * x[0] * std::exp(a * x[0] * x[0])));
        },
        [a](const Vector& x, double) {
            double p = std::exp(a * x[0] * x[0]);
            return Matrix(Matrix::Constant(1, 1, (2.0 * a + 4.0 * a * a * x[0] * x[0]) * p));
        },
        nullptr};
}

fs::path freshDir(const std::string& tag) {
    fs::path dir = fs::temp_directory_path() / ("fpkcert_acceptance_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// ---------- criterion 1: power-family eta closed form ----------
bool criterion1() {
    auto t0 = Clock::now();
    bool ok = true;
    for (double C : {0.5, 1.0, 2.0})
        for (double sigma : {0.5, 1.0, 2.0})
            for (double delta : {0.25, 0.5, 0.75}) {
                auto G = GrowthFunction::power(C, sigma);
                for (int i = 0; i < 19; ++i) {
                    double t = 1e-6 * std::pow(1e6, i / 18.0);
                    double eta = solveEta(G, delta, t);
                    double expect_ = std::pow(C * sigma * delta * t, 1.0 / (delta * sigma));
                    double rel = std::abs(eta - expect_) / expect_;
                    ok &= expect(rel <= 1e-8,
                                 "eta mismatch at C=" + std::to_string(C) +
                                     " sigma=" + std::to_string(sigma) +
                                     " delta=" + std::to_string(delta) + " t=" + std::to_string(t) +
                                     " rel=" + std::to_string(rel));
                }
            }
    double elapsed = seconds(t0);
    detail << "  27 combinations x 19 times, elapsed " << elapsed << " s\n";
    ok &= expect(elapsed < 5.0, "runtime exceeded 5 s");
    return ok;
}

// ---------- criterion 2: log-family eta closed form ----------
bool criterion2() {
    bool ok = true;
    const double C = 1.0, delta = 0.5;
    for (double sigma : {1.5, 2.0, 3.0}) {
        auto G = GrowthFunction::logPower(C, sigma);
        double tLo = sigma == 1.5 ? 0.2 : (sigma == 2.0 ? 4e-3 : 1e-4);
        for (int i = 0; i < 12; ++i) {
            double t = tLo * std::pow(10.0, i / 11.0);
            auto r = solveEtaDetailed(G, delta, t);
            if (r.constantExtensionRegime) continue;   // outside the closed form's regime
            double expect_ =
                std::exp(-std::pow(C * (sigma - 1.0) * delta * t, -1.0 / (sigma - 1.0)) / delta);
            double rel = std::abs(r.eta - expect_) / expect_;
            ok &= expect(rel <= 1e-6, "log-family eta mismatch at sigma=" + std::to_string(sigma) +
                                          " t=" + std::to_string(t) + " rel=" + std::to_string(rel));
        }
    }
    return ok;
}

// ---------- criterion 3: Gronwall envelope ----------
bool criterion3() {
    bool ok = true;
    int count = 0;
    for (double C : {0.2, 0.5, 1.0, 2.0}) {
        for (double t : {0.1, 0.5, 1.0, 1.7, 2.5}) {
            double m = 0.3 * (count % 4);
            RateFunctions rates{[C](double) { return C; }, [C](double) { return C; }};
            double got = gronwallEnvelope(rates, t, m);
            double expect_ = std::exp(C * t) - 1.0 + std::exp(C * t) * m;
            double rel = std::abs(got - expect_) / expect_;
            ok &= expect(rel <= 1e-10, "gronwall mismatch at C=" + std::to_string(C) +
                                           " t=" + std::to_string(t) + " rel=" + std::to_string(rel));
            ++count;
        }
    }
    detail << "  " << count << " (C,t,m) triples within 1e-10\n";
    // case (i) is the exact formula
    for (double C : {0.0, 0.7, 2.0})
        for (double t : {0.2, 1.0})
            for (double m : {0.0, 2.5})
                ok &= expect(boundCaseI(C, t, m) == std::exp(C * t) * (1.0 + m),
                             "case (i) is not the exact formula");
    return ok;
}

// ---------- criterion 4: moment-envelope exponents ----------
bool criterion4() {
    bool ok = true;
    {
        std::vector<double> lt, lv;
        for (int i = 0; i < 20; ++i) {
            double t = 1e-4 * std::pow(100.0, i / 19.0);
            lt.push_back(std::log(t));
            lv.push_back(std::log(momentEnvelopePower(2.0, 4.0, 1.0, 0.5, t)));
        }
        auto fit = num::leastSquaresLine(lt, lv);
        detail << "  power-envelope slope " << fit.slope << " (target -1 +- 1e-3)\n";
        ok &= expect(std::abs(fit.slope + 1.0) <= 1e-3, "power-envelope slope out of tolerance");
    }
    {
        std::vector<double> lt, llv;
        for (int i = 0; i < 12; ++i) {
            double t = 6e-3 * std::pow(2e-2 / 6e-3, i / 11.0);
            auto env = momentEnvelopeExponential(3.0, 6.0, 1.0, 1.0, 0.5, t);
            lt.push_back(std::log(t));
            llv.push_back(std::log(std::log(env.value)));
        }
        auto fit = num::leastSquaresLine(lt, llv);
        detail << "  exponential-envelope loglog slope " << fit.slope << " (target -1 +- 1e-2)\n";
        ok &= expect(std::abs(fit.slope + 1.0) <= 1e-2,
                     "exponential-envelope loglog slope out of tolerance");
    }
    return ok;
}

// ---------- criterion 5: OU solver correctness ----------
bool criterion5() {
    auto t0 = Clock::now();
    Grid g = Grid::make1d(8.0, 512);
    auto ou = fpktest::ouField(1);
    auto init = projectInitialMeasure(
        InitialMeasure::gaussian(Vector::Constant(1, 1.0), 0.5 * Matrix::Identity(1, 1)), g);
    SolverConfig cfg;
    cfg.endTime = 10.0;
    auto rr = run(init, ou, cfg);
    auto exact = sampledGaussian(g, 0.0, 1.0, 10.0);
    double l1 = l1Distance(rr.finalState, exact);
    double m2 = weightedMoment(rr.finalState, [](const Vector& x) { return x.squaredNorm(); });
    double elapsed = seconds(t0);
    detail << "  L1 distance " << l1 << " (<= 1e-3), second moment " << m2
           << " (1 +- 2e-3), elapsed " << elapsed << " s (dt " << rr.dtUsed << ", "
           << rr.stepCount << " steps)\n";
    bool ok = expect(l1 <= 1e-3, "L1 distance to the stationary Gaussian too large");
    ok &= expect(std::abs(m2 - 1.0) <= 2e-3, "second moment too far from 1");
    ok &= expect(elapsed < 60.0, "runtime exceeded 60 s");
    return ok;
}

// ---------- criterion 6: mass identity under killing ----------
bool criterion6() {
    bool ok = true;
    ProblemSpec spec = presetSpec("killing1d");
    Grid g = spec.buildGrid();
    auto field = spec.buildField();
    auto init = projectInitialMeasure(spec.buildInitial(g), g);
    double worst[2];
    int idx = 0;
    for (double dt : {2e-4, 1e-4}) {
        SolverConfig cfg = spec.solver;
        cfg.dt = dt;
        auto rr = run(init, field, cfg);
        auto res = massBalanceResidual(rr.ledger);
        double w = 0;
        for (double r : res) w = std::max(w, std::abs(r));
        worst[idx++] = w;
    }
    double ratio = worst[0] / worst[1];
    detail << "  max residual " << worst[0] << " at dt=2e-4, " << worst[1]
           << " at dt=1e-4 (ratio " << ratio << ")\n";
    ok &= expect(worst[0] <= 1e-6, "residual above 1e-6 at the base step");
    ok &= expect(worst[1] <= 1e-6, "residual above 1e-6 at the halved step");
    ok &= expect(ratio >= 3.5 && ratio <= 4.5, "halving dt did not reduce the residual ~4x");
    return ok;
}

// ---------- criterion 7: weak identity under refinement ----------
bool criterion7() {
    bool ok = true;
    auto ou = fpktest::ouField(1);
    std::vector<fpktest::CompactBump> bumps = {
        {Vector::Zero(1), 4.0},
        {Vector::Constant(1, 1.0), 3.0},
        {Vector::Constant(1, -1.5), 3.5},
    };
    std::vector<std::array<double, 2>> residuals(bumps.size());
    int idx = 0;
    for (int N : {256, 512}) {
        Grid g = Grid::make1d(8.0, N);
        auto init = projectInitialMeasure(
            InitialMeasure::gaussian(Vector::Zero(1), Matrix::Identity(1, 1)), g);
        SolverConfig cfg;
        cfg.dt = (N == 256) ? 1e-4 : 2.5e-5;
        cfg.endTime = 1.0;
        for (double t = 0.2; t <= 1.0 + 1e-12; t += 0.00125) cfg.snapshotTimes.push_back(t);
        auto rr = run(init, ou, cfg);
        for (size_t b = 0; b < bumps.size(); ++b)
            residuals[b][idx] = weakIdentityResidual(rr.snapshots, ou, bumps[b].asC2(), 0.2, 1.0);
        ++idx;
    }
    for (size_t b = 0; b < bumps.size(); ++b) {
        double ratio = residuals[b][0] / residuals[b][1];
        detail << "  bump " << b << ": residual " << residuals[b][0] << " -> " << residuals[b][1]
               << " (ratio " << ratio << ")\n";
        ok &= expect(ratio >= 3.5 && ratio <= 4.5,
                     "refinement ratio out of [3.5, 4.5] for bump " + std::to_string(b));
    }
    return ok;
}

// ---------- criterion 8: numerical moment under the analytic envelope ----------
bool criterion8() {
    bool ok = true;
    ProblemSpec spec = presetSpec("example2_5");
    Grid g = spec.buildGrid();
    auto field = spec.buildField();

    // certificate and its growth constant, shared by all three runs
    Region region(Vector::Zero(1), 0.98 * spec.gridExtent0, 0.0, 1.0);
    auto cert = certifyDissipativity(DissipativityForm::Power, field, spec.k, region, 48, 2);
    if (!expect(cert.certified, "dissipativity certification failed")) return false;
    auto c3 = growthConstantPower(cert.c1, cert.c2, spec.r, spec.k);
    if (!expect(c3.has_value(), "no growth constant for the certificate")) return false;
    detail << "  certificate C1=" << cert.c1 << " C2=" << cert.c2 << " C3=" << *c3 << "\n";

    for (double x0 : {0.0, 2.0, 4.0}) {
        auto init = projectInitialMeasure(InitialMeasure::pointMass(Vector::Constant(1, x0)), g);
        auto rr = run(init, field, spec.solver);
        double slackMin = std::numeric_limits<double>::infinity();
        for (const auto& snap : rr.snapshots) {
            if (snap.time < 0.01 - 1e-12) continue;
            double moment = weightedMoment(snap, [](const Vector& x) { return x.squaredNorm(); });
            double bound = momentEnvelopePower(spec.r, spec.k, *c3, spec.delta, snap.time);
            slackMin = std::min(slackMin, bound / moment);
            if (moment > bound) {
                ok &= expect(false, "moment " + std::to_string(moment) + " exceeds bound " +
                                        std::to_string(bound) + " at t=" +
                                        std::to_string(snap.time) + " x0=" + std::to_string(x0));
                break;
            }
        }
        detail << "  x0=" << x0 << ": min bound/moment " << slackMin << "\n";
    }
    return ok;
}

// ---------- criterion 9: envelope verification on the 1d analogue ----------
bool criterion9() {
    bool ok = true;
    auto dir = freshDir("c9");
    ProblemSpec spec = presetSpec("example3_8");
    PipelineOptions opt;
    opt.outDir = dir.string();
    auto outcome = runPipeline(spec, PipelineMode::Verify, opt);
    ok &= expect(outcome.exitCode == 0, "verify pipeline exited " + std::to_string(outcome.exitCode) +
                                            " (" + outcome.message + ")");
    if (!fs::exists(dir / "verification.json")) return false;
    auto v = nlohmann::json::parse(io::readFile((dir / "verification.json").string()));
    double maxRatio = v.value("max_ratio", 1e300);
    detail << "  max rho/envelope " << maxRatio << " (slack 0.25)\n";
    ok &= expect(v.value("pass", false), "envelope check failed");
    ok &= expect(maxRatio <= 1.25, "max ratio above 1 + slack");

    const double q = 3.0;   // r/(k-r) = 3/(4-3)
    bool sawFitted = false, sawMoment = false;
    for (const auto& reg : v["regressions"]) {
        std::string channel = reg.value("channel", "");
        double exponent = reg.value("exponent", 0.0);
        detail << "  regression " << channel << ": exponent " << exponent << "\n";
        if (channel == "fitted_temporal_channel") {
            sawFitted = true;
            ok &= expect(std::abs(exponent - q) <= 0.15 * q,
                         "fitted-channel exponent outside 15% of 3");
        }
        if (channel == "moment_bound") {
            sawMoment = true;
            ok &= expect(std::abs(exponent - q) <= 0.15 * q,
                         "moment-bound exponent outside 15% of 3");
        }
    }
    ok &= expect(sawFitted, "no fitted-channel regression recorded");
    ok &= expect(sawMoment, "no moment-bound regression recorded");
    return ok;
}

// ---------- criterion 10: Phi-conjugation ----------
bool criterion10() {
    Grid g = Grid::make1d(8.0, 512);
    auto ou = fpktest::ouField(1);
    auto phi = gaussWeight(0.25);

    auto init = projectInitialMeasure(
        InitialMeasure::gaussian(Vector::Constant(1, 1.0), 0.5 * Matrix::Identity(1, 1)), g);
    SolverConfig cfg;
    cfg.endTime = 1.0;
    auto direct = run(init, ou, cfg);

    // exact transient: N(e^{-1}, 1 + (0.5-1)e^{-2})
    double mT = std::exp(-1.0), vT = 1.0 + (0.5 - 1.0) * std::exp(-2.0);
    auto exact = sampledGaussian(g, mT, vT, 1.0);

    auto weighted = [&](const DensityField& f) {
        DensityField w = f;
        for (long i = 0; i < g.cellCount(); ++i) {
            double x = g.cellCenter(i)[0];
            w.values[i] *= std::exp(0.25 * x * x);
        }
        return w;
    };

    // measured discretization error of the direct solve, transported by Phi
    double discErr = l1Distance(weighted(direct.finalState), weighted(exact));

    auto conj = conjugatedField(ou, phi);
    DensityField w0 = weighted(init);
    auto conjRun = run(w0, conj, cfg);
    double mismatch = l1Distance(conjRun.finalState, weighted(direct.finalState));
    double wState = l1Distance(conjRun.finalState, weighted(exact));
    detail << "  |w - Phi rho| = " << mismatch << ", measured disc error " << discErr
           << ", w-vs-exact " << wState << "\n";
    return expect(mismatch <= 2.0 * discErr, "conjugated evolution misses Phi rho beyond 2x");
}

// ---------- criterion 11: scaling covariance ----------
bool criterion11() {
    bool ok = true;
    const double t0 = 0.3, tEnd = 0.5;
    ProblemSpec spec = presetSpec("example2_5");
    auto field = spec.buildField();

    Grid g = Grid::make1d(8.0, 512);
    auto init = projectInitialMeasure(
        InitialMeasure::gaussian(Vector::Constant(1, 1.0), 0.3 * Matrix::Identity(1, 1)), g);
    SolverConfig cfg;
    cfg.endTime = tEnd;
    auto direct = run(init, field, cfg);

    // measured discretization error: compare against the restricted 2N solve
    Grid g2 = Grid::make1d(8.0, 1024);
    auto init2 = projectInitialMeasure(
        InitialMeasure::gaussian(Vector::Constant(1, 1.0), 0.3 * Matrix::Identity(1, 1)), g2);
    SolverConfig cfg2 = cfg;
    cfg2.dt = direct.dtUsed / 4.0;
    auto fine = run(init2, field, cfg2);
    double disc = 0;
    {
        num::KahanSum acc;
        for (long i = 0; i < g.cellCount(); ++i) {
            double avg = 0.5 * (fine.finalState.values[2 * i] + fine.finalState.values[2 * i + 1]);
            acc.add(std::abs(direct.finalState.values[i] - avg));
        }
        disc = acc.value() * g.cellVolume();
    }

    // scaled system: y = x/sqrt(t0), s = t/t0
    double root = std::sqrt(t0);
    Grid gs = Grid::make1d(8.0 / root, 512);
    auto scaledField = CoefficientField::isotropic(
        1, [&field, root, t0](const Vector& y, double s) {
            Vector x = root * y;
            return field.diffusion(x, t0 * s)(0, 0);
        },
        [&field, root, t0](const Vector& y, double s) {
            Vector x = root * y;
            return Vector(root * field.drift(x, t0 * s));
        },
        [&field, root, t0](const Vector& y, double s) {
            Vector x = root * y;
            return t0 * field.potential(x, t0 * s);
        });
    scaledField.setTimeIndependent(true);

    DensityField scaledInit;
    scaledInit.grid = gs;
    scaledInit.time = 0;
    scaledInit.values.resize(gs.cellCount());
    for (long i = 0; i < gs.cellCount(); ++i) scaledInit.values[i] = root * init.values[i];
    SolverConfig cfgS;
    cfgS.endTime = tEnd / t0;
    auto scaled = run(scaledInit, scaledField, cfgS);

    DensityField mapped;
    mapped.grid = g;
    mapped.time = tEnd;
    mapped.values.resize(g.cellCount());
    for (long i = 0; i < g.cellCount(); ++i) mapped.values[i] = scaled.finalState.values[i] / root;

    double diff = l1Distance(direct.finalState, mapped);
    detail << "  |direct - mapped-back| = " << diff << ", measured disc error " << disc << "\n";
    ok &= expect(diff <= 2.0 * disc, "scaled solve departs from the direct solve beyond 2x");
    ok &= expect(std::abs(scaled.finalState.mass() - direct.finalState.mass()) < 1e-9,
                 "scaling does not preserve mass");
    return ok;
}

// ---------- criterion 12: determinism ----------
bool criterion12() {
    bool ok = true;
    struct Job {
        const char* preset;
        PipelineMode mode;
        const char* extra;
    };
    std::vector<Job> jobs = {
        {"killing1d", PipelineMode::Bounds, ""},
        {"killing1d", PipelineMode::Simulate, ""},
        {"ou1d", PipelineMode::Verify, "[grid]\ncells = 256\n[solver]\nt_end = 3\nsnapshots = 0.25:0.25:3\n"},
        {"killing1d", PipelineMode::Report, ""},
    };
    for (const auto& job : jobs) {
        auto res = parseSpec(std::string("[problem]\npreset = ") + job.preset + "\n" + job.extra);
        if (!expect(res.ok, std::string("spec for ") + job.preset + " failed to parse")) return false;
        fs::path dirs[2];
        for (int pass = 0; pass < 2; ++pass) {
            auto dir = freshDir(std::string("c12_") + job.preset + "_" +
                                std::to_string(static_cast<int>(job.mode)) + "_" +
                                std::to_string(pass));
            dirs[pass] = dir;
            if (job.mode == PipelineMode::Report) {
                PipelineOptions pre;
                pre.outDir = dir.string();
                runPipeline(res.spec, PipelineMode::Bounds, pre);
                runPipeline(res.spec, PipelineMode::Simulate, pre);
            }
            PipelineOptions opt;
            opt.outDir = dir.string();
            auto outcome = runPipeline(res.spec, job.mode, opt);
            ok &= expect(outcome.exitCode == 0, "pipeline failed during determinism check");
        }
        // compare every artifact byte for byte (timing.json is the declared exception)
        std::set<std::string> names;
        for (int pass = 0; pass < 2; ++pass)
            for (auto& e : fs::recursive_directory_iterator(dirs[pass]))
                if (e.is_regular_file()) names.insert(fs::relative(e.path(), dirs[pass]).string());
        int compared = 0;
        for (const auto& name : names) {
            if (name == "timing.json") continue;
            fs::path a = dirs[0] / name, bpath = dirs[1] / name;
            if (!expect(fs::exists(a) && fs::exists(bpath), "artifact sets differ: " + name))
                return false;
            ok &= expect(io::readFile(a.string()) == io::readFile(bpath.string()),
                         "artifact differs between runs: " + name);
            ++compared;
        }
        detail << "  " << job.preset << " mode " << static_cast<int>(job.mode) << ": " << compared
               << " artifacts byte-identical\n";
    }
    return ok;
}

struct Criterion {
    int id;
    const char* title;
    std::function<bool()> fn;
};

} // namespace

int main(int argc, char** argv) {
    std::vector<Criterion> criteria = {
        {1, "eta closed form (power family), 27 combinations, < 5 s", criterion1},
        {2, "eta closed form (log family) to 1e-6", criterion2},
        {3, "Gronwall envelope to 1e-10 and exact case (i)", criterion3},
        {4, "moment-envelope exponents (-1 +- 1e-3, loglog 1 +- 1e-2)", criterion4},
        {5, "OU solver: L1 <= 1e-3, second moment +- 2e-3, < 60 s", criterion5},
        {6, "mass identity residual <= 1e-6 with ~4x dt-halving gain", criterion6},
        {7, "weak identity residual drops ~4x under refinement", criterion7},
        {8, "solver moments stay under the analytic envelope (x0 in {0,2,4})", criterion8},
        {9, "envelope fit + check at slack 0.25, exponent within 15%", criterion9},
        {10, "Phi-conjugation reproduces Phi rho within 2x disc error", criterion10},
        {11, "scaling covariance within 2x disc error", criterion11},
        {12, "byte-identical artifacts for every pipeline mode", criterion12},
    };

    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

    int failures = 0;
    for (const auto& c : criteria) {
        if (!selected.empty() && !selected.count(c.id)) continue;
        detail.str("");
        bool pass = false;
        std::string error;
        try {
            pass = c.fn();
        } catch (const std::exception& e) {
            error = e.what();
        }
        std::cout << (pass ? "[PASS]" : "[FAIL]") << " criterion " << c.id << ": " << c.title
                  << "\n";
        if (!error.empty()) std::cout << "  exception: " << error << "\n";
        std::cout << detail.str();
        std::cout.flush();
        if (!pass) ++failures;
    }
    if (failures) std::cout << failures << " criterion(s) failed\n";
    else std::cout << "all criteria passed\n";
    return failures == 0 ? 0 : 1;
}
