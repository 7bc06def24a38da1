#include "doctest.h"
#include "fpk/bound_verifier.hpp"
#include "test_support.hpp"

#include <cmath>
#include <random>

using namespace fpk;
using fpktest::vec1;

namespace {

PhiWeight expWeight() {   // Phi = e^x in 1d
    return PhiWeight{
        [](const Vector& x, double) { return std::exp(x[0]); },
        [](const Vector& x, double) { return Vector(Vector::Constant(1, std::exp(x[0]))); },
        [](const Vector& x, double) { return Matrix(Matrix::Constant(1, 1, std::exp(x[0]))); },
        nullptr};
}

PhiWeight gaussWeight(double a) {   // Phi = e^{a x^2} in 1d
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

std::vector<DensityField> syntheticSnapshots(const EnvelopeSpec& env, const Grid& g,
                                             const std::vector<double>& times, double scale = 1.0) {
    std::vector<DensityField> out;
    for (double t : times) {
        DensityField f;
        f.grid = g;
        f.time = t;
        f.values.resize(g.cellCount());
        for (long i = 0; i < g.cellCount(); ++i)
            f.values[i] = scale * std::exp(env.evaluateLog(g.cellCenter(i), t));
        out.push_back(std::move(f));
    }
    return out;
}

} // namespace

TEST_CASE("phi transform frozen examples") {
    auto heat = CoefficientField::isotropic(
        1, [](const Vector&, double) { return 1.0; },
        [](const Vector&, double) { return Vector::Zero(1); },
        [](const Vector&, double) { return 0.0; });
    heat.setAnalyticDiffusionDivergence([](const Vector&, double) { return Vector::Zero(1); });

    SUBCASE("identity weight returns (c, B)") {
        PhiWeight one{[](const Vector&, double) { return 1.0; },
                      [](const Vector&, double) { return Vector::Zero(1); },
                      [](const Vector&, double) { return Matrix::Zero(1, 1); },
                      nullptr};
        auto r = phiTransform(heat, one, vec1(0.7), 0.1);
        CHECK(r.cTilde == doctest::Approx(0.0));
        CHECK(r.bTilde[0] == doctest::Approx(0.0));
    }
    SUBCASE("Phi = e^x gives c~ = 1, B~ = 1") {
        auto r = phiTransform(heat, expWeight(), vec1(0.3), 0.0);
        CHECK(r.cTilde == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(r.bTilde[0] == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("Phi = e^{x^2/2} gives c~ = 1 + x^2, B~ = x") {
        for (double x : {-1.5, 0.25, 2.0}) {
            auto r = phiTransform(heat, gaussWeight(0.5), vec1(x), 0.0);
            CHECK(r.cTilde == doctest::Approx(1.0 + x * x).epsilon(1e-12));
            CHECK(r.bTilde[0] == doctest::Approx(x).epsilon(1e-12));
        }
    }
    SUBCASE("nonpositive weight is rejected") {
        PhiWeight bad{[](const Vector&, double) { return 0.0; },
                      [](const Vector&, double) { return Vector::Zero(1); },
                      [](const Vector&, double) { return Matrix::Zero(1, 1); },
                      nullptr};
        CHECK_THROWS_AS(phiTransform(heat, bad, vec1(0.0), 0.0), std::domain_error);
    }
}

TEST_CASE("conjugation round trip") {
    // double conjugation by Phi then Phi^{-1} restores the field
    auto ou = fpktest::ouField(1);
    auto phi = gaussWeight(0.25);
    auto phiInv = gaussWeight(-0.25);
    auto once = conjugatedField(ou, phi);
    auto back = conjugatedField(once, phiInv);
    for (double x : {-2.0, -0.5, 0.1, 1.7}) {
        Vector p = vec1(x);
        CHECK(back.drift(p, 0.0)[0] == doctest::Approx(ou.drift(p, 0.0)[0]).epsilon(1e-9));
        CHECK(back.potential(p, 0.0) == doctest::Approx(ou.potential(p, 0.0)).epsilon(1e-9));
        // the potential of the paper transform applied to the conjugated
        // system with the inverse weight also restores c
        auto r = phiTransform(once, phiInv, p, 0.0);
        CHECK(r.cTilde == doctest::Approx(ou.potential(p, 0.0)).epsilon(1e-9));
    }
}

TEST_CASE("conjugated OU system has the expected coefficients") {
    // A = 1, b = -x, Phi = e^{x^2/4}: c~ = 1/2 - x^2/4, conservative drift 0
    auto ou = fpktest::ouField(1);
    auto phi = gaussWeight(0.25);
    auto conj = conjugatedField(ou, phi);
    for (double x : {-2.0, 0.0, 0.5, 3.0}) {
        Vector p = vec1(x);
        CHECK(conj.potential(p, 0.0) == doctest::Approx(0.5 - 0.25 * x * x).epsilon(1e-12));
        CHECK(divergenceCorrection(conj, p, 0.0)[0] == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("local ellipticity") {
    SUBCASE("identity diffusion") {
        auto f = fpktest::ouField(2);
        CHECK(localEllipticity(f, Vector::Zero(2), 1.0, EllipticityWindow::FixedRadius, 1.0, 0.5) ==
              doctest::Approx(1.0));
    }
    SUBCASE("exp(-|x|) I attains its infimum on the window edge") {
        auto f = CoefficientField::isotropic(
            2, [](const Vector& x, double) { return std::exp(-x.norm()); },
            [](const Vector&, double) { return Vector::Zero(2); },
            [](const Vector&, double) { return 0.0; });
        double lam = localEllipticity(f, Vector::Zero(2), 1.0, EllipticityWindow::FixedRadius, 1.0, 0.5);
        CHECK(lam == doctest::Approx(std::exp(-1.0)).epsilon(1e-6));
    }
    SUBCASE("parabolic windows shrink as t decreases") {
        auto f = CoefficientField::isotropic(
            1, [](const Vector& x, double) { return std::exp(-x.norm()); },
            [](const Vector&, double) { return Vector::Zero(1); },
            [](const Vector&, double) { return 0.0; });
        double lamLate = localEllipticity(f, vec1(0.0), 1.0, EllipticityWindow::ParabolicSqrtT, 0, 0.5);
        double lamEarly = localEllipticity(f, vec1(0.0), 0.01, EllipticityWindow::ParabolicSqrtT, 0, 0.5);
        CHECK(lamEarly >= lamLate);
    }
}

TEST_CASE("envelope fitting") {
    Grid g = Grid::make1d(6.0, 128);
    auto shape = EnvelopeSpec::blowup(0.5, 2.0, 1.0);
    std::vector<double> times = {0.25, 0.5, 0.75, 1.0};

    SUBCASE("round trip recovers exact constants") {
        EnvelopeSpec truth = shape;
        truth.fitted = true;
        truth.logC4 = std::log(2.0);
        truth.c5 = 3.0;
        auto snaps = syntheticSnapshots(truth, g, times);
        auto fit = fitEnvelopeConstants(snaps, shape);
        REQUIRE(fit.success);
        CHECK(std::exp(fit.spec.logC4) == doctest::Approx(2.0).epsilon(1e-6));
        CHECK(fit.spec.c5 == doctest::Approx(3.0).epsilon(1e-6));
        CHECK(fit.spec.maxViolationGap <= 1e-8);
    }
    SUBCASE("halved data halves C4") {
        EnvelopeSpec truth = shape;
        truth.fitted = true;
        truth.logC4 = std::log(2.0);
        truth.c5 = 3.0;
        auto snaps = syntheticSnapshots(truth, g, times, 0.5);
        auto fit = fitEnvelopeConstants(snaps, shape);
        REQUIRE(fit.success);
        CHECK(std::exp(fit.spec.logC4) == doctest::Approx(1.0).epsilon(1e-6));
        auto rep = checkEnvelope(snaps, fit.spec, 0.0);
        CHECK(rep.maxRatio <= 1.0 + 1e-9);
    }
    SUBCASE("fewer than three snapshots is a precondition error") {
        EnvelopeSpec truth = shape;
        truth.fitted = true;
        truth.logC4 = 0;
        truth.c5 = 1;
        auto snaps = syntheticSnapshots(truth, g, {0.5});
        CHECK_THROWS_AS(fitEnvelopeConstants(snaps, shape), std::invalid_argument);
    }
    SUBCASE("refitting the fitted envelope is idempotent") {
        EnvelopeSpec truth = shape;
        truth.fitted = true;
        truth.logC4 = std::log(1.3);
        truth.c5 = 0.7;
        auto snaps = syntheticSnapshots(truth, g, times);
        auto fit1 = fitEnvelopeConstants(snaps, shape);
        REQUIRE(fit1.success);
        auto snaps2 = syntheticSnapshots(fit1.spec, g, times);
        auto fit2 = fitEnvelopeConstants(snaps2, shape);
        REQUIRE(fit2.success);
        CHECK(fit2.spec.logC4 == doctest::Approx(fit1.spec.logC4).epsilon(1e-9));
        CHECK(fit2.spec.c5 == doctest::Approx(fit1.spec.c5).epsilon(1e-9));
    }
}

TEST_CASE("envelope checking") {
    Grid g = Grid::make1d(6.0, 128);
    EnvelopeSpec truth = EnvelopeSpec::blowup(0.5, 2.0, 1.0);
    truth.fitted = true;
    truth.logC4 = std::log(2.0);
    truth.c5 = 0.5;
    std::vector<double> times = {0.25, 0.5, 1.0};

    SUBCASE("the envelope itself passes at zero slack") {
        auto snaps = syntheticSnapshots(truth, g, times);
        auto rep = checkEnvelope(snaps, truth, 0.0);
        CHECK(rep.maxRatio == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(rep.pass);
    }
    SUBCASE("doubled data fails at slack 0.5 with ratio 2") {
        auto snaps = syntheticSnapshots(truth, g, times, 2.0);
        auto rep = checkEnvelope(snaps, truth, 0.5);
        CHECK(rep.maxRatio == doctest::Approx(2.0).epsilon(1e-9));
        CHECK_FALSE(rep.pass);
        CHECK(rep.witness.density > 0);
    }
    SUBCASE("report serializes with stable fields") {
        auto snaps = syntheticSnapshots(truth, g, times);
        auto rep = checkEnvelope(snaps, truth, 0.25);
        rep.configDigest = "deadbeef";
        auto s = toJson(rep);
        for (const char* key : {"envelope", "constants", "exponents", "max_ratio", "witness",
                                "regressions", "config_digest"})
            CHECK(s.find(key) != std::string::npos);
    }
}

TEST_CASE("decay exponent estimation") {
    SUBCASE("exact power law") {
        std::vector<std::pair<double, double>> series;
        for (double t = 0.01; t <= 1.0; t *= 1.6) series.emplace_back(t, std::pow(t, -1.5));
        auto est = decayExponentEstimate(series, DecayModel::Power);
        CHECK(est.exponent == doctest::Approx(1.5).epsilon(1e-9));
        CHECK(est.stderr_ <= 1e-9);
    }
    SUBCASE("exact exponential blow-up under loglog") {
        std::vector<std::pair<double, double>> series;
        for (double t = 0.02; t <= 0.6; t *= 1.5) series.emplace_back(t, std::exp(2.0 / t));
        auto est = decayExponentEstimate(series, DecayModel::LogLog);
        CHECK(est.exponent == doctest::Approx(1.0).epsilon(1e-6));
    }
    SUBCASE("multiplicative noise stays within three standard errors") {
        std::mt19937 rng(5);
        std::uniform_real_distribution<double> noise(-0.01, 0.01);
        std::vector<std::pair<double, double>> series;
        for (double t = 0.01; t <= 1.0; t *= 1.3)
            series.emplace_back(t, std::pow(t, -2.0) * (1.0 + noise(rng)));
        auto est = decayExponentEstimate(series, DecayModel::Power);
        CHECK(std::abs(est.exponent - 2.0) <= 3.0 * est.stderr_ + 1e-3);
    }
    SUBCASE("nonpositive values are a domain error") {
        std::vector<std::pair<double, double>> series = {
            {0.1, 1.0}, {0.2, -1.0}, {0.3, 1.0}, {0.4, 1.0}, {0.5, 1.0}};
        CHECK_THROWS_AS(decayExponentEstimate(series, DecayModel::Power), std::domain_error);
    }
}

TEST_CASE("pointwise bound right-hand side") {
    Grid g = Grid::make1d(6.0, 128);
    auto heat = CoefficientField::isotropic(
        1, [](const Vector&, double) { return 1.0; },
        [](const Vector&, double) { return Vector::Zero(1); },
        [](const Vector&, double) { return 0.0; });
    heat.setAnalyticDiffusionDivergence([](const Vector&, double) { return Vector::Zero(1); });
    heat.setTimeIndependent(true);

    SUBCASE("zero density gives zero") {
        std::vector<DensityField> snaps;
        for (double t : {0.5, 0.75, 1.0}) {
            DensityField f;
            f.grid = g;
            f.time = t;
            f.values.assign(g.cellCount(), 0.0);
            snaps.push_back(f);
        }
        double rhs = pointwiseBoundRhs(heat, snaps, vec1(0.0), 1.0, 2.0, 0.5,
                                       EllipticityWindow::FixedRadius, 1.0);
        CHECK(rhs == 0.0);
    }
    SUBCASE("A = I, B = 0, c = 0 reduces to 2^gamma * integral of 2 rho") {
        std::vector<DensityField> snaps;
        std::vector<double> times = {0.5, 0.7, 0.9, 1.0};
        for (double t : times)
            snaps.push_back(projectInitialMeasure(
                InitialMeasure::gaussian(Vector::Zero(1), Matrix::Identity(1, 1)), g)),
                snaps.back().time = t;
        double gamma = 2.0, kappa = 1.5;
        double rhs = pointwiseBoundRhs(heat, snaps, vec1(0.0), 1.0, gamma, 0.5,
                                       EllipticityWindow::FixedRadius, kappa);
        // direct quadrature oracle: (1+1)^gamma int_{0.5}^{1} int 2 rho
        std::vector<double> vals;
        for (const auto& s : snaps) {
            double localMass = 0;
            for (long i = 0; i < g.cellCount(); ++i)
                if (std::abs(g.cellCenter(i)[0]) <= kappa) localMass += s.values[i];
            vals.push_back(2.0 * localMass * g.cellVolume());
        }
        double integral = 0;
        for (size_t i = 1; i < times.size(); ++i)
            integral += 0.5 * (vals[i] + vals[i - 1]) * (times[i] - times[i - 1]);
        CHECK(rhs == doctest::Approx(std::pow(2.0, gamma) * integral).epsilon(1e-12));
    }
    SUBCASE("window escaping the grid is a domain error") {
        std::vector<DensityField> snaps;
        for (double t : {0.5, 1.0}) {
            DensityField f;
            f.grid = g;
            f.time = t;
            f.values.assign(g.cellCount(), 0.1);
            snaps.push_back(f);
        }
        CHECK_THROWS_AS(pointwiseBoundRhs(heat, snaps, vec1(5.9), 1.0, 2.0, 0.5,
                                          EllipticityWindow::FixedRadius, 1.0),
                        std::domain_error);
    }
    SUBCASE("shrinking windows shrink the bound") {
        std::vector<DensityField> snaps;
        for (double t : {0.5, 0.75, 1.0})
            snaps.push_back(projectInitialMeasure(
                InitialMeasure::gaussian(Vector::Zero(1), Matrix::Identity(1, 1)), g)),
                snaps.back().time = t;
        double wide = pointwiseBoundRhs(heat, snaps, vec1(0.0), 1.0, 2.0, 0.5,
                                        EllipticityWindow::FixedRadius, 2.0);
        double narrow = pointwiseBoundRhs(heat, snaps, vec1(0.0), 1.0, 2.0, 0.5,
                                          EllipticityWindow::FixedRadius, 0.5);
        CHECK(narrow < wide);
    }
}

TEST_CASE("density-to-bound ratio stays bounded under refinement") {
    // the realized content of the pointwise estimates: the max over samples of
    // rho/rhs must not blow up as the grid refines
    auto ou = fpktest::ouField(1);
    double maxRatio[2];
    int idx = 0;
    for (int N : {128, 256}) {
        Grid g = Grid::make1d(8.0, N);
        auto init = projectInitialMeasure(
            InitialMeasure::gaussian(Vector::Zero(1), Matrix::Identity(1, 1)), g);
        SolverConfig cfg;
        cfg.endTime = 1.0;
        for (double t = 0.3; t <= 1.0; t += 0.025) cfg.snapshotTimes.push_back(t);
        auto rr = run(init, ou, cfg);
        std::mt19937 rng(17);
        std::uniform_real_distribution<double> xd(-2.0, 2.0), td(0.7, 1.0);
        double worst = 0;
        for (int s = 0; s < 100; ++s) {
            double t = td(rng);
            Vector x = vec1(xd(rng));
            double rhs = pointwiseBoundRhs(ou, rr.snapshots, x, t, 2.0, 0.5,
                                           EllipticityWindow::FixedRadius, 1.0);
            // density at the nearest snapshot/cell
            const DensityField* best = &rr.snapshots.front();
            for (const auto& s2 : rr.snapshots)
                if (std::abs(s2.time - t) < std::abs(best->time - t)) best = &s2;
            long cell = std::min<long>(g.cellCount() - 1,
                                       static_cast<long>((x[0] + 8.0) / g.cellWidth(0)));
            double rho = best->values[cell];
            if (rhs > 0) worst = std::max(worst, rho / rhs);
            CHECK(std::isfinite(rhs));
        }
        maxRatio[idx++] = worst;
    }
    CHECK(maxRatio[1] <= 1.25 * maxRatio[0]);
}
