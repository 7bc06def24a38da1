#include "fpk/lyapunov_bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fpk {

using num::isFinite;

double gronwallEnvelope(const RateFunctions& rates, double t, double initialMoment,
                        double relTol) {
    if (!(t > 0)) throw std::invalid_argument("gronwallEnvelope: requires t > 0");
    if (initialMoment < 0) throw std::invalid_argument("gronwallEnvelope: initial moment must be >= 0");
    auto K = [&](double s) {
        double v = rates.K(s);
        if (v < 0) throw std::domain_error("gronwallEnvelope: K(t) must be nonnegative");
        return v;
    };
    auto H = [&](double s) {
        double v = rates.H(s);
        if (v < 0) throw std::domain_error("gronwallEnvelope: H(t) must be nonnegative");
        return v;
    };
    num::QuadratureOptions inner{std::min(relTol * 1e-2, 1e-12), 1e-300, 60};
    auto Hint = [&](double s) {
        return s == 0 ? 0.0 : num::adaptiveSimpson(H, 0.0, s, inner);
    };
    double logR = Hint(t);
    num::QuadratureOptions outer{relTol * 0.1, 1e-300, 60};
    double kOverR = num::adaptiveSimpson(
        [&](double s) { return K(s) * std::exp(-Hint(s)); }, 0.0, t, outer);
    double R = std::exp(logR);
    if (!isFinite(R)) throw std::overflow_error("gronwallEnvelope: exp(int H) overflows");
    return R * (kOverR + initialMoment);
}

// ---------------- GrowthFunction ----------------

GrowthFunction GrowthFunction::power(double C, double sigma) {
    if (!(C > 0) || !(sigma > 0))
        throw std::invalid_argument("GrowthFunction::power: requires C > 0 and sigma > 0");
    GrowthFunction g;
    g.gOfLog_ = [C, sigma](double v) { return C * std::exp(sigma * v); };
    g.validate();
    return g;
}

GrowthFunction GrowthFunction::logPower(double C, double sigma) {
    if (!(C > 0) || !(sigma > 0))
        throw std::invalid_argument("GrowthFunction::logPower: requires C > 0 and sigma > 0");
    const double vMin = std::log(2.0);
    GrowthFunction g;
    g.gOfLog_ = [C, sigma, vMin](double v) { return C * std::pow(std::max(v, vMin), sigma); };
    g.validate();
    return g;
}

GrowthFunction GrowthFunction::fromLogArgument(std::function<double(double)> gOfLog) {
    GrowthFunction g;
    g.gOfLog_ = std::move(gOfLog);
    g.validate();
    return g;
}

GrowthFunction GrowthFunction::fromPlain(std::function<double(double)> plain) {
    GrowthFunction g;
    g.gOfLog_ = [fn = std::move(plain)](double v) { return fn(std::exp(v)); };
    g.validate();
    return g;
}

double GrowthFunction::value(double z) const {
    if (!(z >= 0)) throw std::domain_error("GrowthFunction: argument must be >= 0");
    return gOfLog_(std::log(z));
}

double GrowthFunction::valueFromLog(double v) const { return gOfLog_(v); }

void GrowthFunction::validate() {
    // monotonicity and positivity on a wide logarithmic grid. Overflow to
    // +inf at the top and underflow to 0 at the bottom are representational
    // artifacts of steep power laws, not violations.
    double prev = 0.0;
    bool seenPositive = false;
    for (int i = 0; i <= 96; ++i) {
        double v = -16.0 + 32.0 * i / 96.0;
        double g = gOfLog_(v);
        if (g != g || g < 0)
            throw std::invalid_argument("GrowthFunction: evaluator must be positive");
        if (g == 0) {
            if (seenPositive)
                throw std::invalid_argument("GrowthFunction: evaluator must be increasing");
            continue;
        }
        seenPositive = true;
        if (g < prev * (1.0 - 1e-12))
            throw std::invalid_argument("GrowthFunction: evaluator must be increasing");
        prev = g;
    }
    if (!seenPositive)
        throw std::invalid_argument("GrowthFunction: evaluator must be positive");
    // tail witness: Cauchy criterion over doubling upper limits
    try {
        tailIntegralLog(*this, 0.0);
        tailConverges_ = true;
    } catch (const num::DivergenceError&) {
        tailConverges_ = false;
    }
}

double tailIntegralLog(const GrowthFunction& G, double w) {
    if (!(w < 1e300)) return 0.0;
    return num::tailIntegral([&G](double v) { return 1.0 / G.valueFromLog(v); }, w);
}

double tailIntegral(const GrowthFunction& G, double y) {
    if (!(y > 0)) throw std::domain_error("tailIntegral: requires y > 0");
    if (!G.tailConverges())
        throw num::DivergenceError("tailIntegral: growth function has a divergent tail");
    return tailIntegralLog(G, std::log(y));
}

// ---------------- eta inversion ----------------

EtaResult solveEtaDetailed(const GrowthFunction& G, double delta, double t) {
    if (!(delta > 0 && delta < 1)) throw std::invalid_argument("solveEta: requires delta in (0,1)");
    if (!(t > 0)) throw std::invalid_argument("solveEta: requires t > 0");
    if (!G.tailConverges())
        throw num::DivergenceError("solveEta: growth function has a divergent tail");

    const double target = delta * t;
    num::RootOptions opt;
    opt.maxIter = 200;
    opt.xTol = 1e-12;
    opt.residualRelTol = 1e-10;
    double w;
    try {
        w = num::solveMonotone([&G](double v) { return tailIntegralLog(G, v); }, target, 0.0, opt);
    } catch (const num::RootFindError&) {
        throw std::range_error("solveEta: t outside the range representable by F/delta");
    }
    EtaResult res;
    res.logY = w;
    res.logEta = -w / delta;
    res.eta = std::exp(res.logEta);
    res.constantExtensionRegime = (w < std::log(2.0));
    return res;
}

double solveEta(const GrowthFunction& G, double delta, double t) {
    return solveEtaDetailed(G, delta, t).eta;
}

EtaProfile::EtaProfile(GrowthFunction G, double delta) : G_(std::move(G)), delta_(delta) {
    if (!(delta > 0 && delta < 1)) throw std::invalid_argument("EtaProfile: delta in (0,1)");
}

EtaResult EtaProfile::at(double t) const {
    auto it = cache_.find(t);
    if (it != cache_.end()) return it->second;
    EtaResult r = solveEtaDetailed(G_, delta_, t);
    cache_.emplace(t, r);
    return r;
}

double EtaProfile::etaIntegralRatio(double t) const {
    auto it = ratioCache_.find(t);
    if (it != ratioCache_.end()) return it->second;
    EtaResult top = at(t);
    // int_0^t eta(s)/eta(t) ds = t - int_0^1 T(eta(t) z) dz with T the inverse
    // of eta; T(eta z) = F((eta z)^{-delta})/delta stays representable through
    // the log of the argument even when eta underflows. The substitution
    // z = e^{-u} removes the z^(delta sigma)-type endpoint singularity.
    auto integrand = [&](double u) {
        double w = top.logY + delta_ * u;
        return tailIntegralLog(G_, w) / delta_ * std::exp(-u);
    };
    double inv = num::tailIntegral(integrand, 0.0, 1e-10);
    double ratio = std::max(0.0, t - inv);
    ratioCache_.emplace(t, ratio);
    return ratio;
}

double EtaProfile::etaIntegral(double t) const { return etaIntegralRatio(t) * at(t).eta; }

// ---------------- bound cases ----------------

double boundCaseI(double C, double t, double initialMoment) {
    if (!(C > 0) && C != 0) throw std::invalid_argument("boundCaseI: requires C >= 0");
    if (initialMoment < 0) throw std::invalid_argument("boundCaseI: initial moment must be >= 0");
    double e = std::exp(C * t);
    double out = e * (1.0 + initialMoment);
    if (!isFinite(out)) throw std::overflow_error("boundCaseI: exp(Ct) overflows");
    return out;
}

double boundCaseII(const EtaProfile& profile, double C, double t) {
    if (!(t > 0)) throw std::invalid_argument("boundCaseII: requires t > 0");
    if (C < 0) throw std::invalid_argument("boundCaseII: requires C >= 0");
    EtaResult r = profile.at(t);
    double delta = profile.delta();
    double arg = -delta * r.logEta;
    if (arg > 709.0) throw std::overflow_error("boundCaseII: 1/eta^delta overflows");
    double term1 = std::exp(arg) / (1.0 - delta);
    double term2 = C == 0 ? 0.0 : C * profile.etaIntegralRatio(t);
    return term1 + term2;
}

double boundCaseII(const GrowthFunction& G, double delta, double C, double t) {
    EtaProfile profile(G, delta);
    return boundCaseII(profile, C, t);
}

double boundCaseIII(const EtaProfile& profile, double C, double t) {
    if (!(t > 0)) throw std::invalid_argument("boundCaseIII: requires t > 0");
    if (C < 0) throw std::invalid_argument("boundCaseIII: requires C >= 0");
    EtaResult r = profile.at(t);
    double delta = profile.delta();
    double arg = std::exp((1.0 - delta) * r.logEta) / (1.0 - delta);
    if (C != 0) arg += C * profile.etaIntegral(t);
    if (arg > 709.0) throw std::overflow_error("boundCaseIII: bound exceeds double range");
    return std::exp(arg);
}

double boundCaseIII(const GrowthFunction& G, double delta, double C, double t) {
    EtaProfile profile(G, delta);
    return boundCaseIII(profile, C, t);
}

// ---------------- example envelopes ----------------

double momentEnvelopePower(double r, double k, double c3, double delta, double t) {
    if (!(k > 2)) throw std::invalid_argument("momentEnvelopePower: requires k > 2");
    if (!(r >= 2)) throw std::invalid_argument("momentEnvelopePower: requires r >= 2");
    if (!(c3 > 0)) throw std::invalid_argument("momentEnvelopePower: requires C3 > 0");
    double sigma = (k - 2.0) / r;
    return boundCaseII(GrowthFunction::power(c3, sigma), delta, c3, t);
}

EnvelopeValue momentEnvelopeExponential(double r, double k, double alpha, double c3,
                                        double delta, double t) {
    if (!(r > 2)) throw std::invalid_argument("momentEnvelopeExponential: requires r > 2");
    if (!(k > r)) throw std::invalid_argument("momentEnvelopeExponential: requires k > r");
    if (!(alpha > 0)) throw std::invalid_argument("momentEnvelopeExponential: requires alpha > 0");
    if (!(c3 > 0)) throw std::invalid_argument("momentEnvelopeExponential: requires C3 > 0");
    double sigma = k / r;   // > 1, keeps the log tail integrable
    EtaProfile profile(GrowthFunction::logPower(c3, sigma), delta);
    EnvelopeValue out;
    out.value = boundCaseII(profile, c3, t);
    out.constantExtensionRegime = profile.at(t).constantExtensionRegime;
    return out;
}

TimeWeightedEnvelope timeWeightedExponentialEnvelope(double r, double k, double alpha,
                                                     double beta, double c3, double t) {
    if (!(r > 2)) throw std::invalid_argument("timeWeightedExponentialEnvelope: requires r > 2");
    if (!(k > 2)) throw std::invalid_argument("timeWeightedExponentialEnvelope: requires k > 2");
    if (!(alpha > 0)) throw std::invalid_argument("timeWeightedExponentialEnvelope: requires alpha > 0");
    double sigma = (k - 2.0) / r;
    if (!(beta > 1.0 / sigma))
        throw std::invalid_argument("timeWeightedExponentialEnvelope: requires beta > r/(k-2)");
    double delta = 1.0 / (beta * sigma);   // in (0,1) by the beta constraint

    TimeWeightedEnvelope env;
    env.delta = delta;
    env.exponentSmallT = beta - 1.0 / sigma;
    env.exponentLargeT = beta + 1.0;
    if (c3 == 0) {
        env.value = 1.0;
        return env;
    }
    if (!(c3 > 0)) throw std::invalid_argument("timeWeightedExponentialEnvelope: requires C3 >= 0");
    double gConst = c3 * std::pow(alpha, -(1.0 + sigma) / sigma);
    GrowthFunction G = GrowthFunction::power(gConst, sigma);
    EtaProfile profile(G, delta);
    env.value = boundCaseIII(profile, c3, t);
    // eta(t) = C4 t^{1/(delta sigma)} for the power family
    double c4 = std::pow(gConst * sigma * delta, beta);
    env.decayCoefficient = std::pow(c4, 1.0 - delta) / (1.0 - delta);
    env.growthCoefficient = c3 * c4 / (beta + 1.0);
    return env;
}

// ---------------- growth-constant derivation ----------------

namespace {

double maxOnInterval(const std::function<double(double)>& f, double lo, double hi) {
    const int kScan = 400;
    double best = -std::numeric_limits<double>::infinity();
    double bestU = lo;
    for (int i = 0; i <= kScan; ++i) {
        double u = lo + (hi - lo) * i / kScan;
        double v = f(u);
        if (v > best) { best = v; bestU = u; }
    }
    double a = std::max(lo, bestU - (hi - lo) / kScan);
    double b = std::min(hi, bestU + (hi - lo) / kScan);
    const double golden = 0.5 * (3.0 - std::sqrt(5.0));
    double x1 = a + golden * (b - a), x2 = b - golden * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < 120 && (b - a) > 1e-13 * (1.0 + std::abs(a)); ++it) {
        if (f1 >= f2) {
            b = x2; x2 = x1; f2 = f1; x1 = a + golden * (b - a); f1 = f(x1);
        } else {
            a = x1; x1 = x2; f1 = f2; x2 = b - golden * (b - a); f2 = f(x2);
        }
    }
    return std::max(best, std::max(f1, f2));
}

/// Smallest c in (0, cHi) with c >= M(c), where M is increasing in c.
std::optional<double> smallestFixedPoint(const std::function<double(double)>& M, double cHi) {
    const int kScan = 400;
    double prevC = 0;
    bool prevFeasible = false;
    for (int i = 1; i <= kScan; ++i) {
        double c = cHi * std::pow(1e-9, 1.0 - double(i) / kScan);
        bool feasible = (c >= M(c));
        if (feasible) {
            double lo = prevFeasible ? prevC : (i == 1 ? 0.0 : prevC);
            double hi = c;
            for (int it = 0; it < 120; ++it) {
                double mid = 0.5 * (lo + hi);
                if (mid <= 0) break;
                if (mid >= M(mid)) hi = mid; else lo = mid;
            }
            return hi;
        }
        prevC = c;
        prevFeasible = feasible;
    }
    return std::nullopt;
}

} // namespace

std::optional<double> growthConstantPower(double c1, double c2, double r, double k) {
    if (!(c2 > 0) || c1 < 0 || !(r >= 2) || !(k > 2))
        throw std::invalid_argument("growthConstantPower: invalid certificate or exponents");
    if (c1 == 0) return c2;
    auto M = [&](double c3) {
        double D = c2 - c3;
        if (r == 2.0) return c1;
        if (D <= 0) return std::numeric_limits<double>::infinity();
        double uStar = std::pow((r - 2.0) * c1 / ((k + r - 2.0) * D), 1.0 / k);
        return c1 * std::pow(uStar, r - 2.0) * k / (k + r - 2.0);
    };
    if (r == 2.0) {
        // valid range is [c1, c2]; tolerate round-off at the c1 = c2 corner
        if (c1 <= c2 * (1.0 + 1e-9)) return std::min(c1, c2);
        return std::nullopt;
    }
    return smallestFixedPoint(M, c2);
}

std::optional<double> growthConstantExponential(double c1, double c2, double alpha,
                                                double r, double k) {
    if (!(c2 > 0) || c1 < 0 || !(r > 2) || !(k > r) || !(alpha > 0))
        throw std::invalid_argument("growthConstantExponential: invalid certificate or exponents");
    double sigma = k / r;
    double cHi = c2 * std::pow(alpha, -sigma);
    const double vMin = std::log(2.0);
    auto M = [&](double c3) {
        // max_u of (C1 - C2 u^k) e^{a u^r} + e^{a u^r} c3 max(ln 2, a u^r)^sigma
        auto bracket = [&](double u) {
            double w = alpha * std::pow(u, r);
            return (c1 - c2 * std::pow(u, k)) + c3 * std::pow(std::max(vMin, w), sigma);
        };
        double uHi = 1.0;
        int guard = 0;
        while (bracket(uHi) > 0 && guard++ < 200) uHi *= 1.3;
        if (alpha * std::pow(uHi, r) > 690.0)
            return std::numeric_limits<double>::infinity();   // not representable
        auto f = [&](double u) { return std::exp(alpha * std::pow(u, r)) * bracket(u); };
        return maxOnInterval(f, 0.0, uHi);
    };
    return smallestFixedPoint(M, cHi);
}

} // namespace fpk
