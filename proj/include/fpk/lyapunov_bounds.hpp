#pragma once

#include "fpk/numerics.hpp"

#include <functional>
#include <map>
#include <memory>
#include <optional>

namespace fpk {

/// Rates entering d_t V + LV <= K(t) + H(t) V; both must be nonnegative and
/// integrable on the interval of interest.
struct RateFunctions {
    std::function<double(double)> K;
    std::function<double(double)> H;
};

/// Q(t) + R(t) * initialMoment with R = exp(int_0^t H), Q = R int_0^t K/R.
double gronwallEnvelope(const RateFunctions& rates, double t, double initialMoment,
                        double relTol = 1e-10);

/// A positive, continuous, increasing growth function G on [0, inf) whose tail
/// integral int_1^inf ds/(s G(s)) converges. The primitive evaluator works on
/// the log of the argument so that the huge arguments produced by the
/// substitution u = s^{-delta} stay representable.
class GrowthFunction {
public:
    /// G(z) = C z^sigma.
    static GrowthFunction power(double C, double sigma);
    /// G(z) = C (ln z)^sigma for z >= 2, constant-extended as G(2) below.
    static GrowthFunction logPower(double C, double sigma);
    /// From an evaluator of v -> G(e^v).
    static GrowthFunction fromLogArgument(std::function<double(double)> gOfLog);
    /// From a plain evaluator of z -> G(z); overflows of e^v are the caller's
    /// concern (prefer fromLogArgument for rapidly growing G).
    static GrowthFunction fromPlain(std::function<double(double)> g);

    double value(double z) const;
    double valueFromLog(double v) const;

    /// Cauchy-criterion witness for int_1^inf ds/(s G(s)) < inf, computed at
    /// construction.
    bool tailConverges() const { return tailConverges_; }

private:
    GrowthFunction() = default;
    void validate();
    std::function<double(double)> gOfLog_;
    bool tailConverges_ = false;
};

/// F(y) = int_y^inf du/(u G(u)), the tail used to invert the eta equation.
double tailIntegral(const GrowthFunction& G, double y);
/// Same with w = ln y; safe for arguments whose exponential overflows.
double tailIntegralLog(const GrowthFunction& G, double w);

struct EtaResult {
    double eta = 0;        // may underflow to 0; logEta stays exact
    double logEta = 0;
    double logY = 0;       // ln(eta^{-delta})
    bool constantExtensionRegime = false;   // eta^{-delta} < 2
};

/// Solve t = int_0^eta ds/(s G(s^{-delta})) for eta via the substitution
/// u = s^{-delta}, i.e. t = F(eta^{-delta})/delta, with a monotone bracketing
/// bisection on ln(eta^{-delta}).
EtaResult solveEtaDetailed(const GrowthFunction& G, double delta, double t);
double solveEta(const GrowthFunction& G, double delta, double t);

/// Solved eta(t) curve with caching and the quadrature int_0^t eta(s) ds.
class EtaProfile {
public:
    EtaProfile(GrowthFunction G, double delta);
    double delta() const { return delta_; }
    const GrowthFunction& growth() const { return G_; }
    EtaResult at(double t) const;
    double eta(double t) const { return at(t).eta; }
    double etaIntegral(double t) const;              // int_0^t eta(s) ds
    double etaIntegralRatio(double t) const;         // int_0^t eta(s)/eta(t) ds
private:
    GrowthFunction G_;
    double delta_;
    mutable std::map<double, EtaResult> cache_;
    mutable std::map<double, double> ratioCache_;
};

/// (i)  LW <= C + CW        =>  bound exp(Ct)(1 + m0).
double boundCaseI(double C, double t, double initialMoment);
/// (ii) LW <= C - W G(W)    =>  1/((1-delta) eta^delta) + (C/eta) int_0^t eta.
double boundCaseII(const GrowthFunction& G, double delta, double C, double t);
double boundCaseII(const EtaProfile& profile, double C, double t);
/// (iii) LW + eta |sqrt(A) grad W|^2 <= C - W G(W)
///       =>  exp((1-delta)^{-1} eta^{1-delta} + C int_0^t eta).
double boundCaseIII(const GrowthFunction& G, double delta, double C, double t);
double boundCaseIII(const EtaProfile& profile, double C, double t);

/// Moment envelope for int |x|^r dmu_t with G(z) = C3 z^sigma, sigma = (k-2)/r.
/// Decays like t^{-r/(k-2)} as t -> 0.
double momentEnvelopePower(double r, double k, double c3, double delta, double t);

struct EnvelopeValue {
    double value = 0;
    bool constantExtensionRegime = false;
};

/// Envelope for int exp(alpha |x|^r) dmu_t with the log growth family,
/// sigma = k/r > 1; behaves like gamma1 exp(gamma2 t^{-r/(k-r)}).
EnvelopeValue momentEnvelopeExponential(double r, double k, double alpha, double c3,
                                        double delta, double t);

struct TimeWeightedEnvelope {
    double value = 0;
    double exponentSmallT = 0;    // beta - r/(k-2)
    double exponentLargeT = 0;    // beta + 1
    double decayCoefficient = 0;  // weight of t^{beta - r/(k-2)} inside the exponential
    double growthCoefficient = 0; // weight of t^{beta + 1}
    double delta = 0;
};

/// Envelope for int exp(alpha t^beta |x|^r) dmu_t, beta > r/(k-2), built on
/// case (iii) with G(z) = C3 alpha^{-(1+sigma)/sigma} z^sigma and
/// delta = r/(beta (k-2)).
TimeWeightedEnvelope timeWeightedExponentialEnvelope(double r, double k, double alpha,
                                                     double beta, double c3, double t);

/// Single growth constant C3 turning a certificate LHS <= C1 - C2|x|^k into
/// L W <= C3 - W G(W): the smallest fixed point of
///   C3 >= max_x [ lhs-bound(x) W(x) + W(x) G(W(x)) ].
/// Returns nullopt when no such constant exists for the given pair.
std::optional<double> growthConstantPower(double c1, double c2, double r, double k);
std::optional<double> growthConstantExponential(double c1, double c2, double alpha,
                                                double r, double k);

} // namespace fpk
