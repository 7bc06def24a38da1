#pragma once

#include "fpk/coefficient_field.hpp"
#include "fpk/fpk_solver.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fpk {

/// Positive C^{2,1} weight with derivative evaluators.
struct PhiWeight {
    std::function<double(const Vector&, double)> value;
    std::function<Vector(const Vector&, double)> gradient;
    std::function<Matrix(const Vector&, double)> hessian;
    std::function<double(const Vector&, double)> timeDerivative;   // null => 0
};

struct PhiTransformResult {
    double cTilde = 0;
    Vector bTilde;
};

/// Transformed coefficients of the conjugation by Phi:
///   c~ = c + (d_t Phi + div(A grad Phi) + B . grad Phi) / Phi
///   B~ = B + Phi^{-1} A grad Phi
/// div(A grad Phi) is evaluated as (row divergence of A) . grad Phi plus the
/// Hessian contraction, honouring the field's divergence mode.
PhiTransformResult phiTransform(const CoefficientField& field, const PhiWeight& phi,
                                const Vector& x, double t);

/// Coefficient field under which the weighted density Phi * rho evolves in the
/// same divergence form. Its conservative drift carries one more A grad Phi/Phi
/// term than B~ above (chain rule of div(Phi F)); with B~ alone the weighted
/// density is not a solution, which the OU stationary state makes visible.
CoefficientField conjugatedField(const CoefficientField& field, const PhiWeight& phi);

enum class EllipticityWindow { FixedRadius, ParabolicSqrtT };

/// Sampled infimum of the smallest eigenvalue of A over U(x, radius) x
/// [theta t, t], radius = kappa or sqrt(t). The sampling density doubles until
/// the infimum moves by less than 0.5%.
double localEllipticity(const CoefficientField& field, const Vector& x, double t,
                        EllipticityWindow window, double kappa, double theta);

enum class TemporalForm { Blowup, TimeWeighted };

/// Parametric density majorant. Exponents are fixed inputs; the constants
/// (C4 and C5, or C4 and p) are fitted from solver snapshots.
struct EnvelopeSpec {
    TemporalForm form = TemporalForm::Blowup;
    double spatialRate = 0;     // alpha'
    double spatialPower = 0;    // r
    double blowupExponent = 0;  // q (Blowup)
    double beta = 0;            // TimeWeighted

    bool fitted = false;
    double logC4 = 0;
    double c5 = 0;              // Blowup temporal constant
    double p = 0;               // TimeWeighted temporal power
    double maxViolationGap = 0; // achieved one-sided fit slack (log scale)

    static EnvelopeSpec blowup(double alphaPrime, double r, double q);
    static EnvelopeSpec timeWeighted(double alphaPrime, double r, double beta);

    double evaluateLog(const Vector& x, double t) const;
};

struct FitOptions {
    double densityFloor = 1e-250;
    double coreFraction = 1e-12;   // keep cells with rho > coreFraction * peak
    int boundaryMargin = 2;        // cells dropped nearest each boundary
};

struct FitResult {
    bool success = false;
    EnvelopeSpec spec;
    std::string failureReason;
    double worstT = 0;      // witness of the binding (or violating) snapshot
    Vector worstX;
    /// per-snapshot fitted channel: (t_j, max over core of log rho + alpha'|x|^r)
    std::vector<std::pair<double, double>> channel;
};

/// One-sided Chebyshev fit of the free envelope constants on log rho;
/// exponents stay fixed.
FitResult fitEnvelopeConstants(const std::vector<DensityField>& snapshots, EnvelopeSpec spec,
                               const FitOptions& opt = FitOptions());

struct EnvelopeWitness {
    double t = 0;
    Vector x;
    double density = 0;
    double envelope = 0;
};

struct RegressionRecord {
    std::string channel;
    double exponent = 0;
    double stderr_ = 0;
    double windowLo = 0;
    double windowHi = 0;
};

struct VerificationReport {
    EnvelopeSpec envelope;
    double maxRatio = 0;
    EnvelopeWitness witness;
    bool pass = false;
    double slack = 0;
    std::vector<RegressionRecord> regressions;
    std::string configDigest;
    std::string preset;
    std::string gridDescription;
};

/// Ratio test rho/envelope over the core region of every snapshot.
VerificationReport checkEnvelope(const std::vector<DensityField>& snapshots,
                                 const EnvelopeSpec& fitted, double slack,
                                 const FitOptions& opt = FitOptions());

std::string toJson(const VerificationReport& report);

enum class DecayModel { Power, LogLog };

struct ExponentEstimate {
    double exponent = 0;   // magnitude of the fitted decay power
    double stderr_ = 0;
    double windowLo = 0;
    double windowHi = 0;
    int points = 0;
};

/// OLS on the linearized model: Power fits log v ~ -p log t, LogLog fits
/// log log v ~ -q log t.
ExponentEstimate decayExponentEstimate(const std::vector<std::pair<double, double>>& series,
                                       DecayModel model);

/// The local upper-bound shape (constant C = 1):
///   (1 + 1/lambda)^gamma [t^{-(d+2)/2}] int int (1 + |A|^g + [t^2g]|c+|^g +
///   [t^2g]|sqrt(A^-1)B|^{2g}) rho dy dtau
/// over U(x, kappa or sqrt t) x [theta t, t], integrated from the snapshots.
double pointwiseBoundRhs(const CoefficientField& field, const std::vector<DensityField>& snapshots,
                         const Vector& x, double t, double gamma, double theta,
                         EllipticityWindow window, double kappa,
                         MatrixNormConvention normConvention = MatrixNormConvention::LargestEigenvalue);

} // namespace fpk
