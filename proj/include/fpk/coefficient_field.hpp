#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fpk {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised when a coefficient or test-function evaluator returns NaN/Inf,
/// carrying the offending space-time point.
class EvaluationError : public std::runtime_error {
public:
    EvaluationError(const std::string& what, Vector point, double time);
    const Vector& point() const { return point_; }
    double time() const { return time_; }
private:
    Vector point_;
    double time_;
};

class SingularPointError : public std::domain_error {
public:
    explicit SingularPointError(const std::string& what) : std::domain_error(what) {}
};

/// Space-time sampling window: ball U(center, radius) x [timeBegin, timeEnd].
struct Region {
    Vector center;
    double radius;
    double timeBegin;
    double timeEnd;
    Region(Vector c, double r, double t0, double t1);
};

/// inf/sup of the eigenvalue range of the diffusion matrix over a sampled region.
struct SpectralBounds {
    double lambdaFloor = 0;    // inf of the smallest eigenvalue
    double normCeiling = 0;    // sup of the largest eigenvalue
    long sampleCount = 0;
};

/// The matrix "norm" entering the local estimates. LargestEigenvalue is the
/// operator norm; SmallestEigenvalue is the literal displayed definition,
/// kept behind this switch because the two disagree.
enum class MatrixNormConvention { LargestEigenvalue, SmallestEigenvalue };

/// The coefficient triple (A, b, c) of the operator
///   Lu = a^{ij} d_i d_j u + b^i d_i u + c u
/// together with the derived row divergence of A needed for the divergence
/// form. Evaluators must be pure; all evaluation goes through checked
/// accessors that reject NaN/Inf and asymmetric A.
class CoefficientField {
public:
    using MatrixFn = std::function<Matrix(const Vector&, double)>;
    using VectorFn = std::function<Vector(const Vector&, double)>;
    using ScalarFn = std::function<double(const Vector&, double)>;

    CoefficientField(int dimension, MatrixFn diffusion, VectorFn drift, ScalarFn potential);

    /// Convenience for isotropic diffusion a(x,t) * I.
    static CoefficientField isotropic(int dimension, ScalarFn a, VectorFn drift, ScalarFn potential);

    int dimension() const { return dim_; }

    Matrix diffusion(const Vector& x, double t) const;
    Vector drift(const Vector& x, double t) const;
    double potential(const Vector& x, double t) const;

    /// Rowwise divergence (d/dx_j a^{ij})_i, analytic when provided, otherwise
    /// centered differences with step fdStep(x).
    Vector diffusionRowDivergence(const Vector& x, double t) const;

    void setAnalyticDiffusionDivergence(VectorFn divA) { divA_ = std::move(divA); }
    bool hasAnalyticDivergence() const { return static_cast<bool>(divA_); }

    /// Fixed finite-difference step; by default the scale-aware 1e-5*(1+|x|).
    void setFiniteDifferenceStep(double h);
    double fdStep(const Vector& x) const;

    void setTimeIndependent(bool v) { timeIndependent_ = v; }
    bool timeIndependent() const { return timeIndependent_; }

private:
    int dim_;
    MatrixFn A_;
    VectorFn b_;
    ScalarFn c_;
    VectorFn divA_;
    double fixedStep_ = 0;     // 0 => scale-aware default
    bool timeIndependent_ = false;
};

/// B(x,t) = b(x,t) - rowwise divergence of A: the drift of the divergence form.
Vector divergenceCorrection(const CoefficientField& f, const Vector& x, double t);

/// Sampled eigenvalue extremes over a region. `spatialResolution` points per
/// axis (inclusive endpoints) restricted to the ball, `timeResolution` time
/// samples; refining n -> 2n-1 nests the sample set, which makes the floor
/// non-increasing and the ceiling non-decreasing under refinement.
SpectralBounds ellipticityExtremes(const CoefficientField& f, const Region& region,
                                   int spatialResolution, int timeResolution);

/// Eigenvalue range of one symmetric matrix (closed solver for d<=3, sampled
/// Rayleigh quotients on a deterministic sphere mesh above that).
std::pair<double, double> symmetricEigenRange(const Matrix& A);

double matrixNorm(const Matrix& A, MatrixNormConvention conv = MatrixNormConvention::LargestEigenvalue);

/// A scalar function with the derivative evaluators the generator needs.
struct C2Function {
    std::function<double(const Vector&, double)> value;
    std::function<Vector(const Vector&, double)> gradient;
    std::function<Matrix(const Vector&, double)> hessian;
    std::function<double(const Vector&, double)> timeDerivative;  // optional, null => 0
};

/// Lu = a^{ij} d_i d_j u + b^i d_i u + c u as a contraction of the supplied derivatives.
double applyGenerator(const CoefficientField& f, const C2Function& u, const Vector& x, double t);

/// r trace A + r(r-2)|x|^{-2}(Ax,x) + r(b,x) + |x|^2 c.
/// Satisfies L|x|^r = |x|^{r-2} * lyapunovDriftPower.
double lyapunovDriftPower(const CoefficientField& f, double r, const Vector& x, double t);

/// a r|x|^{r-2} trace A + a r(r-2)|x|^{r-4}(Ax,x) + a^2 r^2|x|^{2r-4}(Ax,x)
///   + a r|x|^{r-2}(b,x) + c.
/// Satisfies L exp(a|x|^r) = exp(a|x|^r) * lyapunovDriftExponential.
double lyapunovDriftExponential(const CoefficientField& f, double alpha, double r,
                                const Vector& x, double t);

/// a r trace A + a r(r-2)|x|^{-2}(Ax,x) + a r(b,x) + a|x|^2 c
///   + a^2 r^2 |x|^{r-2}(Ax,x): the drift expression whose |x|^{r-2} multiple
/// is a L|x|^r + |sqrt(A) grad(a|x|^r)|^2.
double lyapunovDriftExponentialWithGradient(const CoefficientField& f, double alpha, double r,
                                            const Vector& x, double t);

enum class DissipativityForm { Power, Exponential, ExponentialWithGradient };

struct DissipativitySample {
    Vector x;
    double t = 0;
    double lhs = 0;
};

/// Outcome of certifying LHS(x,t) <= C1 - C2|x|^k over a sample set. A failed
/// certificate is a result, not an exception.
struct DissipativityCertificate {
    bool certified = false;
    double c1 = 0;
    double c2 = 0;
    double k = 0;
    double maxSlack = 0;              // worst gap between the majorant and the samples
    DissipativitySample worst;        // sample where the certificate binds
    long sampleCount = 0;
    int radialSamples = 0;
    int directionSamples = 0;
    int timeSamples = 0;
    std::string failureReason;
    std::vector<DissipativitySample> violations;
};

/// Fit the tightest sample-set certificate LHS <= C1 - C2|x|^k (one-sided
/// Chebyshev fit in u = |x|^k). The certificate holds over the sampled set
/// only; samples are drawn on annuli around the origin inside the region,
/// excluding x = 0. Fails (certified = false) when no C2 > 0 works.
DissipativityCertificate certifyDissipativity(DissipativityForm form, const CoefficientField& f,
                                              double k, const Region& sampleRegion,
                                              int radialSamples, int timeSamples,
                                              double alpha = 1.0, double r = 2.0);

} // namespace fpk
