#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fpk {
namespace num {

/// Thrown when an adaptive quadrature fails to reach its tolerance budget.
class QuadratureError : public std::runtime_error {
public:
    explicit QuadratureError(const std::string& what) : std::runtime_error(what) {}
};

/// Thrown when a tail integral shows no sign of converging.
class DivergenceError : public std::runtime_error {
public:
    explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

class RootFindError : public std::runtime_error {
public:
    explicit RootFindError(const std::string& what) : std::runtime_error(what) {}
};

inline bool isFinite(double x) { return x == x && x - x == 0; }

struct QuadratureOptions {
    double relTol = 1e-10;
    double absFloor = 1e-300;   // integrals below this magnitude count as converged
    int maxDepth = 60;
};

/// Adaptive Simpson rule with Richardson error estimate on [a, b].
/// The tolerance is relative to a coarse whole-interval estimate.
double adaptiveSimpson(const std::function<double(double)>& f, double a, double b,
                       const QuadratureOptions& opt = QuadratureOptions());

/// Integral of f over [v0, +inf) using chunks of doubling length; stops once a
/// chunk contributes less than relStop of the accumulated value. Throws
/// DivergenceError when the chunk sequence does not decay.
double tailIntegral(const std::function<double(double)>& f, double v0,
                    double relStop = 1e-12,
                    const QuadratureOptions& chunkOpt = QuadratureOptions{1e-12, 1e-300, 60});

/// Cumulative trapezoid of samples (t_i, v_i); result[i] = integral up to t_i.
std::vector<double> cumulativeTrapezoid(const std::vector<double>& t,
                                        const std::vector<double>& v);

/// Compensated summation.
struct KahanSum {
    double sum = 0.0;
    double carry = 0.0;
    void add(double x) {
        double y = x - carry;
        double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    double value() const { return sum; }
};

struct RootOptions {
    int maxIter = 200;
    double xTol = 1e-12;        // absolute tolerance on the abscissa
    double residualRelTol = 0;  // optional: stop when |f - target| <= tol*|target|
};

/// Solve f(w) = target for a strictly monotone f by bracket expansion from w0
/// (additive steps of doubling size) followed by bisection.
double solveMonotone(const std::function<double(double)>& f, double target,
                     double w0, const RootOptions& opt = RootOptions());

struct LineFit {
    double slope = 0;
    double intercept = 0;
    double slopeStderr = 0;
    int n = 0;
};

/// Ordinary least squares line through (x_i, y_i).
LineFit leastSquaresLine(const std::vector<double>& x, const std::vector<double>& y);

struct MajorantLine {
    double intercept = 0;
    double slope = 0;
    double maxSlack = 0;   // largest gap line - data over the sample set
    bool slopeAtBound = false;
};

/// One-sided Chebyshev fit: the line c + m*x majorizing every (x_i, y_i) that
/// minimizes the maximum slack, with m restricted to [slopeMin, slopeMax].
/// The slack profile is convex piecewise-linear in m, so a golden-section
/// scan over a data-derived bracket finds the optimum.
MajorantLine chebyshevMajorantLine(const std::vector<double>& x, const std::vector<double>& y,
                                   double slopeMin, double slopeMax);

} // namespace num
} // namespace fpk
