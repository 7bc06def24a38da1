#include "fpk/coefficient_field.hpp"
#include "fpk/numerics.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace fpk {

namespace {

std::string formatPoint(const Vector& x, double t) {
    std::ostringstream os;
    os << "(x = [";
    for (int i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
    os << "], t = " << t << ")";
    return os.str();
}

void requireFinite(double v, const char* what, const Vector& x, double t) {
    if (!num::isFinite(v))
        throw EvaluationError(std::string(what) + " evaluated to a non-finite value at " +
                              formatPoint(x, t), x, t);
}

constexpr double kSymmetryTol = 1e-12;

} // namespace

EvaluationError::EvaluationError(const std::string& what, Vector point, double time)
    : std::runtime_error(what), point_(std::move(point)), time_(time) {}

Region::Region(Vector c, double r, double t0, double t1)
    : center(std::move(c)), radius(r), timeBegin(t0), timeEnd(t1) {
    if (!(radius > 0)) throw std::invalid_argument("Region: radius must be positive");
    if (!(timeBegin < timeEnd)) throw std::invalid_argument("Region: requires timeBegin < timeEnd");
}

CoefficientField::CoefficientField(int dimension, MatrixFn diffusion, VectorFn drift, ScalarFn potential)
    : dim_(dimension), A_(std::move(diffusion)), b_(std::move(drift)), c_(std::move(potential)) {
    if (dim_ < 1) throw std::invalid_argument("CoefficientField: dimension must be positive");
}

CoefficientField CoefficientField::isotropic(int dimension, ScalarFn a, VectorFn drift, ScalarFn potential) {
    auto mat = [dimension, a = std::move(a)](const Vector& x, double t) {
        return Matrix::Identity(dimension, dimension) * a(x, t);
    };
    return CoefficientField(dimension, mat, std::move(drift), std::move(potential));
}

Matrix CoefficientField::diffusion(const Vector& x, double t) const {
    Matrix A = A_(x, t);
    if (A.rows() != dim_ || A.cols() != dim_)
        throw std::invalid_argument("diffusion evaluator returned wrong dimensions");
    double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
    for (int i = 0; i < dim_; ++i)
        for (int j = 0; j < dim_; ++j) {
            requireFinite(A(i, j), "diffusion matrix", x, t);
            if (j > i && std::abs(A(i, j) - A(j, i)) > kSymmetryTol * scale)
                throw EvaluationError("diffusion matrix is not symmetric at " + formatPoint(x, t), x, t);
        }
    return A;
}

Vector CoefficientField::drift(const Vector& x, double t) const {
    Vector b = b_(x, t);
    if (b.size() != dim_) throw std::invalid_argument("drift evaluator returned wrong dimension");
    for (int i = 0; i < dim_; ++i) requireFinite(b[i], "drift", x, t);
    return b;
}

double CoefficientField::potential(const Vector& x, double t) const {
    double c = c_(x, t);
    requireFinite(c, "potential", x, t);
    return c;
}

void CoefficientField::setFiniteDifferenceStep(double h) {
    if (!(h > 0)) throw std::invalid_argument("finite-difference step must be positive");
    fixedStep_ = h;
}

double CoefficientField::fdStep(const Vector& x) const {
    if (fixedStep_ > 0) return fixedStep_;
    return 1e-5 * (1.0 + x.norm());
}

Vector CoefficientField::diffusionRowDivergence(const Vector& x, double t) const {
    if (divA_) {
        Vector d = divA_(x, t);
        if (d.size() != dim_) throw std::invalid_argument("divergence evaluator returned wrong dimension");
        for (int i = 0; i < dim_; ++i) requireFinite(d[i], "diffusion divergence", x, t);
        return d;
    }
    const double h = fdStep(x);
    Vector div = Vector::Zero(dim_);
    for (int j = 0; j < dim_; ++j) {
        Vector xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        Matrix Ap = diffusion(xp, t), Am = diffusion(xm, t);
        for (int i = 0; i < dim_; ++i)
            div[i] += (Ap(i, j) - Am(i, j)) / (2.0 * h);
    }
    return div;
}

Vector divergenceCorrection(const CoefficientField& f, const Vector& x, double t) {
    return f.drift(x, t) - f.diffusionRowDivergence(x, t);
}

std::pair<double, double> symmetricEigenRange(const Matrix& A) {
    const int d = static_cast<int>(A.rows());
    if (d == 1) return {A(0, 0), A(0, 0)};
    if (d <= 3) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(A, Eigen::EigenvaluesOnly);
        const auto& ev = es.eigenvalues();
        return {ev.minCoeff(), ev.maxCoeff()};
    }
    // deterministic Rayleigh-quotient sampling for higher dimensions: axes,
    // diagonal directions and a fixed low-discrepancy set
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    auto probe = [&](Vector xi) {
        xi.normalize();
        double q = xi.dot(A * xi);
        lo = std::min(lo, q);
        hi = std::max(hi, q);
    };
    for (int i = 0; i < d; ++i) probe(Vector::Unit(d, i));
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
            Vector v = Vector::Unit(d, i) + Vector::Unit(d, j);
            probe(v);
            v[j] = -1;
            probe(v);
        }
    double phi = 1.6180339887498949;
    for (int s = 0; s < 64 * d; ++s) {
        Vector v(d);
        for (int i = 0; i < d; ++i)
            v[i] = std::fmod(0.5 + (s + 1) * std::pow(phi, -(i + 1)), 1.0) - 0.5;
        if (v.norm() > 1e-12) probe(v);
    }
    return {lo, hi};
}

double matrixNorm(const Matrix& A, MatrixNormConvention conv) {
    auto [lo, hi] = symmetricEigenRange(A);
    return conv == MatrixNormConvention::LargestEigenvalue ? hi : lo;
}

SpectralBounds ellipticityExtremes(const CoefficientField& f, const Region& region,
                                   int spatialResolution, int timeResolution) {
    if (spatialResolution < 2 || timeResolution < 2)
        throw std::invalid_argument("ellipticityExtremes: need >= 2 samples per axis and in time");
    const int d = f.dimension();
    SpectralBounds out;
    out.lambdaFloor = std::numeric_limits<double>::infinity();
    out.normCeiling = -out.lambdaFloor;

    std::vector<double> offsets(spatialResolution);
    for (int i = 0; i < spatialResolution; ++i)
        offsets[i] = -region.radius + 2.0 * region.radius * i / (spatialResolution - 1);
    std::vector<double> times(timeResolution);
    for (int i = 0; i < timeResolution; ++i)
        times[i] = region.timeBegin + (region.timeEnd - region.timeBegin) * i / (timeResolution - 1);

    std::vector<int> idx(d, 0);
    while (true) {
        Vector x = region.center;
        double r2 = 0;
        for (int a = 0; a < d; ++a) {
            x[a] += offsets[idx[a]];
            r2 += offsets[idx[a]] * offsets[idx[a]];
        }
        if (r2 <= region.radius * region.radius * (1.0 + 1e-14)) {
            for (double t : times) {
                auto [lo, hi] = symmetricEigenRange(f.diffusion(x, t));
                out.lambdaFloor = std::min(out.lambdaFloor, lo);
                out.normCeiling = std::max(out.normCeiling, hi);
                ++out.sampleCount;
            }
        }
        int a = 0;
        for (; a < d; ++a) {
            if (++idx[a] < spatialResolution) break;
            idx[a] = 0;
        }
        if (a == d) break;
    }
    if (out.sampleCount == 0)
        throw std::domain_error("ellipticityExtremes: no sample points inside the region");
    return out;
}

double applyGenerator(const CoefficientField& f, const C2Function& u, const Vector& x, double t) {
    double val = u.value(x, t);
    requireFinite(val, "test function value", x, t);
    Vector g = u.gradient(x, t);
    Matrix H = u.hessian(x, t);
    for (int i = 0; i < f.dimension(); ++i) {
        requireFinite(g[i], "test function gradient", x, t);
        for (int j = 0; j < f.dimension(); ++j) requireFinite(H(i, j), "test function hessian", x, t);
    }
    Matrix A = f.diffusion(x, t);
    double second = (A.cwiseProduct(H)).sum();
    double first = f.drift(x, t).dot(g);
    double zero = f.potential(x, t) * val;
    double out = second + first + zero;
    requireFinite(out, "generator application", x, t);
    return out;
}

double lyapunovDriftPower(const CoefficientField& f, double r, const Vector& x, double t) {
    if (r < 2) throw std::invalid_argument("lyapunovDriftPower: requires r >= 2");
    double n2 = x.squaredNorm();
    if (n2 == 0) throw SingularPointError("lyapunovDriftPower: x = 0 is a singular point");
    Matrix A = f.diffusion(x, t);
    double axx = x.dot(A * x);
    double out = r * A.trace() + r * (r - 2.0) * axx / n2 + r * f.drift(x, t).dot(x) +
                 n2 * f.potential(x, t);
    requireFinite(out, "power drift expression", x, t);
    return out;
}

double lyapunovDriftExponential(const CoefficientField& f, double alpha, double r,
                                const Vector& x, double t) {
    if (r < 2) throw std::invalid_argument("lyapunovDriftExponential: requires r >= 2");
    if (!(alpha > 0)) throw std::invalid_argument("lyapunovDriftExponential: requires alpha > 0");
    double n = x.norm();
    if (n == 0) throw SingularPointError("lyapunovDriftExponential: x = 0 is a singular point");
    Matrix A = f.diffusion(x, t);
    double axx = x.dot(A * x);
    double out = alpha * r * std::pow(n, r - 2.0) * A.trace() +
                 alpha * r * (r - 2.0) * std::pow(n, r - 4.0) * axx +
                 alpha * alpha * r * r * std::pow(n, 2.0 * r - 4.0) * axx +
                 alpha * r * std::pow(n, r - 2.0) * f.drift(x, t).dot(x) +
                 f.potential(x, t);
    requireFinite(out, "exponential drift expression", x, t);
    return out;
}

double lyapunovDriftExponentialWithGradient(const CoefficientField& f, double alpha, double r,
                                            const Vector& x, double t) {
    if (r < 2) throw std::invalid_argument("lyapunovDriftExponentialWithGradient: requires r >= 2");
    if (!(alpha > 0)) throw std::invalid_argument("lyapunovDriftExponentialWithGradient: requires alpha > 0");
    double n = x.norm();
    if (n == 0) throw SingularPointError("lyapunovDriftExponentialWithGradient: x = 0 is a singular point");
    Matrix A = f.diffusion(x, t);
    double axx = x.dot(A * x);
    double n2 = n * n;
    double out = alpha * r * A.trace() + alpha * r * (r - 2.0) * axx / n2 +
                 alpha * r * f.drift(x, t).dot(x) + alpha * n2 * f.potential(x, t) +
                 alpha * alpha * r * r * std::pow(n, r - 2.0) * axx;
    requireFinite(out, "gradient-augmented drift expression", x, t);
    return out;
}

namespace {

std::vector<Vector> sphereDirections(int d, int count) {
    std::vector<Vector> dirs;
    if (d == 1) {
        dirs.push_back(Vector::Constant(1, 1.0));
        dirs.push_back(Vector::Constant(1, -1.0));
        return dirs;
    }
    if (d == 2) {
        for (int i = 0; i < count; ++i) {
            double phi = 2.0 * M_PI * i / count;
            Vector v(2);
            v << std::cos(phi), std::sin(phi);
            dirs.push_back(v);
        }
        return dirs;
    }
    // Fibonacci sphere for d = 3, axis set above that
    if (d == 3) {
        double ga = M_PI * (3.0 - std::sqrt(5.0));
        for (int i = 0; i < count; ++i) {
            double z = 1.0 - 2.0 * (i + 0.5) / count;
            double rad = std::sqrt(std::max(0.0, 1.0 - z * z));
            Vector v(3);
            v << rad * std::cos(ga * i), rad * std::sin(ga * i), z;
            dirs.push_back(v);
        }
        return dirs;
    }
    for (int i = 0; i < d; ++i) {
        dirs.push_back(Vector::Unit(d, i));
        dirs.push_back(-Vector::Unit(d, i));
    }
    return dirs;
}

} // namespace

DissipativityCertificate certifyDissipativity(DissipativityForm form, const CoefficientField& f,
                                              double k, const Region& sampleRegion,
                                              int radialSamples, int timeSamples,
                                              double alpha, double r) {
    if (!(k > 0)) throw std::invalid_argument("certifyDissipativity: requires k > 0");
    if (radialSamples < 2 || timeSamples < 1)
        throw std::invalid_argument("certifyDissipativity: need >= 2 radii and >= 1 time sample");

    const int d = f.dimension();
    const int directionCount = (d == 1) ? 2 : (d == 2 ? 16 : 32);
    auto dirs = sphereDirections(d, directionCount);

    // annuli: geometric radii in [radius/100, radius], never touching x = 0
    std::vector<double> radii(radialSamples);
    const double rLo = sampleRegion.radius * 1e-2;
    for (int i = 0; i < radialSamples; ++i)
        radii[i] = rLo * std::pow(sampleRegion.radius / rLo, double(i) / (radialSamples - 1));
    std::vector<double> times(timeSamples);
    for (int i = 0; i < timeSamples; ++i)
        times[i] = timeSamples == 1 ? sampleRegion.timeBegin
                                    : sampleRegion.timeBegin +
                                          (sampleRegion.timeEnd - sampleRegion.timeBegin) * i / (timeSamples - 1);

    auto lhsAt = [&](const Vector& x, double t) {
        switch (form) {
            case DissipativityForm::Power: return lyapunovDriftPower(f, r, x, t);
            case DissipativityForm::Exponential: return lyapunovDriftExponential(f, alpha, r, x, t);
            case DissipativityForm::ExponentialWithGradient:
                return lyapunovDriftExponentialWithGradient(f, alpha, r, x, t);
        }
        throw std::logic_error("unreachable");
    };

    std::vector<DissipativitySample> samples;
    std::vector<double> us, ls;
    samples.reserve(radii.size() * dirs.size() * times.size());
    for (double rad : radii)
        for (const auto& dir : dirs) {
            Vector x = sampleRegion.center + rad * dir;
            double nx = x.norm();
            if (nx == 0) continue;
            for (double t : times) {
                DissipativitySample s;
                s.x = x;
                s.t = t;
                s.lhs = lhsAt(x, t);
                samples.push_back(s);
                us.push_back(std::pow(nx, k));
                ls.push_back(s.lhs);
            }
        }

    DissipativityCertificate cert;
    cert.k = k;
    cert.sampleCount = static_cast<long>(samples.size());
    cert.radialSamples = radialSamples;
    cert.directionSamples = directionCount;
    cert.timeSamples = timeSamples;

    // one-sided Chebyshev fit of LHS by C1 - C2 u, u = |x|^k; slope -C2 <= 0
    auto line = num::chebyshevMajorantLine(us, ls, -std::numeric_limits<double>::infinity(), 0.0);
    double c1 = std::max(0.0, line.intercept);
    double c2 = -line.slope;
    cert.maxSlack = line.maxSlack;

    // independent re-check of the certificate against every sample; round-off
    // from the fit is absorbed into C1
    double worstGap = -std::numeric_limits<double>::infinity();
    size_t worstIdx = 0;
    for (size_t i = 0; i < samples.size(); ++i) {
        double gap = ls[i] - (c1 - c2 * us[i]);
        if (gap > worstGap) {
            worstGap = gap;
            worstIdx = i;
        }
    }
    if (worstGap > 0) c1 += worstGap * (1.0 + 1e-12);
    cert.worst = samples[worstIdx];

    if (c2 <= 0) {
        cert.certified = false;
        cert.failureReason = "no C2 > 0 admits a majorant C1 - C2|x|^k over the samples";
        // report the sample(s) that pin the slope at zero: the largest-|x|
        // samples whose LHS sits at the fitted level
        for (size_t i = 0; i < samples.size(); ++i)
            if (ls[i] >= c1 - 1e-12 * std::max(1.0, std::abs(c1)))
                cert.violations.push_back(samples[i]);
        cert.c1 = c1;
        cert.c2 = 0;
        return cert;
    }
    cert.certified = true;
    cert.c1 = c1;
    cert.c2 = c2;
    return cert;
}

} // namespace fpk
