#include "fpk/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fpk {
namespace num {

namespace {

double simpson(double fa, double fm, double fb, double h) {
    return h / 6.0 * (fa + 4.0 * fm + fb);
}

struct AdaptState {
    const std::function<double(double)>* f;
    double absTol;
    int maxDepth;
};

double adaptStep(const AdaptState& st, double a, double fa, double b, double fb,
                 double m, double fm, double whole, double tol, int depth) {
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = (*st.f)(lm), frm = (*st.f)(rm);
    if (!isFinite(flm) || !isFinite(frm))
        throw QuadratureError("non-finite integrand value inside quadrature interval");
    double left = simpson(fa, flm, fm, m - a);
    double right = simpson(fm, frm, fb, b - m);
    double err = (left + right - whole) / 15.0;
    if (std::abs(err) <= tol || std::abs(left + right) + std::abs(err) < st.absTol)
        return left + right + err;
    if (depth >= st.maxDepth)
        throw QuadratureError("adaptive quadrature did not converge (depth limit)");
    return adaptStep(st, a, fa, m, fm, lm, flm, left, tol * 0.5, depth + 1) +
           adaptStep(st, m, fm, b, fb, rm, frm, right, tol * 0.5, depth + 1);
}

} // namespace

double adaptiveSimpson(const std::function<double(double)>& f, double a, double b,
                       const QuadratureOptions& opt) {
    if (a == b) return 0.0;
    // coarse scale estimate on a fixed panel set so the relative tolerance has
    // a stable reference magnitude
    const int kPanels = 16;
    double h = (b - a) / kPanels;
    double scale = 0.0;
    for (int i = 0; i < kPanels; ++i) {
        double x0 = a + i * h, x1 = x0 + h, xm = x0 + 0.5 * h;
        double f0 = f(x0), f1 = f(x1), fm = f(xm);
        if (!isFinite(f0) || !isFinite(f1) || !isFinite(fm))
            throw QuadratureError("non-finite integrand value in scale pass");
        scale += std::abs(simpson(f0, fm, f1, h));
    }
    double absTol = std::max(opt.relTol * scale, opt.absFloor);

    AdaptState st{&f, opt.absFloor, opt.maxDepth};
    double total = 0.0;
    for (int i = 0; i < kPanels; ++i) {
        double x0 = a + i * h, x1 = x0 + h, xm = x0 + 0.5 * h;
        double f0 = f(x0), f1 = f(x1), fm = f(xm);
        double whole = simpson(f0, fm, f1, h);
        total += adaptStep(st, x0, f0, x1, f1, xm, fm, whole, absTol / kPanels, 0);
    }
    return total;
}

double tailIntegral(const std::function<double(double)>& f, double v0,
                    double relStop, const QuadratureOptions& chunkOpt) {
    const int kMaxChunks = 90;
    double total = 0.0;
    double len = 1.0;
    double lo = v0;
    double prevChunk = std::numeric_limits<double>::infinity();
    int stagnant = 0;
    for (int j = 0; j < kMaxChunks; ++j) {
        double hi = lo + len;
        double chunk = adaptiveSimpson(f, lo, hi, chunkOpt);
        if (!isFinite(chunk) || chunk < 0)
            throw DivergenceError("tail integrand produced an invalid chunk");
        total += chunk;
        if (chunk <= relStop * total || (total == 0.0 && chunk == 0.0))
            return total;
        if (chunk >= prevChunk * 0.9)
            ++stagnant;     // chunks on doubling intervals should shrink for a convergent tail
        prevChunk = chunk;
        lo = hi;
        len *= 2.0;
    }
    throw DivergenceError("tail integral did not converge within the chunk budget");
}

std::vector<double> cumulativeTrapezoid(const std::vector<double>& t,
                                        const std::vector<double>& v) {
    if (t.size() != v.size())
        throw std::invalid_argument("cumulativeTrapezoid: size mismatch");
    std::vector<double> out(t.size(), 0.0);
    KahanSum acc;
    for (size_t i = 1; i < t.size(); ++i) {
        acc.add(0.5 * (v[i] + v[i - 1]) * (t[i] - t[i - 1]));
        out[i] = acc.value();
    }
    return out;
}

double solveMonotone(const std::function<double(double)>& f, double target,
                     double w0, const RootOptions& opt) {
    double f0 = f(w0);
    if (!isFinite(f0)) throw RootFindError("root find: non-finite function value at start");
    if (f0 == target) return w0;

    // determine orientation from a probe step
    double probe = f(w0 + 1.0);
    bool increasing = probe > f0;

    // expand a bracket [lo, hi] with f(lo) and f(hi) straddling the target
    double lo = w0, hi = w0;
    double flo = f0, fhi = f0;
    double stepUp = 1.0, stepDown = 1.0;
    const int kMaxExpand = 200;
    auto above = [&](double fv) { return increasing ? fv > target : fv < target; };
    int n = 0;
    while (!above(fhi)) {
        hi += stepUp;
        stepUp *= 2.0;
        fhi = f(hi);
        if (!isFinite(fhi) || ++n > kMaxExpand)
            throw RootFindError("root find: target outside representable range (upper)");
    }
    n = 0;
    while (above(flo)) {
        lo -= stepDown;
        stepDown *= 2.0;
        flo = f(lo);
        if (!isFinite(flo) || ++n > kMaxExpand)
            throw RootFindError("root find: target outside representable range (lower)");
    }

    // bisection; monotone f makes this unconditionally safe
    double mid = 0.5 * (lo + hi);
    for (int it = 0; it < opt.maxIter; ++it) {
        mid = 0.5 * (lo + hi);
        double fm = f(mid);
        if (!isFinite(fm)) throw RootFindError("root find: non-finite value during bisection");
        bool done = (hi - lo) <= opt.xTol * std::max(1.0, std::abs(mid));
        if (opt.residualRelTol > 0)
            done = done || std::abs(fm - target) <= opt.residualRelTol * std::abs(target);
        if (done) return mid;
        if (above(fm)) hi = mid; else lo = mid;
    }
    return mid;
}

LineFit leastSquaresLine(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("leastSquaresLine: need at least two points");
    const int n = static_cast<int>(x.size());
    double mx = 0, my = 0;
    for (int i = 0; i < n; ++i) { mx += x[i]; my += y[i]; }
    mx /= n; my /= n;
    double sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0) throw std::invalid_argument("leastSquaresLine: degenerate abscissa");
    LineFit fit;
    fit.n = n;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ssr = 0;
    for (int i = 0; i < n; ++i) {
        double e = y[i] - (fit.intercept + fit.slope * x[i]);
        ssr += e * e;
    }
    fit.slopeStderr = (n > 2) ? std::sqrt(ssr / (n - 2) / sxx) : 0.0;
    return fit;
}

MajorantLine chebyshevMajorantLine(const std::vector<double>& x, const std::vector<double>& y,
                                   double slopeMin, double slopeMax) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("chebyshevMajorantLine: need at least two points");
    double xLo = *std::min_element(x.begin(), x.end());
    double xHi = *std::max_element(x.begin(), x.end());
    if (xHi - xLo <= 0)
        throw std::invalid_argument("chebyshevMajorantLine: degenerate abscissa spread");

    // slack width as a function of the slope m: w(m) = max_i(y - m x) - min_i(y - m x),
    // convex piecewise-linear
    auto width = [&](double m) {
        double g = -std::numeric_limits<double>::infinity();
        double h = std::numeric_limits<double>::infinity();
        for (size_t i = 0; i < x.size(); ++i) {
            double v = y[i] - m * x[i];
            g = std::max(g, v);
            h = std::min(h, v);
        }
        return g - h;
    };

    // data-derived slope bracket, widened whenever the optimum lands on an
    // artificial edge rather than a user constraint
    double yLo = *std::min_element(y.begin(), y.end());
    double yHi = *std::max_element(y.begin(), y.end());
    double mScale = (yHi - yLo) / (xHi - xLo) + 1.0;
    const double golden = 0.5 * (3.0 - std::sqrt(5.0));
    double m = 0;
    for (int round = 0; round < 8; ++round) {
        double lo = std::max(slopeMin, -8.0 * mScale);
        double hi = std::min(slopeMax, 8.0 * mScale);
        if (lo > hi) { lo = hi = std::clamp(0.0, slopeMin, slopeMax); }
        double a = lo, b = hi;
        double x1 = a + golden * (b - a), x2 = b - golden * (b - a);
        double w1 = width(x1), w2 = width(x2);
        for (int it = 0; it < 240 && (b - a) > 1e-14 * (1.0 + std::abs(a) + std::abs(b)); ++it) {
            if (w1 <= w2) {
                b = x2; x2 = x1; w2 = w1;
                x1 = a + golden * (b - a); w1 = width(x1);
            } else {
                a = x1; x1 = x2; w1 = w2;
                x2 = b - golden * (b - a); w2 = width(x2);
            }
        }
        m = 0.5 * (a + b);
        bool atArtificialLo = (std::abs(m - lo) < 1e-9 * (1.0 + std::abs(lo))) && lo != slopeMin;
        bool atArtificialHi = (std::abs(m - hi) < 1e-9 * (1.0 + std::abs(hi))) && hi != slopeMax;
        if (!atArtificialLo && !atArtificialHi) break;
        mScale *= 8.0;
    }
    // snap to the constraint boundary when the scan ended next to it
    if (m - slopeMin < 1e-12 * (1.0 + std::abs(slopeMin))) m = slopeMin;
    if (slopeMax - m < 1e-12 * (1.0 + std::abs(slopeMax))) m = slopeMax;

    MajorantLine line;
    line.slope = m;
    double g = -std::numeric_limits<double>::infinity();
    double h = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < x.size(); ++i) {
        double v = y[i] - m * x[i];
        g = std::max(g, v);
        h = std::min(h, v);
    }
    line.intercept = g;       // smallest intercept that still majorizes
    line.maxSlack = g - h;
    line.slopeAtBound = (m == slopeMin || m == slopeMax);
    return line;
}

} // namespace num
} // namespace fpk
