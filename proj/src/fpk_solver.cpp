#include "fpk/fpk_solver.hpp"
#include "fpk/csvio.hpp"
#include "fpk/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <ostream>
#include <istream>
#include <sstream>

namespace fpk {

namespace {

/// B(z) = z/(e^z - 1), the exponential-fitting weight.
double bernoulli(double z) {
    if (std::abs(z) < 1e-5) return 1.0 - 0.5 * z + z * z / 12.0;
    double em = std::expm1(z);
    if (std::isinf(em)) return 0.0;   // huge positive z: B ~ z e^{-z}
    return z / em;
}

struct AxisFaces {
    std::vector<long> left, right;
    std::vector<double> cLeft, cRight;   // outflow rates of the left/right cell
    std::vector<long> bndCell;           // absorbing boundary losses
    std::vector<double> bndCoef;
};

struct Frozen {
    int dim = 1;
    std::array<AxisFaces, 2> axes;
    std::vector<double> c;               // potential at cell centers
    double maxOutflow = 0;
    double maxFaceA = 0;
    double maxFaceB = 0;
};

double diagonalEntry(const CoefficientField& f, const Vector& x, double t, int axis) {
    Matrix A = f.diffusion(x, t);
    double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
    for (int i = 0; i < A.rows(); ++i)
        for (int j = 0; j < A.cols(); ++j)
            if (i != j && std::abs(A(i, j)) > 1e-12 * scale)
                throw std::invalid_argument(
                    "fpk solver: two-point fluxes require diagonal diffusion on the grid");
    double a = A(axis, axis);
    if (!(a > 0))
        throw std::invalid_argument("fpk solver: diffusion must be positive on the grid");
    return a;
}

Frozen freezeCoefficients(const Grid& g, const CoefficientField& f, double t,
                          const SolverConfig& cfg) {
    Frozen fr;
    fr.dim = g.dimension;
    const long n = g.cellCount();
    std::vector<double> outflow(n, 0.0);

    auto addFace = [&](int axis, const Vector& x, long L, long R) {
        double h = g.cellWidth(axis);
        double a = diagonalEntry(f, x, t, axis);
        double b = divergenceCorrection(f, x, t)[axis];
        double cl, cr;
        if (cfg.scheme == FluxScheme::ExponentialFitting) {
            double P = b * h / a;
            cl = a / (h * h) * bernoulli(-P);
            cr = a / (h * h) * bernoulli(P);
        } else {
            cl = a / (h * h) + std::max(b, 0.0) / h;
            cr = a / (h * h) + std::max(-b, 0.0) / h;
        }
        auto& ax = fr.axes[axis];
        ax.left.push_back(L);
        ax.right.push_back(R);
        ax.cLeft.push_back(cl);
        ax.cRight.push_back(cr);
        outflow[L] += cl;
        outflow[R] += cr;
        fr.maxFaceA = std::max(fr.maxFaceA, a);
        fr.maxFaceB = std::max(fr.maxFaceB, std::abs(b));
    };

    auto addBoundary = [&](int axis, const Vector& x, long cell, bool lower) {
        double h = g.cellWidth(axis);
        double a = diagonalEntry(f, x, t, axis);
        double b = divergenceCorrection(f, x, t)[axis];
        double coef;
        if (cfg.scheme == FluxScheme::ExponentialFitting) {
            double P = b * h / a;
            coef = a / (h * h) * bernoulli(lower ? P : -P);
        } else {
            coef = a / (h * h) + (lower ? std::max(-b, 0.0) : std::max(b, 0.0)) / h;
        }
        auto& ax = fr.axes[axis];
        ax.bndCell.push_back(cell);
        ax.bndCoef.push_back(coef);
        outflow[cell] += coef;
    };

    const int N0 = g.cells[0];
    const int N1 = g.dimension == 2 ? g.cells[1] : 1;
    Vector x(g.dimension);

    // axis 0 interior faces
    for (int i0 = 0; i0 + 1 < N0; ++i0)
        for (int i1 = 0; i1 < N1; ++i1) {
            x[0] = -g.extent[0] + (i0 + 1) * g.cellWidth(0);
            if (g.dimension == 2) x[1] = g.center(1, i1);
            addFace(0, x, static_cast<long>(i0) * N1 + i1, static_cast<long>(i0 + 1) * N1 + i1);
        }
    // axis 1 interior faces
    if (g.dimension == 2)
        for (int i0 = 0; i0 < N0; ++i0)
            for (int i1 = 0; i1 + 1 < N1; ++i1) {
                x[0] = g.center(0, i0);
                x[1] = -g.extent[1] + (i1 + 1) * g.cellWidth(1);
                addFace(1, x, static_cast<long>(i0) * N1 + i1, static_cast<long>(i0) * N1 + i1 + 1);
            }

    if (cfg.boundary == BoundaryCondition::Absorbing) {
        for (int i1 = 0; i1 < N1; ++i1) {
            if (g.dimension == 2) x[1] = g.center(1, i1);
            x[0] = -g.extent[0];
            addBoundary(0, x, static_cast<long>(0) * N1 + i1, true);
            x[0] = g.extent[0];
            addBoundary(0, x, static_cast<long>(N0 - 1) * N1 + i1, false);
        }
        if (g.dimension == 2)
            for (int i0 = 0; i0 < N0; ++i0) {
                x[0] = g.center(0, i0);
                x[1] = -g.extent[1];
                addBoundary(1, x, static_cast<long>(i0) * N1 + 0, true);
                x[1] = g.extent[1];
                addBoundary(1, x, static_cast<long>(i0) * N1 + N1 - 1, false);
            }
    }

    fr.c.resize(n);
    for (long i = 0; i < n; ++i) fr.c[i] = f.potential(g.cellCenter(i), t);
    fr.maxOutflow = outflow.empty() ? 0.0 : *std::max_element(outflow.begin(), outflow.end());
    return fr;
}

double stableDt(const Frozen& fr, const Grid& g) {
    double dt = std::numeric_limits<double>::infinity();
    if (fr.maxOutflow > 0) dt = 1.0 / fr.maxOutflow;
    // the design formula acts as an additional cap
    for (int a = 0; a < g.dimension; ++a) {
        double h = g.cellWidth(a);
        if (fr.maxFaceA > 0) dt = std::min(dt, h * h / (2.0 * g.dimension * fr.maxFaceA));
        if (fr.maxFaceB > 0) dt = std::min(dt, h / fr.maxFaceB);
    }
    return dt;
}

std::vector<double> reactionHalfFactors(const Frozen& fr, double dt, ReactionTreatment rt) {
    std::vector<double> fac(fr.c.size());
    for (size_t i = 0; i < fr.c.size(); ++i) {
        if (rt == ReactionTreatment::ExactExponential) {
            fac[i] = std::exp(0.5 * dt * fr.c[i]);
        } else {
            double v = 1.0 + 0.5 * dt * fr.c[i];
            if (v < 0)
                throw CflViolation("explicit reaction treatment needs |c| dt/2 <= 1");
            fac[i] = v;
        }
        if (!num::isFinite(fac[i]))
            throw NumericalFailure("reaction factor overflowed");
    }
    return fac;
}

void applyTransport(const Frozen& fr, double dt, const std::vector<double>& in,
                    std::vector<double>& out, double cellVol, double& leak) {
    out = in;
    for (int a = 0; a < fr.dim; ++a) {
        const auto& ax = fr.axes[a];
        for (size_t k = 0; k < ax.left.size(); ++k) {
            double fromLeft = dt * ax.cLeft[k] * in[ax.left[k]];
            double fromRight = dt * ax.cRight[k] * in[ax.right[k]];
            out[ax.left[k]] += fromRight - fromLeft;
            out[ax.right[k]] += fromLeft - fromRight;
        }
        for (size_t k = 0; k < ax.bndCell.size(); ++k) {
            double lost = dt * ax.bndCoef[k] * in[ax.bndCell[k]];
            out[ax.bndCell[k]] -= lost;
            leak += lost * cellVol;
        }
    }
}

void checkState(const std::vector<double>& v, double peak) {
    double floor = -1e-13 * std::max(peak, 1e-30);
    for (double x : v) {
        if (!num::isFinite(x)) throw NumericalFailure("solver produced a non-finite density");
        if (x < floor) throw NumericalFailure("solver produced a negative density beyond tolerance");
    }
}

double massOf(const std::vector<double>& v, double cellVol) {
    num::KahanSum s;
    for (double x : v) s.add(x);
    return s.value() * cellVol;
}

double cIntegralOf(const std::vector<double>& v, const std::vector<double>& c, double cellVol) {
    num::KahanSum s;
    for (size_t i = 0; i < v.size(); ++i) s.add(c[i] * v[i]);
    return s.value() * cellVol;
}

} // namespace

Grid Grid::make1d(double R, int N) {
    if (!(R > 0) || N < 8) throw std::invalid_argument("Grid: requires R > 0 and N >= 8");
    Grid g;
    g.dimension = 1;
    g.extent = {R, R};
    g.cells = {N, 1};
    return g;
}

Grid Grid::make2d(double R0, int N0, double R1, int N1) {
    if (!(R0 > 0) || !(R1 > 0) || N0 < 8 || N1 < 8)
        throw std::invalid_argument("Grid: requires R > 0 and N >= 8 per axis");
    Grid g;
    g.dimension = 2;
    g.extent = {R0, R1};
    g.cells = {N0, N1};
    return g;
}

double Grid::cellVolume() const {
    double v = cellWidth(0);
    if (dimension == 2) v *= cellWidth(1);
    return v;
}

Vector Grid::cellCenter(long flat) const {
    Vector x(dimension);
    if (dimension == 1) {
        x[0] = center(0, static_cast<int>(flat));
    } else {
        x[0] = center(0, static_cast<int>(flat / cells[1]));
        x[1] = center(1, static_cast<int>(flat % cells[1]));
    }
    return x;
}

bool Grid::sameLayout(const Grid& o) const {
    return dimension == o.dimension && cells == o.cells && extent == o.extent;
}

double DensityField::mass() const { return massOf(values, grid.cellVolume()); }

double DensityField::peak() const {
    return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
}

InitialMeasure InitialMeasure::gaussian(Vector mean, Matrix covariance) {
    InitialMeasure m;
    m.kind = Kind::Gaussian;
    m.mean = std::move(mean);
    m.covariance = std::move(covariance);
    return m;
}

InitialMeasure InitialMeasure::pointMass(Vector center, double width) {
    InitialMeasure m;
    m.kind = Kind::SmoothedPointMass;
    m.center = std::move(center);
    m.width = width;
    return m;
}

InitialMeasure InitialMeasure::fromFunction(std::function<double(const Vector&)> f) {
    InitialMeasure m;
    m.kind = Kind::GridFunction;
    m.gridFunction = std::move(f);
    return m;
}

DensityField projectInitialMeasure(const InitialMeasure& spec, const Grid& grid) {
    DensityField out;
    out.grid = grid;
    out.time = 0.0;
    const long n = grid.cellCount();
    out.values.resize(n);

    if (spec.kind == InitialMeasure::Kind::GridFunction) {
        for (long i = 0; i < n; ++i) {
            double v = spec.gridFunction(grid.cellCenter(i));
            if (!num::isFinite(v) || v < 0)
                throw std::domain_error("grid-function initial data must be finite and nonnegative");
            out.values[i] = v;
        }
        out.rawMass = out.mass();
        return out;
    }

    Vector mean;
    Matrix cov;
    if (spec.kind == InitialMeasure::Kind::Gaussian) {
        mean = spec.mean;
        cov = spec.covariance;
    } else {
        mean = spec.center;
        double w = spec.width;
        if (w <= 0) w = 2.0 * std::max(grid.cellWidth(0),
                                       grid.dimension == 2 ? grid.cellWidth(1) : 0.0);
        cov = w * w * Matrix::Identity(grid.dimension, grid.dimension);
    }
    if (mean.size() != grid.dimension || cov.rows() != grid.dimension)
        throw std::invalid_argument("initial measure dimension mismatch");
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("initial covariance must be positive definite");
    Matrix prec = llt.solve(Matrix::Identity(grid.dimension, grid.dimension));
    double det = cov.determinant();
    double norm = std::pow(2.0 * M_PI, -0.5 * grid.dimension) / std::sqrt(det);
    for (long i = 0; i < n; ++i) {
        Vector d = grid.cellCenter(i) - mean;
        out.values[i] = norm * std::exp(-0.5 * d.dot(prec * d));
    }
    out.rawMass = out.mass();
    if (out.rawMass < 0.5)
        throw std::domain_error("initial measure mass is essentially outside the grid");
    out.truncationWarning = out.rawMass < 1.0 - 1e-6;
    double scale = 1.0 / out.rawMass;
    for (double& v : out.values) v *= scale;
    out.renormalized = true;
    return out;
}

namespace {

struct Stepper {
    const Grid& grid;
    const CoefficientField& field;
    const SolverConfig& cfg;
    Frozen frozen;
    std::vector<double> halfFactors;
    double dt = 0;
    double cellVol = 0;

    Stepper(const Grid& g, const CoefficientField& f, const SolverConfig& c, double t0)
        : grid(g), field(f), cfg(c) {
        if (!(cfg.cfl > 0.0 && cfg.cfl <= 1.0))
            throw std::invalid_argument("SolverConfig: CFL number must lie in (0, 1]");
        cellVol = grid.cellVolume();
        frozen = freezeCoefficients(grid, field, t0, cfg);
    }

    double admissibleDt() const { return stableDt(frozen, grid); }

    void fixDt(double wanted) {
        double cap = admissibleDt();
        if (cfg.dt > 0) {
            if (wanted > cap * (1.0 + 1e-12))
                throw CflViolation("requested dt violates the stability rule of the scheme");
            dt = wanted;
        } else {
            dt = std::min(wanted, cfg.cfl * cap);
        }
        halfFactors = reactionHalfFactors(frozen, dt, cfg.reaction);
    }

    void refresh(double t) {  // time-dependent coefficients
        frozen = freezeCoefficients(grid, field, t, cfg);
        if (dt > admissibleDt() * (1.0 + 1e-12))
            throw CflViolation("time-dependent coefficients tightened the stability bound below dt");
        halfFactors = reactionHalfFactors(frozen, dt, cfg.reaction);
    }

    // one Strang step in place; returns leaked mass
    double advance(std::vector<double>& v, std::vector<double>& scratch) const {
        for (size_t i = 0; i < v.size(); ++i) v[i] *= halfFactors[i];
        double leak = 0.0;
        applyTransport(frozen, dt, v, scratch, cellVol, leak);
        for (size_t i = 0; i < scratch.size(); ++i) scratch[i] = scratch[i] * halfFactors[i];
        v.swap(scratch);
        return leak;
    }
};

} // namespace

DensityField step(const DensityField& state, const CoefficientField& field,
                  const SolverConfig& config) {
    Stepper st(state.grid, field, config, state.time);
    st.fixDt(config.dt > 0 ? config.dt : st.cfg.cfl * st.admissibleDt());

    DensityField next = state;
    if (next.ledger.entries.empty())
        next.ledger.entries.push_back({state.time, state.mass(),
                                       cIntegralOf(state.values, st.frozen.c, st.cellVol), 0.0});
    std::vector<double> scratch(next.values.size());
    double prevLeak = next.ledger.entries.back().leakage;
    double leak = st.advance(next.values, scratch);
    next.time = state.time + st.dt;
    checkState(next.values, next.peak());
    next.ledger.entries.push_back({next.time, next.mass(),
                                   cIntegralOf(next.values, st.frozen.c, st.cellVol),
                                   prevLeak + leak});
    return next;
}

RunResult run(const DensityField& initial, const CoefficientField& field,
              const SolverConfig& config) {
    if (config.endTime < initial.time)
        throw std::invalid_argument("run: endTime precedes the state time");

    RunResult res;
    res.finalState = initial;
    auto& cur = res.finalState;

    Stepper st(initial.grid, field, config, initial.time);
    const double span = config.endTime - initial.time;

    std::vector<double> snapTimes = config.snapshotTimes;
    std::sort(snapTimes.begin(), snapTimes.end());
    size_t snapIdx = 0;

    auto pushSnapshot = [&](const std::vector<double>& vals, double t) {
        DensityField s;
        s.grid = initial.grid;
        s.values = vals;
        s.time = t;
        res.snapshots.push_back(std::move(s));
    };

    double q0 = cIntegralOf(cur.values, st.frozen.c, st.cellVol);
    cur.ledger.entries.clear();
    cur.ledger.entries.push_back({cur.time, cur.mass(), q0, 0.0});

    // anything scheduled at or before the start maps to the initial state
    while (snapIdx < snapTimes.size() && snapTimes[snapIdx] <= cur.time) {
        pushSnapshot(cur.values, cur.time);
        ++snapIdx;
    }

    if (span <= 0) {
        res.ledger = cur.ledger;
        res.dtUsed = 0;
        return res;
    }

    double wanted = config.dt > 0 ? config.dt : config.cfl * st.admissibleDt();
    long steps = std::max<long>(1, static_cast<long>(std::ceil(span / wanted - 1e-12)));
    double dt = span / steps;
    st.fixDt(dt);
    res.dtUsed = dt;
    res.stepCount = steps;

    std::vector<double> scratch(cur.values.size());
    std::vector<double> prevValues;
    double cumLeak = 0.0;
    const bool frozenOnce = field.timeIndependent();

    for (long n = 1; n <= steps; ++n) {
        if (!frozenOnce && n > 1) st.refresh(cur.time);
        prevValues = cur.values;
        double prevTime = cur.time;
        cumLeak += st.advance(cur.values, scratch);
        cur.time = (n == steps) ? config.endTime : initial.time + n * dt;
        checkState(cur.values, cur.peak());
        cur.ledger.entries.push_back({cur.time, cur.mass(),
                                      cIntegralOf(cur.values, st.frozen.c, st.cellVol), cumLeak});
        while (snapIdx < snapTimes.size() && snapTimes[snapIdx] <= cur.time + 1e-15) {
            double ts = snapTimes[snapIdx];
            if (ts - prevTime < cur.time - ts)
                pushSnapshot(prevValues, prevTime);
            else
                pushSnapshot(cur.values, cur.time);
            ++snapIdx;
        }
    }
    // requests beyond the end map to the last completed step
    while (snapIdx < snapTimes.size()) {
        pushSnapshot(cur.values, cur.time);
        ++snapIdx;
    }
    res.ledger = cur.ledger;
    return res;
}

double weightedMoment(const DensityField& state, const std::function<double(const Vector&)>& weight) {
    num::KahanSum s;
    const long n = state.grid.cellCount();
    for (long i = 0; i < n; ++i) {
        double w = weight(state.grid.cellCenter(i));
        if (!num::isFinite(w))
            throw std::domain_error("weightedMoment: weight is not finite on the grid");
        s.add(w * state.values[i]);
    }
    return s.value() * state.grid.cellVolume();
}

std::vector<double> massBalanceResidual(const MassLedger& ledger) {
    const auto& e = ledger.entries;
    if (e.empty()) throw std::invalid_argument("massBalanceResidual: empty ledger");
    std::vector<double> t(e.size()), q(e.size());
    for (size_t i = 0; i < e.size(); ++i) {
        t[i] = e[i].t;
        q[i] = e[i].cIntegral;
    }
    auto qint = num::cumulativeTrapezoid(t, q);
    std::vector<double> res(e.size());
    for (size_t i = 0; i < e.size(); ++i) res[i] = e[i].mass - e[0].mass - qint[i];
    return res;
}

double weakIdentityResidual(const std::vector<DensityField>& snapshots,
                            const CoefficientField& field, const C2Function& u,
                            double s, double t) {
    std::vector<const DensityField*> window;
    for (const auto& snap : snapshots)
        if (snap.time >= s - 1e-12 && snap.time <= t + 1e-12) window.push_back(&snap);
    if (window.size() < 2)
        throw std::invalid_argument("weakIdentityResidual: need at least two snapshots in [s, t]");

    const Grid& g = window.front()->grid;
    // support must stay away from the boundary ring
    const int N0 = g.cells[0], N1 = g.dimension == 2 ? g.cells[1] : 1;
    for (int i0 = 0; i0 < N0; ++i0)
        for (int i1 = 0; i1 < N1; ++i1) {
            bool edge = i0 == 0 || i0 == N0 - 1 || (g.dimension == 2 && (i1 == 0 || i1 == N1 - 1));
            if (!edge) continue;
            Vector x = g.cellCenter(static_cast<long>(i0) * N1 + i1);
            if (std::abs(u.value(x, window.front()->time)) > 1e-300)
                throw std::domain_error("weakIdentityResidual: test-function support touches the boundary");
        }

    auto momentOf = [&](const DensityField& f) {
        num::KahanSum acc;
        for (long i = 0; i < g.cellCount(); ++i)
            acc.add(u.value(g.cellCenter(i), f.time) * f.values[i]);
        return acc.value() * g.cellVolume();
    };
    auto generatorMoment = [&](const DensityField& f) {
        num::KahanSum acc;
        for (long i = 0; i < g.cellCount(); ++i) {
            Vector x = g.cellCenter(i);
            if (u.value(x, f.time) == 0.0 && u.gradient(x, f.time).isZero(0.0) &&
                f.values[i] == 0.0)
                continue;
            double lu = applyGenerator(field, u, x, f.time);
            double du = u.timeDerivative ? u.timeDerivative(x, f.time) : 0.0;
            acc.add((du + lu) * f.values[i]);
        }
        return acc.value() * g.cellVolume();
    };

    std::vector<double> times(window.size()), integrand(window.size());
    for (size_t i = 0; i < window.size(); ++i) {
        times[i] = window[i]->time;
        integrand[i] = generatorMoment(*window[i]);
    }
    auto cum = num::cumulativeTrapezoid(times, integrand);
    double lhs = momentOf(*window.back());
    double rhs = momentOf(*window.front()) + cum.back();
    return std::abs(lhs - rhs);
}

double l1Distance(const DensityField& a, const DensityField& b) {
    if (!a.grid.sameLayout(b.grid))
        throw std::invalid_argument("l1Distance: grids differ");
    num::KahanSum s;
    for (size_t i = 0; i < a.values.size(); ++i) s.add(std::abs(a.values[i] - b.values[i]));
    return s.value() * a.grid.cellVolume();
}

void writeSnapshotCsv(const DensityField& f, std::ostream& os) {
    const Grid& g = f.grid;
    os << "# fpk snapshot d=" << g.dimension << " t=" << io::formatDouble(f.time)
       << " N=" << g.cells[0];
    if (g.dimension == 2) os << "," << g.cells[1];
    os << " R=" << io::formatDouble(g.extent[0]);
    if (g.dimension == 2) os << "," << io::formatDouble(g.extent[1]);
    os << "\n";
    os << (g.dimension == 2 ? "x1,x2,density\n" : "x1,density\n");
    for (long i = 0; i < g.cellCount(); ++i) {
        Vector x = g.cellCenter(i);
        os << io::formatDouble(x[0]);
        if (g.dimension == 2) os << ',' << io::formatDouble(x[1]);
        os << ',' << io::formatDouble(f.values[i]) << '\n';
    }
}

void writeSnapshotBinary(const DensityField& f, std::ostream& os) {
    auto put = [&os](const void* p, size_t n) { os.write(static_cast<const char*>(p), n); };
    int32_t d = f.grid.dimension;
    put(&d, sizeof d);
    for (int a = 0; a < d; ++a) {
        int32_t n = f.grid.cells[a];
        put(&n, sizeof n);
    }
    for (int a = 0; a < d; ++a) {
        double r = f.grid.extent[a];
        put(&r, sizeof r);
    }
    double t = f.time;
    put(&t, sizeof t);
    put(f.values.data(), f.values.size() * sizeof(double));
}

DensityField readSnapshotBinary(std::istream& is) {
    auto get = [&is](void* p, size_t n) {
        is.read(static_cast<char*>(p), n);
        if (!is) throw std::runtime_error("snapshot binary: truncated stream");
    };
    int32_t d = 0;
    get(&d, sizeof d);
    if (d != 1 && d != 2) throw std::runtime_error("snapshot binary: bad dimension");
    std::array<int32_t, 2> n{1, 1};
    for (int a = 0; a < d; ++a) get(&n[a], sizeof(int32_t));
    std::array<double, 2> R{1.0, 1.0};
    for (int a = 0; a < d; ++a) get(&R[a], sizeof(double));
    DensityField f;
    f.grid = d == 1 ? Grid::make1d(R[0], n[0]) : Grid::make2d(R[0], n[0], R[1], n[1]);
    get(&f.time, sizeof(double));
    f.values.resize(f.grid.cellCount());
    get(f.values.data(), f.values.size() * sizeof(double));
    return f;
}

void writeLedgerCsv(const MassLedger& ledger, bool withLeakage, std::ostream& os) {
    auto res = massBalanceResidual(ledger);
    os << (withLeakage ? "t,mass,c_integral,residual,leakage\n" : "t,mass,c_integral,residual\n");
    for (size_t i = 0; i < ledger.entries.size(); ++i) {
        const auto& e = ledger.entries[i];
        os << io::formatDouble(e.t) << ',' << io::formatDouble(e.mass) << ','
           << io::formatDouble(e.cIntegral) << ',' << io::formatDouble(res[i]);
        if (withLeakage) os << ',' << io::formatDouble(e.leakage);
        os << '\n';
    }
}

} // namespace fpk
