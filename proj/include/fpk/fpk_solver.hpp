#pragma once

#include "fpk/coefficient_field.hpp"

#include <array>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace fpk {

class CflViolation : public std::runtime_error {
public:
    explicit CflViolation(const std::string& what) : std::runtime_error(what) {}
};

class NumericalFailure : public std::runtime_error {
public:
    explicit NumericalFailure(const std::string& what) : std::runtime_error(what) {}
};

/// Uniform tensor grid on the symmetric box prod_a [-R_a, R_a], d in {1, 2}.
/// Cell i along axis a has center -R_a + (i + 1/2) h_a. Values are stored
/// row-major: flat = i0 * N1 + i1.
struct Grid {
    int dimension = 1;
    std::array<double, 2> extent{8.0, 8.0};
    std::array<int, 2> cells{256, 1};

    static Grid make1d(double R, int N);
    static Grid make2d(double R0, int N0, double R1, int N1);

    double cellWidth(int axis) const { return 2.0 * extent[axis] / cells[axis]; }
    double cellVolume() const;
    long cellCount() const { return static_cast<long>(cells[0]) * (dimension == 2 ? cells[1] : 1); }
    double center(int axis, int idx) const {
        return -extent[axis] + (idx + 0.5) * cellWidth(axis);
    }
    Vector cellCenter(long flat) const;
    bool sameLayout(const Grid& other) const;
};

enum class FluxScheme { ExponentialFitting, Upwind };
enum class BoundaryCondition { NoFlux, Absorbing };
enum class ReactionTreatment { ExactExponential, Explicit };

struct SolverConfig {
    double dt = 0;                  // 0 = derive from the CFL number
    double cfl = 0.9;               // in (0, 1]
    FluxScheme scheme = FluxScheme::ExponentialFitting;
    BoundaryCondition boundary = BoundaryCondition::NoFlux;
    ReactionTreatment reaction = ReactionTreatment::ExactExponential;
    double endTime = 1.0;
    std::vector<double> snapshotTimes;  // recorded at the nearest completed step
};

struct LedgerEntry {
    double t = 0;
    double mass = 0;
    double cIntegral = 0;   // instantaneous int c rho dx
    double leakage = 0;     // cumulative boundary loss (absorbing runs)
};

struct MassLedger {
    std::vector<LedgerEntry> entries;
};

struct DensityField {
    Grid grid;
    std::vector<double> values;   // cell averages, nonnegative
    double time = 0;
    MassLedger ledger;

    // projection metadata
    double rawMass = 0;
    bool renormalized = false;
    bool truncationWarning = false;

    double mass() const;
    double peak() const;
};

struct InitialMeasure {
    enum class Kind { Gaussian, SmoothedPointMass, GridFunction };
    Kind kind = Kind::Gaussian;
    Vector mean;
    Matrix covariance;
    Vector center;
    double width = 0;   // <= 0 selects the default 2h at projection time
    std::function<double(const Vector&)> gridFunction;

    static InitialMeasure gaussian(Vector mean, Matrix covariance);
    static InitialMeasure pointMass(Vector center, double width = 0);
    static InitialMeasure fromFunction(std::function<double(const Vector&)> f);
};

/// Discretize the initial measure onto the grid. Gaussian and point-mass
/// fields are renormalized to unit mass (the choice is recorded on the
/// field); a raw mass below 1 - 1e-6 raises the truncation warning flag and
/// below 0.5 is an error.
DensityField projectInitialMeasure(const InitialMeasure& spec, const Grid& grid);

/// One conservative, positivity-preserving step of
///   d_t rho = div(A grad rho - B rho) + c rho
/// with exponentially fitted two-point fluxes and Strang-split reaction.
/// Diffusion must be diagonal on the grid (scalar in 1d, diag in 2d).
DensityField step(const DensityField& state, const CoefficientField& field,
                  const SolverConfig& config);

struct RunResult {
    DensityField finalState;
    std::vector<DensityField> snapshots;  // ledgers left empty
    MassLedger ledger;
    double dtUsed = 0;
    long stepCount = 0;
};

RunResult run(const DensityField& initial, const CoefficientField& field,
              const SolverConfig& config);

/// Midpoint-rule moment sum_i w(x_i) rho_i vol.
double weightedMoment(const DensityField& state, const std::function<double(const Vector&)>& weight);

/// mass(t) - mass(0) - int_0^t (int c rho dx) ds per ledger entry, trapezoidal
/// in time. With no-flux boundaries this isolates time-integration error;
/// absorbing-boundary leakage is tracked separately in the ledger.
std::vector<double> massBalanceResidual(const MassLedger& ledger);

/// | int u dmu_t - int u dmu_s - int_s^t int (d_tau u + Lu) dmu_tau dtau |
/// over the snapshots covering [s, t]. The test function must be supported
/// strictly inside the grid.
double weakIdentityResidual(const std::vector<DensityField>& snapshots,
                            const CoefficientField& field, const C2Function& u,
                            double s, double t);

double l1Distance(const DensityField& a, const DensityField& b);

void writeSnapshotCsv(const DensityField& state, std::ostream& os);
void writeSnapshotBinary(const DensityField& state, std::ostream& os);
DensityField readSnapshotBinary(std::istream& is);
void writeLedgerCsv(const MassLedger& ledger, bool withLeakage, std::ostream& os);

} // namespace fpk
