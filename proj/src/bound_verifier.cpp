#include "fpk/bound_verifier.hpp"
#include "fpk/csvio.hpp"
#include "fpk/numerics.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace fpk {

PhiTransformResult phiTransform(const CoefficientField& field, const PhiWeight& phi,
                                const Vector& x, double t) {
    double ph = phi.value(x, t);
    if (!(ph > 0)) throw std::domain_error("phiTransform: Phi must be positive");
    Vector grad = phi.gradient(x, t);
    Matrix hess = phi.hessian(x, t);
    double dt = phi.timeDerivative ? phi.timeDerivative(x, t) : 0.0;

    Matrix A = field.diffusion(x, t);
    Vector divA = field.diffusionRowDivergence(x, t);
    Vector B = field.drift(x, t) - divA;

    // div(A grad Phi) = (div A) . grad Phi + A : Hess Phi
    double divAgrad = divA.dot(grad) + (A.cwiseProduct(hess)).sum();

    PhiTransformResult out;
    out.cTilde = field.potential(x, t) + (dt + divAgrad + B.dot(grad)) / ph;
    out.bTilde = B + (A * grad) / ph;
    if (!num::isFinite(out.cTilde))
        throw EvaluationError("phiTransform produced a non-finite potential", x, t);
    return out;
}

CoefficientField conjugatedField(const CoefficientField& field, const PhiWeight& phi) {
    const int d = field.dimension();
    // Conservative drift of the Phi rho equation: B~ + A grad Phi / Phi, i.e.
    // raw drift b + 2 A grad Phi / Phi (the row divergence of A is unchanged).
    auto drift = [field, phi](const Vector& x, double t) {
        double ph = phi.value(x, t);
        if (!(ph > 0)) throw std::domain_error("conjugatedField: Phi must be positive");
        return Vector(field.drift(x, t) + 2.0 * (field.diffusion(x, t) * phi.gradient(x, t)) / ph);
    };
    auto potential = [field, phi](const Vector& x, double t) {
        return phiTransform(field, phi, x, t).cTilde;
    };
    auto diffusion = [field](const Vector& x, double t) { return field.diffusion(x, t); };
    CoefficientField out(d, diffusion, drift, potential);
    if (field.hasAnalyticDivergence())
        out.setAnalyticDiffusionDivergence(
            [field](const Vector& x, double t) { return field.diffusionRowDivergence(x, t); });
    bool timeIndependentPhi = !phi.timeDerivative;
    out.setTimeIndependent(field.timeIndependent() && timeIndependentPhi);
    return out;
}

double localEllipticity(const CoefficientField& field, const Vector& x, double t,
                        EllipticityWindow window, double kappa, double theta) {
    if (!(t > 0)) throw std::invalid_argument("localEllipticity: requires t > 0");
    if (!(theta > 0 && theta < 1)) throw std::invalid_argument("localEllipticity: theta in (0,1)");
    double radius = window == EllipticityWindow::FixedRadius ? kappa : std::sqrt(t);
    if (!(radius > 0)) throw std::invalid_argument("localEllipticity: window radius must be positive");

    Region region(x, radius, theta * t, t);
    int res = 5, tres = 2;
    double prev = std::numeric_limits<double>::infinity();
    for (int round = 0; round < 7; ++round) {
        auto sb = ellipticityExtremes(field, region, res, tres);
        if (round > 0 && std::abs(prev - sb.lambdaFloor) <= 0.005 * std::abs(prev))
            return sb.lambdaFloor;
        prev = sb.lambdaFloor;
        res = 2 * res - 1;
        tres = tres + 1;
    }
    return prev;
}

EnvelopeSpec EnvelopeSpec::blowup(double alphaPrime, double r, double q) {
    if (!(alphaPrime > 0) || !(r > 0) || !(q > 0))
        throw std::invalid_argument("EnvelopeSpec: exponents must be positive");
    EnvelopeSpec e;
    e.form = TemporalForm::Blowup;
    e.spatialRate = alphaPrime;
    e.spatialPower = r;
    e.blowupExponent = q;
    return e;
}

EnvelopeSpec EnvelopeSpec::timeWeighted(double alphaPrime, double r, double beta) {
    if (!(alphaPrime > 0) || !(r > 0) || !(beta > 0))
        throw std::invalid_argument("EnvelopeSpec: exponents must be positive");
    EnvelopeSpec e;
    e.form = TemporalForm::TimeWeighted;
    e.spatialRate = alphaPrime;
    e.spatialPower = r;
    e.beta = beta;
    return e;
}

double EnvelopeSpec::evaluateLog(const Vector& x, double t) const {
    double nr = std::pow(x.norm(), spatialPower);
    if (form == TemporalForm::Blowup)
        return logC4 - spatialRate * nr + c5 * std::pow(t, -blowupExponent);
    return logC4 - p * std::log(t) - spatialRate * std::pow(t, beta) * nr;
}

namespace {

bool insideCore(const Grid& g, long flat, int margin) {
    int N1 = g.dimension == 2 ? g.cells[1] : 1;
    int i0 = static_cast<int>(flat / N1);
    int i1 = static_cast<int>(flat % N1);
    if (i0 < margin || i0 >= g.cells[0] - margin) return false;
    if (g.dimension == 2 && (i1 < margin || i1 >= g.cells[1] - margin)) return false;
    return true;
}

} // namespace

FitResult fitEnvelopeConstants(const std::vector<DensityField>& snapshots, EnvelopeSpec spec,
                               const FitOptions& opt) {
    if (snapshots.size() < 3)
        throw std::invalid_argument("fitEnvelopeConstants: need at least 3 snapshots");
    FitResult out;
    out.spec = spec;

    std::vector<double> abscissa, peakChannel, times;
    std::vector<Vector> argmax;
    for (const auto& snap : snapshots) {
        if (!(snap.time > 0)) continue;   // the temporal factors need t > 0
        double floor = std::max(opt.densityFloor, opt.coreFraction * snap.peak());
        double best = -std::numeric_limits<double>::infinity();
        Vector bestX;
        for (long i = 0; i < snap.grid.cellCount(); ++i) {
            if (snap.values[i] <= floor) continue;
            if (!insideCore(snap.grid, i, opt.boundaryMargin)) continue;
            Vector x = snap.grid.cellCenter(i);
            double spatial = spec.form == TemporalForm::Blowup
                                 ? spec.spatialRate * std::pow(x.norm(), spec.spatialPower)
                                 : spec.spatialRate * std::pow(snap.time, spec.beta) *
                                       std::pow(x.norm(), spec.spatialPower);
            double v = std::log(snap.values[i]) + spatial;
            if (v > best) {
                best = v;
                bestX = x;
            }
        }
        if (best == -std::numeric_limits<double>::infinity()) continue;
        times.push_back(snap.time);
        peakChannel.push_back(best);
        argmax.push_back(bestX);
        abscissa.push_back(spec.form == TemporalForm::Blowup
                               ? std::pow(snap.time, -spec.blowupExponent)
                               : std::log(snap.time));
    }
    if (times.size() < 3) {
        out.failureReason = "fewer than 3 snapshots with density above the core floor";
        return out;
    }

    num::MajorantLine line;
    if (spec.form == TemporalForm::Blowup)
        line = num::chebyshevMajorantLine(abscissa, peakChannel, 0.0,
                                          std::numeric_limits<double>::infinity());
    else
        line = num::chebyshevMajorantLine(abscissa, peakChannel,
                                          -std::numeric_limits<double>::infinity(), 0.0);

    out.spec.fitted = true;
    out.spec.logC4 = line.intercept;
    if (spec.form == TemporalForm::Blowup)
        out.spec.c5 = line.slope;
    else
        out.spec.p = -line.slope;
    out.spec.maxViolationGap = line.maxSlack;
    out.success = true;

    // channel data + binding witness
    double worstGap = std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < times.size(); ++j) {
        out.channel.emplace_back(times[j], peakChannel[j] - out.spec.logC4);
        double gap = line.intercept + line.slope * abscissa[j] - peakChannel[j];
        if (gap < worstGap) {
            worstGap = gap;
            out.worstT = times[j];
            out.worstX = argmax[j];
        }
    }
    return out;
}

VerificationReport checkEnvelope(const std::vector<DensityField>& snapshots,
                                 const EnvelopeSpec& fitted, double slack,
                                 const FitOptions& opt) {
    if (!fitted.fitted)
        throw std::invalid_argument("checkEnvelope: envelope constants have not been fitted");
    if (slack < 0) throw std::invalid_argument("checkEnvelope: slack must be >= 0");

    VerificationReport rep;
    rep.envelope = fitted;
    rep.slack = slack;
    double maxLogRatio = -std::numeric_limits<double>::infinity();
    for (const auto& snap : snapshots) {
        if (!(snap.time > 0)) continue;
        double floor = std::max(opt.densityFloor, opt.coreFraction * snap.peak());
        for (long i = 0; i < snap.grid.cellCount(); ++i) {
            if (snap.values[i] <= floor) continue;
            if (!insideCore(snap.grid, i, opt.boundaryMargin)) continue;
            Vector x = snap.grid.cellCenter(i);
            double logRatio = std::log(snap.values[i]) - fitted.evaluateLog(x, snap.time);
            if (logRatio > maxLogRatio) {
                maxLogRatio = logRatio;
                rep.witness.t = snap.time;
                rep.witness.x = x;
                rep.witness.density = snap.values[i];
                rep.witness.envelope = std::exp(fitted.evaluateLog(x, snap.time));
            }
        }
    }
    rep.maxRatio = std::exp(maxLogRatio);
    rep.pass = rep.maxRatio <= 1.0 + slack;
    return rep;
}

std::string toJson(const VerificationReport& rep) {
    nlohmann::ordered_json j;
    j["envelope"] = {
        {"form", rep.envelope.form == TemporalForm::Blowup ? "blowup" : "timeweighted"},
        {"spatial_rate", rep.envelope.spatialRate},
        {"spatial_power", rep.envelope.spatialPower},
    };
    if (rep.envelope.form == TemporalForm::Blowup)
        j["envelope"]["blowup_exponent"] = rep.envelope.blowupExponent;
    else
        j["envelope"]["beta"] = rep.envelope.beta;
    j["constants"] = {
        {"c4", std::exp(rep.envelope.logC4)},
        {"log_c4", rep.envelope.logC4},
    };
    if (rep.envelope.form == TemporalForm::Blowup)
        j["constants"]["c5"] = rep.envelope.c5;
    else
        j["constants"]["p"] = rep.envelope.p;
    j["exponents"] = {
        {"spatial_power", rep.envelope.spatialPower},
        {"temporal", rep.envelope.form == TemporalForm::Blowup ? rep.envelope.blowupExponent
                                                               : rep.envelope.beta},
        {"provenance", "paper-fixed"},
    };
    j["max_ratio"] = rep.maxRatio;
    j["witness"] = {
        {"t", rep.witness.t},
        {"x", std::vector<double>(rep.witness.x.data(), rep.witness.x.data() + rep.witness.x.size())},
        {"density", rep.witness.density},
        {"envelope", rep.witness.envelope},
    };
    j["pass"] = rep.pass;
    j["slack"] = rep.slack;
    nlohmann::ordered_json regs = nlohmann::ordered_json::array();
    for (const auto& r : rep.regressions)
        regs.push_back({{"channel", r.channel},
                        {"exponent", r.exponent},
                        {"stderr", r.stderr_},
                        {"window", {r.windowLo, r.windowHi}}});
    j["regressions"] = regs;
    j["config_digest"] = rep.configDigest;
    j["preset"] = rep.preset;
    j["grid"] = rep.gridDescription;
    return j.dump(2) + "\n";
}

ExponentEstimate decayExponentEstimate(const std::vector<std::pair<double, double>>& series,
                                       DecayModel model) {
    if (series.size() < 5)
        throw std::invalid_argument("decayExponentEstimate: need at least 5 points");
    std::vector<double> lt, ly;
    double lo = std::numeric_limits<double>::infinity(), hi = 0;
    for (const auto& [t, v] : series) {
        if (!(t > 0)) throw std::domain_error("decayExponentEstimate: times must be positive");
        if (!(v > 0)) throw std::domain_error("decayExponentEstimate: values must be positive");
        double y = std::log(v);
        if (model == DecayModel::LogLog) {
            if (!(v > 1.0))
                throw std::domain_error("decayExponentEstimate: loglog model needs values > 1");
            y = std::log(y);
        }
        lt.push_back(std::log(t));
        ly.push_back(y);
        lo = std::min(lo, t);
        hi = std::max(hi, t);
    }
    auto fit = num::leastSquaresLine(lt, ly);
    ExponentEstimate est;
    est.exponent = -fit.slope;
    est.stderr_ = fit.slopeStderr;
    est.windowLo = lo;
    est.windowHi = hi;
    est.points = static_cast<int>(series.size());
    return est;
}

double pointwiseBoundRhs(const CoefficientField& field, const std::vector<DensityField>& snapshots,
                         const Vector& x, double t, double gamma, double theta,
                         EllipticityWindow window, double kappa,
                         MatrixNormConvention normConvention) {
    const int d = field.dimension();
    if (!(gamma > 0.5 * (d + 2)))
        throw std::invalid_argument("pointwiseBoundRhs: requires gamma > (d+2)/2");
    if (!(theta > 0 && theta < 1)) throw std::invalid_argument("pointwiseBoundRhs: theta in (0,1)");
    double radius = window == EllipticityWindow::FixedRadius ? kappa : std::sqrt(t);
    if (!(radius > 0)) throw std::invalid_argument("pointwiseBoundRhs: invalid window radius");
    bool parabolic = window == EllipticityWindow::ParabolicSqrtT;

    std::vector<const DensityField*> inWindow;
    for (const auto& s : snapshots)
        if (s.time >= theta * t - 1e-12 && s.time <= t + 1e-12) inWindow.push_back(&s);
    if (inWindow.size() < 2)
        throw std::invalid_argument("pointwiseBoundRhs: need >= 2 snapshots in [theta t, t]");

    const Grid& g = inWindow.front()->grid;
    for (int a = 0; a < g.dimension; ++a)
        if (std::abs(x[a]) + radius > g.extent[a] + 1e-12)
            throw std::domain_error("pointwiseBoundRhs: window escapes the grid");

    double lambda = localEllipticity(field, x, t, window, kappa, theta);
    if (!(lambda > 0)) throw std::domain_error("pointwiseBoundRhs: degenerate diffusion in the window");

    double tPow = std::pow(t, 2.0 * gamma);
    auto weightAt = [&](const Vector& y, double tau) {
        Matrix A = field.diffusion(y, tau);
        double na = matrixNorm(A, normConvention);
        double cp = std::max(0.0, field.potential(y, tau));
        Vector B = divergenceCorrection(field, y, tau);
        double drift2 = B.dot(A.llt().solve(B));   // |sqrt(A^{-1}) B|^2
        double w = 1.0 + std::pow(na, gamma);
        double cTerm = std::pow(cp, gamma);
        double bTerm = std::pow(drift2, gamma);
        if (parabolic) {
            cTerm *= tPow;
            bTerm *= tPow;
        }
        return w + cTerm + bTerm;
    };

    std::vector<double> times, vals;
    for (const auto* s : inWindow) {
        num::KahanSum acc;
        for (long i = 0; i < g.cellCount(); ++i) {
            Vector y = g.cellCenter(i);
            if ((y - x).norm() > radius) continue;
            if (s->values[i] == 0.0) continue;
            acc.add(weightAt(y, s->time) * s->values[i]);
        }
        times.push_back(s->time);
        vals.push_back(acc.value() * g.cellVolume());
    }
    double integral = num::cumulativeTrapezoid(times, vals).back();
    double rhs = std::pow(1.0 + 1.0 / lambda, gamma) * integral;
    if (parabolic) rhs *= std::pow(t, -0.5 * (d + 2));
    return rhs;
}

} // namespace fpk
