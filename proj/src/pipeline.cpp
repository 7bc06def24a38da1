#include "fpk/pipeline.hpp"
#include "fpk/csvio.hpp"
#include "fpk/log.hpp"
#include "fpk/lyapunov_bounds.hpp"

#include "json.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace fpk {

PipelineMode parsePipelineMode(const std::string& name) {
    if (name == "bounds") return PipelineMode::Bounds;
    if (name == "simulate") return PipelineMode::Simulate;
    if (name == "verify") return PipelineMode::Verify;
    if (name == "report") return PipelineMode::Report;
    throw std::invalid_argument("unknown mode '" + name + "'");
}

namespace {

struct Sink {
    fs::path dir;
    std::vector<std::string>* files;
    void write(const std::string& name, const std::string& content) const {
        fs::path p = dir / name;
        fs::create_directories(p.parent_path());
        io::writeFile(p.string(), content);
        files->push_back(p.string());
    }
};

std::vector<double> boundsTimeGrid(double tEnd) {
    double lo = std::max(1e-6, std::min(1e-4, tEnd * 1e-3));
    double hi = tEnd;
    const int n = 49;
    std::vector<double> t(n);
    for (int i = 0; i < n; ++i) t[i] = lo * std::pow(hi / lo, double(i) / (n - 1));
    return t;
}

Region certificationRegion(const ProblemSpec& spec) {
    double radius = spec.gridExtent0;
    if (spec.dimension == 2) radius = std::min(radius, spec.gridExtent1);
    return Region(Vector::Zero(spec.dimension), 0.98 * radius, 0.0,
                  std::max(spec.solver.endTime, 1e-3));
}

std::string gridDescription(const Grid& g) {
    std::ostringstream os;
    os << g.dimension << "d [-" << io::formatDouble(g.extent[0]) << ","
       << io::formatDouble(g.extent[0]) << "] N=" << g.cells[0];
    if (g.dimension == 2)
        os << " x [-" << io::formatDouble(g.extent[1]) << "," << io::formatDouble(g.extent[1])
           << "] N=" << g.cells[1];
    return os.str();
}

struct CertifiedConstants {
    DissipativityCertificate certificate;
    std::optional<double> c3;
};

ordered_json certificateJson(const CertifiedConstants& cc) {
    ordered_json j;
    const auto& cert = cc.certificate;
    j["certified"] = cert.certified;
    j["c1"] = cert.c1;
    j["c2"] = cert.c2;
    j["k"] = cert.k;
    j["max_slack"] = cert.maxSlack;
    j["samples"] = cert.sampleCount;
    j["radial_samples"] = cert.radialSamples;
    j["direction_samples"] = cert.directionSamples;
    j["time_samples"] = cert.timeSamples;
    if (!cert.certified) j["failure"] = cert.failureReason;
    if (cert.worst.x.size() > 0) {
        j["worst_sample"] = {
            {"x", std::vector<double>(cert.worst.x.data(), cert.worst.x.data() + cert.worst.x.size())},
            {"t", cert.worst.t},
            {"lhs", cert.worst.lhs}};
    }
    if (cc.c3) j["c3"] = *cc.c3;
    return j;
}

int doBounds(const ProblemSpec& spec, const Sink& sink) {
    CoefficientField field = spec.buildField();
    Grid grid = spec.buildGrid();
    DensityField init = projectInitialMeasure(spec.buildInitial(grid), grid);
    Region region = certificationRegion(spec);
    auto tgrid = boundsTimeGrid(spec.solver.endTime);

    ordered_json certs;
    std::vector<std::pair<std::string, std::vector<double>>> columns;

    for (const std::string& sel : spec.boundSelections) {
        std::vector<double> col(tgrid.size(), 0.0);
        if (sel == "case_i") {
            double C = caseIConstant(field, spec.r, region, 64, 3);
            double m0 = weightedMoment(init, [&spec](const Vector& x) {
                return std::pow(x.norm(), spec.r);
            });
            for (size_t i = 0; i < tgrid.size(); ++i) col[i] = boundCaseI(C, tgrid[i], m0);
            certs[sel] = {{"C", C}, {"initial_moment", m0}};
        } else if (sel == "case_i_exp") {
            double C = caseIExponentialConstant(field, spec.alpha, spec.r, region, 64, 3);
            C = std::max(C, 0.0);
            double m0 = weightedMoment(init, [&spec](const Vector& x) {
                return std::exp(spec.alpha * std::pow(x.norm(), spec.r));
            });
            for (size_t i = 0; i < tgrid.size(); ++i) col[i] = boundCaseI(C, tgrid[i], m0);
            certs[sel] = {{"C", C}, {"initial_moment", m0}};
        } else if (sel == "example2_5") {
            CertifiedConstants cc;
            cc.certificate = certifyDissipativity(DissipativityForm::Power, field, spec.k, region,
                                                  48, 3, 1.0, spec.r);
            if (!cc.certificate.certified)
                throw NumericalFailure("example2_5: dissipativity certification failed: " +
                                       cc.certificate.failureReason);
            cc.c3 = growthConstantPower(cc.certificate.c1, cc.certificate.c2, spec.r, spec.k);
            if (!cc.c3)
                throw NumericalFailure("example2_5: no single growth constant fits the certificate");
            for (size_t i = 0; i < tgrid.size(); ++i)
                col[i] = momentEnvelopePower(spec.r, spec.k, *cc.c3, spec.delta, tgrid[i]);
            certs[sel] = certificateJson(cc);
        } else if (sel == "example2_6") {
            CertifiedConstants cc;
            cc.certificate = certifyDissipativity(DissipativityForm::Exponential, field, spec.k,
                                                  region, 48, 3, spec.alpha, spec.r);
            if (!cc.certificate.certified)
                throw NumericalFailure("example2_6: dissipativity certification failed: " +
                                       cc.certificate.failureReason);
            cc.c3 = growthConstantExponential(cc.certificate.c1, cc.certificate.c2, spec.alpha,
                                              spec.r, spec.k);
            if (!cc.c3)
                throw NumericalFailure("example2_6: no single growth constant fits the certificate");
            bool regime = false;
            for (size_t i = 0; i < tgrid.size(); ++i) {
                try {
                    auto env = momentEnvelopeExponential(spec.r, spec.k, spec.alpha, *cc.c3,
                                                         spec.delta, tgrid[i]);
                    col[i] = env.value;
                    regime = regime || env.constantExtensionRegime;
                } catch (const std::overflow_error&) {
                    col[i] = std::numeric_limits<double>::infinity();
                }
            }
            certs[sel] = certificateJson(cc);
            certs[sel]["constant_extension_regime"] = regime;
        } else if (sel == "example2_7") {
            CertifiedConstants cc;
            cc.certificate = certifyDissipativity(DissipativityForm::ExponentialWithGradient, field,
                                                  spec.k, region, 48, 3, spec.alpha, spec.r);
            if (!cc.certificate.certified)
                throw NumericalFailure("example2_7: dissipativity certification failed: " +
                                       cc.certificate.failureReason);
            cc.c3 = growthConstantPower(cc.certificate.c1, cc.certificate.c2, spec.r, spec.k);
            if (!cc.c3)
                throw NumericalFailure("example2_7: no single growth constant fits the certificate");
            TimeWeightedEnvelope env{};
            for (size_t i = 0; i < tgrid.size(); ++i) {
                env = timeWeightedExponentialEnvelope(spec.r, spec.k, spec.alpha, spec.beta, *cc.c3,
                                                      tgrid[i]);
                col[i] = env.value;
            }
            certs[sel] = certificateJson(cc);
            certs[sel]["exponent_small_t"] = env.exponentSmallT;
            certs[sel]["exponent_large_t"] = env.exponentLargeT;
        }
        columns.emplace_back(sel, std::move(col));
    }

    std::ostringstream csv;
    csv << "t";
    for (const auto& [name, _] : columns) csv << ',' << name;
    csv << '\n';
    for (size_t i = 0; i < tgrid.size(); ++i) {
        csv << io::formatDouble(tgrid[i]);
        for (const auto& [_, col] : columns) csv << ',' << io::formatDouble(col[i]);
        csv << '\n';
    }
    sink.write("bounds.csv", csv.str());

    certs["config_digest"] = io::contentDigest(spec.canonicalText);
    sink.write("certificate.json", certs.dump(2) + "\n");
    return 0;
}

RunResult simulateSpec(const ProblemSpec& spec) {
    CoefficientField field = spec.buildField();
    Grid grid = spec.buildGrid();
    DensityField init = projectInitialMeasure(spec.buildInitial(grid), grid);
    return run(init, field, spec.solver);
}

int doSimulate(const ProblemSpec& spec, const Sink& sink) {
    auto t0 = std::chrono::steady_clock::now();
    RunResult rr = simulateSpec(spec);

    for (size_t i = 0; i < rr.snapshots.size(); ++i) {
        std::ostringstream name;
        name << "snapshots/snap_" << std::setw(4) << std::setfill('0') << i;
        std::ostringstream csv;
        writeSnapshotCsv(rr.snapshots[i], csv);
        sink.write(name.str() + ".csv", csv.str());
        std::ostringstream bin;
        writeSnapshotBinary(rr.snapshots[i], bin);
        sink.write(name.str() + ".bin", bin.str());
    }
    std::ostringstream ledger;
    writeLedgerCsv(rr.ledger, spec.solver.boundary == BoundaryCondition::Absorbing, ledger);
    sink.write("ledger.csv", ledger.str());

    std::ostringstream moments;
    bool expMoment = spec.alpha > 0;
    moments << "t,mass,moment_r" << (expMoment ? ",moment_exp\n" : "\n");
    for (const auto& snap : rr.snapshots) {
        double mr = weightedMoment(snap, [&spec](const Vector& x) {
            return std::pow(x.norm(), spec.r);
        });
        moments << io::formatDouble(snap.time) << ',' << io::formatDouble(snap.mass()) << ','
                << io::formatDouble(mr);
        if (expMoment) {
            double me = weightedMoment(snap, [&spec](const Vector& x) {
                return std::exp(spec.alpha * std::pow(x.norm(), spec.r));
            });
            moments << ',' << io::formatDouble(me);
        }
        moments << '\n';
    }
    sink.write("moments.csv", moments.str());

    ordered_json runMeta;
    runMeta["preset"] = spec.preset;
    runMeta["grid"] = gridDescription(rr.finalState.grid);
    runMeta["dt"] = rr.dtUsed;
    runMeta["steps"] = rr.stepCount;
    runMeta["snapshots"] = rr.snapshots.size();
    runMeta["final_mass"] = rr.finalState.mass();
    runMeta["config_digest"] = io::contentDigest(spec.canonicalText);
    sink.write("run.json", runMeta.dump(2) + "\n");

    // wall-clock timing stays out of the deterministic artifact set
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                  std::chrono::steady_clock::now() - t0)
                  .count();
    ordered_json timing;
    timing["elapsed_ms"] = ms;
    sink.write("timing.json", timing.dump(2) + "\n");
    return 0;
}

EnvelopeSpec envelopeFromSpec(const ProblemSpec& spec) {
    if (spec.verify.form == TemporalForm::Blowup)
        return EnvelopeSpec::blowup(spec.verify.alphaPrime, spec.r, spec.verify.q);
    return EnvelopeSpec::timeWeighted(spec.verify.alphaPrime, spec.r, spec.beta);
}

/// first snapshot index where the peak channel moved by < 1% of its magnitude
/// under dt -> dt/2 (the regression-window heuristic)
size_t firstReliableIndex(const FitResult& coarse, const FitResult& fine) {
    size_t n = std::min(coarse.channel.size(), fine.channel.size());
    double coarseC4 = coarse.spec.logC4, fineC4 = fine.spec.logC4;
    for (size_t j = 0; j < n; ++j) {
        double a = coarse.channel[j].second + coarseC4;
        double b = fine.channel[j].second + fineC4;
        if (std::abs(a - b) < 0.01 * std::max(1.0, std::abs(b))) return j;
    }
    return 0;
}

int doVerify(const ProblemSpec& spec, const Sink& sink, double slackOverride) {
    if (!spec.verify.enabled)
        throw std::invalid_argument("verify mode needs a [verify] section in the spec");
    double slack = slackOverride >= 0 ? slackOverride : spec.verify.slack;

    RunResult rr = simulateSpec(spec);
    ProblemSpec half = spec;
    half.solver.dt = rr.dtUsed * 0.5;
    RunResult rrHalf = simulateSpec(half);

    EnvelopeSpec envShape = envelopeFromSpec(spec);
    FitResult fitAll = fitEnvelopeConstants(rr.snapshots, envShape);
    if (!fitAll.success)
        throw NumericalFailure("envelope fit failed: " + fitAll.failureReason);
    FitResult fitHalf = fitEnvelopeConstants(rrHalf.snapshots, envShape);
    size_t reliable = fitHalf.success ? firstReliableIndex(fitAll, fitHalf) : 0;

    std::vector<DensityField> window(rr.snapshots.begin() + reliable, rr.snapshots.end());
    FitResult fit = fitEnvelopeConstants(window, envShape);
    if (!fit.success)
        throw NumericalFailure("envelope fit failed on the reliable window: " + fit.failureReason);

    VerificationReport report = checkEnvelope(window, fit.spec, slack);
    report.configDigest = io::contentDigest(spec.canonicalText);
    report.preset = spec.preset;
    report.gridDescription = gridDescription(rr.finalState.grid);

    // temporal-channel regressions
    if (spec.verify.form == TemporalForm::Blowup && fit.spec.c5 > 0) {
        std::vector<std::pair<double, double>> series;
        for (const auto& [t, _] : fit.channel)
            series.emplace_back(t, fit.spec.c5 * std::pow(t, -spec.verify.q));
        if (series.size() >= 5) {
            auto est = decayExponentEstimate(series, DecayModel::Power);
            report.regressions.push_back({"fitted_temporal_channel", est.exponent, est.stderr_,
                                          est.windowLo, est.windowHi});
        }
    } else if (spec.verify.form == TemporalForm::TimeWeighted && fit.spec.p > 0) {
        std::vector<std::pair<double, double>> series;
        for (const auto& [t, _] : fit.channel) series.emplace_back(t, std::pow(t, -fit.spec.p));
        if (series.size() >= 5) {
            auto est = decayExponentEstimate(series, DecayModel::Power);
            report.regressions.push_back({"fitted_temporal_power", est.exponent, est.stderr_,
                                          est.windowLo, est.windowHi});
        }
    }

    // analytic moment-bound channel (blow-up exponent carrier) where available
    bool hasExpSelection =
        std::find(spec.boundSelections.begin(), spec.boundSelections.end(), "example2_6") !=
        spec.boundSelections.end();
    if (spec.verify.form == TemporalForm::Blowup && hasExpSelection) {
        CoefficientField field = spec.buildField();
        auto cert = certifyDissipativity(DissipativityForm::Exponential, field, spec.k,
                                         certificationRegion(spec), 48, 3, spec.alpha, spec.r);
        if (cert.certified) {
            auto c3 = growthConstantExponential(cert.c1, cert.c2, spec.alpha, spec.r, spec.k);
            if (c3) {
                std::vector<std::pair<double, double>> series;
                for (const auto& snap : rr.snapshots) {
                    if (snap.time <= 0) continue;
                    try {
                        auto env = momentEnvelopeExponential(spec.r, spec.k, spec.alpha, *c3,
                                                             spec.delta, snap.time);
                        double lv = std::log(env.value);
                        if (lv >= 8.0 && lv <= 600.0) series.emplace_back(snap.time, env.value);
                    } catch (const std::overflow_error&) {
                        continue;
                    }
                }
                if (series.size() >= 5) {
                    auto est = decayExponentEstimate(series, DecayModel::LogLog);
                    report.regressions.push_back({"moment_bound", est.exponent, est.stderr_,
                                                  est.windowLo, est.windowHi});
                }
            }
        }
    }

    sink.write("verification.json", toJson(report));

    std::ostringstream summary;
    summary << "envelope verification: " << (report.pass ? "PASS" : "FAIL") << "\n";
    summary << "  preset:            " << (spec.preset.empty() ? "(custom)" : spec.preset) << "\n";
    summary << "  grid:              " << report.gridDescription << "\n";
    summary << "  max rho/envelope:  " << io::formatDouble(report.maxRatio) << " (slack "
            << io::formatDouble(slack) << ")\n";
    summary << "  witness:           t=" << io::formatDouble(report.witness.t) << " x=[";
    for (int i = 0; i < report.witness.x.size(); ++i)
        summary << (i ? "," : "") << io::formatDouble(report.witness.x[i]);
    summary << "]\n";
    summary << "  fitted constants:  C4=" << io::formatDouble(std::exp(fit.spec.logC4));
    if (spec.verify.form == TemporalForm::Blowup)
        summary << " C5=" << io::formatDouble(fit.spec.c5)
                << " (q=" << io::formatDouble(spec.verify.q) << ", paper-fixed)\n";
    else
        summary << " p=" << io::formatDouble(fit.spec.p)
                << " (beta=" << io::formatDouble(spec.beta) << ", paper-fixed)\n";
    summary << "  reliable window:   from snapshot " << reliable << " (t="
            << io::formatDouble(window.front().time) << ")\n";
    for (const auto& reg : report.regressions)
        summary << "  regression " << reg.channel << ": exponent "
                << io::formatDouble(reg.exponent) << " +- " << io::formatDouble(reg.stderr_)
                << " on [" << io::formatDouble(reg.windowLo) << ", "
                << io::formatDouble(reg.windowHi) << "]\n";
    sink.write("summary.txt", summary.str());

    return report.pass ? 0 : 1;
}

int doReport(const ProblemSpec& spec, const Sink& sink) {
    std::ostringstream md;
    md << "# fpk_certify report\n\n";
    md << "preset: " << (spec.preset.empty() ? "(custom)" : spec.preset) << "\n\n";
    md << "config digest: `" << io::contentDigest(spec.canonicalText) << "`\n\n";

    auto copyIfPresent = [&](const std::string& name, const std::string& dest) {
        fs::path p = sink.dir / name;
        if (!fs::exists(p)) return false;
        sink.write(dest, io::readFile(p.string()));
        return true;
    };

    bool bounds = copyIfPresent("bounds.csv", "plotdata/bounds.csv");
    bool moments = copyIfPresent("moments.csv", "plotdata/moments.csv");
    bool ledger = false;
    {
        fs::path p = sink.dir / "ledger.csv";
        if (fs::exists(p)) {
            ledger = true;
            std::istringstream in(io::readFile(p.string()));
            std::ostringstream out;
            std::string line;
            bool first = true;
            while (std::getline(in, line)) {
                if (first) {
                    out << "t,mass\n";
                    first = false;
                    continue;
                }
                size_t c1 = line.find(',');
                size_t c2 = line.find(',', c1 + 1);
                if (c1 != std::string::npos && c2 != std::string::npos)
                    out << line.substr(0, c2) << '\n';
            }
            sink.write("plotdata/mass.csv", out.str());
        }
    }

    md << "## available artifacts\n\n";
    md << "- bounds.csv: " << (bounds ? "yes (see plotdata/bounds.csv)" : "not generated") << "\n";
    md << "- moments.csv: " << (moments ? "yes (see plotdata/moments.csv)" : "not generated") << "\n";
    md << "- ledger.csv: " << (ledger ? "yes (mass series in plotdata/mass.csv)" : "not generated")
       << "\n";

    fs::path certPath = sink.dir / "certificate.json";
    if (fs::exists(certPath)) {
        md << "\n## certificates\n\n```json\n" << io::readFile(certPath.string()) << "```\n";
    }
    fs::path verPath = sink.dir / "verification.json";
    if (fs::exists(verPath)) {
        auto v = nlohmann::json::parse(io::readFile(verPath.string()));
        md << "\n## envelope verification\n\n";
        md << "- pass: " << (v.value("pass", false) ? "yes" : "no") << "\n";
        md << "- max ratio: " << v.value("max_ratio", 0.0) << "\n";
        md << "- slack: " << v.value("slack", 0.0) << "\n";
    }
    if (bounds && moments)
        md << "\n## moment vs bound\n\nplot plotdata/moments.csv (moment_r) against "
              "plotdata/bounds.csv columns on the shared t axis.\n";
    sink.write("report.md", md.str());
    return 0;
}

} // namespace

PipelineOutcome runPipeline(const ProblemSpec& spec, PipelineMode mode,
                            const PipelineOptions& opt) {
    PipelineOutcome out;
    std::string dir = opt.outDir.empty() ? spec.outputDir : opt.outDir;
    if (opt.threads < 1) {
        out.exitCode = 2;
        out.message = "--threads must be >= 1";
        return out;
    }
    try {
        fs::create_directories(dir);
        Sink sink{fs::path(dir), &out.artifacts};
        switch (mode) {
            case PipelineMode::Bounds:
                out.exitCode = doBounds(spec, sink);
                break;
            case PipelineMode::Simulate:
                out.exitCode = doSimulate(spec, sink);
                break;
            case PipelineMode::Verify:
                out.exitCode = doVerify(spec, sink, opt.slack);
                break;
            case PipelineMode::Report:
                out.exitCode = doReport(spec, sink);
                break;
        }
        if (out.exitCode == 1) out.message = "verification failed";
    } catch (const std::exception& e) {
        out.exitCode = 3;
        out.message = e.what();
        log::error(e.what());
        try {
            ordered_json err;
            err["error"] = e.what();
            err["mode"] = static_cast<int>(mode);
            io::writeFile((fs::path(dir) / "error.json").string(), err.dump(2) + "\n");
            out.artifacts.push_back((fs::path(dir) / "error.json").string());
        } catch (...) {
            // the error record is best-effort
        }
    }
    return out;
}

} // namespace fpk
