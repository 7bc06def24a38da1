#include "fpk/csvio.hpp"
#include "fpk/log.hpp"
#include "fpk/pipeline.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"fpk_certify: a priori moment/density bounds for "
                 "Fokker-Planck-Kolmogorov models and a desk-scale solver to test them"};
    app.require_subcommand(1);

    std::string specPath, outDir;
    double slack = -1;
    int threads = 1;
    unsigned seed = 0;

    auto addCommon = [&](CLI::App* sub) {
        sub->add_option("--spec", specPath, "problem specification file")->required();
        sub->add_option("--out", outDir, "output directory (default: the spec's output.dir)");
        sub->add_option("--threads", threads, "worker hint; pipelines stay deterministic");
        sub->add_option("--seed", seed, "reserved; current pipelines are deterministic");
        return sub;
    };

    addCommon(app.add_subcommand("bounds", "evaluate the selected analytic bounds over time"));
    addCommon(app.add_subcommand("simulate", "run the finite-volume solver and export snapshots"));
    auto* verify = addCommon(
        app.add_subcommand("verify", "fit and check the density envelope against solver output"));
    verify->add_option("--slack", slack, "allowed ratio excess over 1 (overrides verify.slack)");
    addCommon(app.add_subcommand("report", "aggregate prior outputs into report.md + plot data"));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;   // usage errors map to exit code 2
    }

    std::string modeName = app.get_subcommands().front()->get_name();

    std::string text;
    try {
        text = fpk::io::readFile(specPath);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    auto parsed = fpk::parseSpec(text);
    if (!parsed.ok) {
        std::cerr << "spec errors in " << specPath << ":\n";
        for (const auto& err : parsed.errors) {
            std::cerr << "  ";
            if (err.line > 0) std::cerr << specPath << ":" << err.line << ":" << err.column << ": ";
            std::cerr << err.message << "\n";
        }
        return 2;
    }

    fpk::PipelineOptions opt;
    opt.outDir = outDir;
    opt.slack = slack;
    opt.threads = threads;
    opt.seed = seed;

    auto outcome = fpk::runPipeline(parsed.spec, fpk::parsePipelineMode(modeName), opt);
    if (!outcome.message.empty()) std::cerr << outcome.message << "\n";
    for (const auto& f : outcome.artifacts) fpk::log::info("wrote " + f);
    return outcome.exitCode;
}
