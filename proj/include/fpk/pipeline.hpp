#pragma once

#include "fpk/problem_spec.hpp"

#include <string>
#include <vector>

namespace fpk {

enum class PipelineMode { Bounds, Simulate, Verify, Report };

struct PipelineOptions {
    std::string outDir;      // empty = spec's output.dir
    double slack = -1;       // >= 0 overrides verify.slack
    int threads = 1;         // accepted for interface stability; pipelines are deterministic
    unsigned seed = 0;       // reserved
};

// exit codes: 0 pass, 1 verification fail, 2 usage/spec error, 3 numerical failure
struct PipelineOutcome {
    int exitCode = 0;
    std::vector<std::string> artifacts;
    std::string message;
};

PipelineOutcome runPipeline(const ProblemSpec& spec, PipelineMode mode,
                            const PipelineOptions& opt = PipelineOptions());

PipelineMode parsePipelineMode(const std::string& name);

} // namespace fpk
