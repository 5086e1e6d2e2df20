#pragma once

#include "stein/paths.hpp"
#include "stein_harness/config.hpp"

#include <string>
#include <vector>

namespace stein::harness {

struct RunOptions {
    int workers = 0;
    bool strict = true;
};

// Result of one run. `result` is the full JSON document written to result.json; `csv` holds an
// optional series (t,value,std_error) and `paths` an optional binary path dump.
struct RunOutput {
    json result;
    std::string csv;
    std::vector<DiffusionPath> paths;
    bool failed = false;  // suite runs with a failing criterion
};

// Executes c.operation. Config problems raise ConfigError, numerical failures stein::Error.
// The document embeds operation, config, config_hash, seed and library version; it does not depend
// on the worker count.
RunOutput run_operation(const ExperimentConfig& c, const RunOptions& opt);

// Writes result.json (plus series.csv / paths.bin when present) into dir, creating it if needed.
void write_outputs(const RunOutput& out, const std::string& dir);

const char* library_version();

}  // namespace stein::harness
