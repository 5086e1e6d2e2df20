#include "stein/types.hpp"
#include "stein_harness/config.hpp"
#include "stein_harness/operations.hpp"
#include "stein_harness/suites.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

using namespace stein;
using namespace stein::harness;

namespace {

struct Flags {
    std::string config_file;
    std::string preset;
    std::string manifold;
    std::string out;
    std::string quantity;
    std::string suite_name;
    std::optional<std::uint64_t> seed;
    std::optional<double> lambda;
    std::optional<double> scale;
    int workers = 0;
    bool strict = false;
};

ExperimentConfig load_config(const std::string& op, const Flags& f) {
    ExperimentConfig c;
    if (!f.config_file.empty()) {
        std::ifstream is(f.config_file);
        if (!is) throw ConfigError("cannot read config file '" + f.config_file + "'");
        json j;
        try {
            j = json::parse(is);
        } catch (const json::parse_error& e) {
            throw ConfigError(std::string("config is not valid JSON: ") + e.what());
        }
        c = parse_config(j);
    } else if (!f.preset.empty()) {
        c = preset(f.preset);
    } else {
        json j{{"operation", op}};
        if (!f.manifold.empty()) j["manifold"] = f.manifold;
        c = parse_config(j);
    }
    if (c.operation != op)
        throw ConfigError("config operation '" + c.operation + "' does not match subcommand '" + op + "'");
    if (!f.manifold.empty() && (!f.config_file.empty() || !f.preset.empty())) {
        c.manifold = manifold_shorthand(f.manifold);
        build_manifold(c.manifold);
    }
    if (!f.quantity.empty()) c.params["quantity"] = f.quantity;
    if (!f.suite_name.empty()) c.params["name"] = f.suite_name;
    if (f.scale) c.params["scale"] = *f.scale;
    if (f.lambda) {
        if (!c.params.contains("sampler")) throw ConfigError("--lambda needs a config with a pair sampler");
        c.params["sampler"]["lambda"] = *f.lambda;
    }
    if (f.seed) {
        c.seed = f.seed;
    } else if (!c.seed) {
        if (const char* env = std::getenv("STEIN_SEED")) {
            try {
                std::size_t pos = 0;
                const unsigned long long v = std::stoull(env, &pos);
                if (pos != std::string(env).size()) throw std::invalid_argument("trailing characters");
                c.seed = v;
            } catch (const std::exception&) {
                throw ConfigError("STEIN_SEED must be an unsigned integer");
            }
        }
    }
    // Re-validate after overrides.
    return parse_config(config_to_json(c));
}

int emit_error(const char* name, const std::string& message, int code) {
    std::cerr << json{{"error", name}, {"message", message}}.dump() << "\n";
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Diffusion semigroup estimators, explicit Stein bounds and verification suites"};
    app.set_version_flag("--version", std::string(library_version()));
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand
    Flags f;
    app.add_option("--config", f.config_file, "JSON experiment config")->check(CLI::ExistingFile);
    app.add_option("--preset", f.preset, "named configuration")->check(CLI::IsMember(preset_names()));
    app.add_option("--manifold", f.manifold, "manifold shorthand: sphere2, hyperbolic3, circle, euclidean1..3");
    app.add_option("--seed", f.seed, "master seed (falls back to STEIN_SEED)");
    app.add_option("--out", f.out, "output directory for result.json and series/summary CSV");
    app.add_option("--workers", f.workers, "worker threads (0 = available parallelism)")->check(CLI::NonNegativeNumber);
    app.add_flag("--strict", f.strict, "index-ordered reductions (the default; kept for explicitness)");
    app.add_option("--lambda", f.lambda, "override the pair-sampler step variance");

    std::vector<CLI::App*> subs;
    subs.push_back(app.add_subcommand("verify-geometry", "roundtrip, transport, curvature and identity residuals"));
    subs.push_back(app.add_subcommand("simulate", "simulate diffusion paths and write a binary path dump"));
    auto* est = app.add_subcommand("estimate", "Monte Carlo P_t f and Bismut derivative estimators");
    est->add_option("quantity", f.quantity, "ptf | grad | hess | third")
        ->check(CLI::IsMember({"ptf", "grad", "hess", "third"}));
    subs.push_back(est);
    subs.push_back(app.add_subcommand("solve-stein", "Stein equation solution and its gradient"));
    subs.push_back(app.add_subcommand("decay-profile", "large-t rate and small-t exponent fits"));
    subs.push_back(app.add_subcommand("stein-bound", "explicit Wasserstein bound from exchangeable pairs"));
    auto* spec = app.add_subcommand("spectral", "spectral gap, L2 decay, heat kernel, Bakry-Emery check");
    spec->add_option("quantity", f.quantity, "gap | decay | kernel | bakry-emery")
        ->check(CLI::IsMember({"gap", "decay", "kernel", "bakry-emery"}));
    subs.push_back(spec);
    auto* suite = app.add_subcommand("suite", "acceptance batteries");
    std::vector<std::string> suites = suite_names();
    suites.push_back("all");
    suite->add_option("name", f.suite_name, "geometry | martingales | derivatives | decay | compact | bounds | all")
        ->check(CLI::IsMember(suites));
    suite->add_option("--scale", f.scale, "multiplier for sample counts");
    subs.push_back(suite);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    std::string op;
    for (auto* s : subs)
        if (s->parsed()) op = s->get_name();

    try {
        ExperimentConfig c = load_config(op, f);
        RunOptions ro;
        ro.workers = f.workers;
        ro.strict = true;
        const RunOutput out = run_operation(c, ro);
        const std::string dir = !f.out.empty() ? f.out : c.output;
        if (!dir.empty()) {
            write_outputs(out, dir);
        } else {
            std::cout << out.result.dump(2) << "\n";
        }
        if (op == "suite") std::cerr << out.csv;
        return out.failed ? 1 : 0;
    } catch (const ConfigError& e) {
        return emit_error("ConfigError", e.what(), 2);
    } catch (const Error& e) {
        return emit_error(e.name(), e.what(), 3);
    } catch (const std::exception& e) {
        return emit_error("RuntimeError", e.what(), 3);
    }
}
