#include "stein_harness/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace stein::harness {

namespace {

const json& field(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.contains(key)) throw ConfigError(where + ": missing field '" + key + "'");
    return obj.at(key);
}

double as_double(const json& j, const std::string& what) {
    if (!j.is_number()) throw ConfigError(what + " must be a number");
    return j.get<double>();
}

int as_int(const json& j, const std::string& what) {
    if (!j.is_number_integer()) throw ConfigError(what + " must be an integer");
    return j.get<int>();
}

std::string kind_of(const json& spec, const std::string& where) {
    if (!spec.is_object()) throw ConfigError(where + " must be an object");
    const json& k = field(spec, "kind", where);
    if (!k.is_string()) throw ConfigError(where + ".kind must be a string");
    return k.get<std::string>();
}

Vec default_point(const Manifold& M) {
    switch (M.kind()) {
    case ManifoldKind::Sphere: {
        Vec p(M.ambient_dim());
        p.setZero();
        p(M.ambient_dim() - 1) = 1.0;
        p(0) = 0.3;
        return M.project_point(p);
    }
    case ManifoldKind::Hyperbolic: {
        Vec p = Vec::Zero(M.ambient_dim());
        p(0) = 1.0 / std::sqrt(-M.sectional_curvature());
        return p;
    }
    case ManifoldKind::Circle:
        return Vec::Constant(1, 0.5);
    default:
        return Vec::Zero(M.dim());
    }
}

ScalarField circle_trig(double L, double k, bool sine) {
    const double w = 2.0 * M_PI * k / L;
    ScalarField f;
    if (sine) {
        f.value = [w](const Vec& x) { return std::sin(w * x(0)); };
        f.differential = [w](const Vec& x) { return Vec::Constant(1, w * std::cos(w * x(0))).eval(); };
        f.ambient_hessian = [w](const Vec& x) { return Mat::Constant(1, 1, -w * w * std::sin(w * x(0))).eval(); };
    } else {
        f.value = [w](const Vec& x) { return std::cos(w * x(0)); };
        f.differential = [w](const Vec& x) { return Vec::Constant(1, -w * std::sin(w * x(0))).eval(); };
        f.ambient_hessian = [w](const Vec& x) { return Mat::Constant(1, 1, -w * w * std::cos(w * x(0))).eval(); };
    }
    return f;
}

}  // namespace

Vec start_point(const json& params, const Manifold& M) {
    if (!params.contains("x")) return default_point(M);
    const Vec x = json_vec(params.at("x"));
    if (x.size() != M.ambient_dim()) throw ConfigError("params.x has the wrong dimension");
    if (M.constraint_residual(x) > 1e-8) throw ConfigError("params.x is not on the manifold");
    return M.project_point(x);
}

void require_keys(const json& obj, const std::vector<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be an object");
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
            throw ConfigError(where + ": unknown field '" + it.key() + "'");
}

const std::vector<std::string>& operation_names() {
    static const std::vector<std::string> names{"verify-geometry", "simulate",    "estimate", "solve-stein",
                                                "decay-profile",   "stein-bound", "spectral", "suite"};
    return names;
}

Vec json_vec(const json& j) {
    if (!j.is_array()) throw ConfigError("expected an array of numbers");
    if (j.size() > std::size_t(kMaxAmbient)) throw ConfigError("vector longer than the supported dimension");
    Vec v(int(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(int(i)) = as_double(j[i], "vector entry");
    return v;
}

Mat json_mat(const json& j) {
    if (!j.is_array() || j.empty() || !j[0].is_array()) throw ConfigError("expected an array of rows");
    const int r = int(j.size()), c = int(j[0].size());
    if (r > kMaxAmbient || c > kMaxAmbient) throw ConfigError("matrix larger than the supported dimension");
    Mat m(r, c);
    for (int i = 0; i < r; ++i) {
        if (!j[i].is_array() || int(j[i].size()) != c) throw ConfigError("ragged matrix");
        for (int k = 0; k < c; ++k) m(i, k) = as_double(j[i][k], "matrix entry");
    }
    return m;
}

json vec_json(const Vec& v) {
    json a = json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

json mat_json(const Mat& m) {
    json a = json::array();
    for (int i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (int k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
        a.push_back(row);
    }
    return a;
}

double param_double(const json& p, const std::string& key, double fallback) {
    if (!p.contains(key)) return fallback;
    return as_double(p.at(key), "params." + key);
}

std::size_t param_size(const json& p, const std::string& key, std::size_t fallback) {
    if (!p.contains(key)) return fallback;
    const json& v = p.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError("params." + key + " must be a non-negative integer");
    return v.get<std::size_t>();
}

std::string param_string(const json& p, const std::string& key, const std::string& fallback) {
    if (!p.contains(key)) return fallback;
    if (!p.at(key).is_string()) throw ConfigError("params." + key + " must be a string");
    return p.at(key).get<std::string>();
}

std::vector<double> param_doubles(const json& p, const std::string& key, const std::vector<double>& fallback) {
    if (!p.contains(key)) return fallback;
    const json& a = p.at(key);
    if (!a.is_array()) throw ConfigError("params." + key + " must be an array");
    std::vector<double> out;
    for (const json& v : a) out.push_back(as_double(v, "params." + key));
    return out;
}

// ---- config parsing --------------------------------------------------------------

ExperimentConfig parse_config(const json& j) {
    require_keys(j, {"operation", "manifold", "potential", "params", "n_samples", "steps_per_unit_time", "seed", "output"},
                 "config");
    ExperimentConfig c;
    const json& op = field(j, "operation", "config");
    if (!op.is_string()) throw ConfigError("config.operation must be a string");
    c.operation = op.get<std::string>();
    const auto& ops = operation_names();
    if (std::find(ops.begin(), ops.end(), c.operation) == ops.end())
        throw ConfigError("unknown operation '" + c.operation + "'");
    if (j.contains("manifold")) {
        c.manifold = j.at("manifold").is_string() ? manifold_shorthand(j.at("manifold").get<std::string>()) : j.at("manifold");
        build_manifold(c.manifold);  // validates
    } else if (c.operation != "suite") {
        throw ConfigError("config: missing field 'manifold'");
    }
    c.potential = j.contains("potential") ? j.at("potential") : json{{"kind", "zero"}};
    if (c.manifold.is_object()) build_potential(c.potential, *build_manifold(c.manifold));
    if (j.contains("params")) {
        if (!j.at("params").is_object()) throw ConfigError("config.params must be an object");
        c.params = j.at("params");
    }
    if (j.contains("n_samples")) {
        const json& n = j.at("n_samples");
        if (!n.is_number_integer() || n.get<long long>() < 1) throw ConfigError("n_samples must be a positive integer");
        c.n_samples = n.get<std::size_t>();
    }
    if (j.contains("steps_per_unit_time")) {
        c.steps_per_unit_time = as_double(j.at("steps_per_unit_time"), "steps_per_unit_time");
        if (!(c.steps_per_unit_time > 0.0)) throw ConfigError("steps_per_unit_time must be positive");
    }
    if (j.contains("seed")) {
        const json& s = j.at("seed");
        if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
            throw ConfigError("seed must be a non-negative integer");
        c.seed = s.get<std::uint64_t>();
    }
    if (j.contains("output")) {
        if (!j.at("output").is_string()) throw ConfigError("output must be a string");
        c.output = j.at("output").get<std::string>();
    }
    return c;
}

json config_to_json(const ExperimentConfig& c) {
    json j;
    j["operation"] = c.operation;
    if (!c.manifold.is_null()) j["manifold"] = c.manifold;
    j["potential"] = c.potential;
    j["params"] = c.params;
    j["n_samples"] = c.n_samples;
    j["steps_per_unit_time"] = c.steps_per_unit_time;
    if (c.seed) j["seed"] = *c.seed;
    if (!c.output.empty()) j["output"] = c.output;
    return j;
}

std::string config_hash(const ExperimentConfig& c) {
    json j = config_to_json(c);
    j.erase("output");
    const std::string s = j.dump();  // keys are sorted, so the dump is canonical
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---- builders --------------------------------------------------------------------

json manifold_shorthand(const std::string& name) {
    if (name == "sphere2") return {{"kind", "sphere"}, {"dim", 2}, {"kappa", 1.0}};
    if (name == "hyperbolic3") return {{"kind", "hyperbolic3"}, {"kappa", -1.0}};
    if (name == "circle") return {{"kind", "circle"}, {"circumference", 2.0 * M_PI}};
    if (name == "euclidean1") return {{"kind", "euclidean"}, {"dim", 1}};
    if (name == "euclidean2") return {{"kind", "euclidean"}, {"dim", 2}};
    if (name == "euclidean3") return {{"kind", "euclidean"}, {"dim", 3}};
    throw ConfigError("unknown manifold shorthand '" + name + "'");
}

ManifoldPtr build_manifold(const json& spec) {
    const std::string kind = kind_of(spec, "manifold");
    try {
        if (kind == "euclidean") {
            require_keys(spec, {"kind", "dim"}, "manifold");
            return make_manifold(ManifoldSpec::euclidean(as_int(field(spec, "dim", "manifold"), "manifold.dim")));
        }
        if (kind == "sphere") {
            require_keys(spec, {"kind", "dim", "kappa"}, "manifold");
            return make_manifold(ManifoldSpec::sphere(as_int(field(spec, "dim", "manifold"), "manifold.dim"),
                                                      as_double(field(spec, "kappa", "manifold"), "manifold.kappa")));
        }
        if (kind == "hyperbolic3") {
            require_keys(spec, {"kind", "kappa"}, "manifold");
            return make_manifold(ManifoldSpec::hyperbolic3(as_double(field(spec, "kappa", "manifold"), "manifold.kappa")));
        }
        if (kind == "circle") {
            require_keys(spec, {"kind", "circumference"}, "manifold");
            return make_manifold(
                ManifoldSpec::circle(as_double(field(spec, "circumference", "manifold"), "manifold.circumference")));
        }
        if (kind == "chart_diffusion") {
            require_keys(spec, {"kind", "dim", "sigma", "kappa", "domain_lo", "domain_hi"}, "manifold");
            const int n = as_int(field(spec, "dim", "manifold"), "manifold.dim");
            const std::string sigma = field(spec, "sigma", "manifold").get<std::string>();
            SigmaField sf;
            if (sigma == "identity") {
                sf = [n](const Vec&) { return Mat(Mat::Identity(n, n)); };
            } else if (sigma == "stereographic") {
                // Conformal factor of a constant-curvature chart: sigma = (1 + kappa |y|^2) / 2 I.
                const double k = spec.contains("kappa") ? as_double(spec.at("kappa"), "manifold.kappa") : 1.0;
                sf = [n, k](const Vec& y) { return Mat(Mat::Identity(n, n) * (1.0 + k * y.squaredNorm()) / 2.0); };
            } else {
                throw ConfigError("manifold.sigma must be 'identity' or 'stereographic'");
            }
            const Vec lo = spec.contains("domain_lo") ? json_vec(spec.at("domain_lo")) : Vec::Constant(n, -10.0);
            const Vec hi = spec.contains("domain_hi") ? json_vec(spec.at("domain_hi")) : Vec::Constant(n, 10.0);
            return make_manifold(ManifoldSpec::chart_diffusion(n, sf, lo, hi));
        }
    } catch (const Error& e) {
        throw ConfigError(std::string("manifold: ") + e.what());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("manifold: ") + e.what());
    }
    throw ConfigError("unknown manifold kind '" + kind + "'");
}

PotentialSpec build_potential(const json& spec, const Manifold& M) {
    const std::string kind = kind_of(spec, "potential");
    if (kind == "zero") {
        require_keys(spec, {"kind", "K"}, "potential");
        return PotentialSpec::zero(spec.contains("K") ? as_double(spec.at("K"), "potential.K") : 0.0);
    }
    if (kind == "gaussian") {
        require_keys(spec, {"kind", "A", "y"}, "potential");
        if (M.kind() != ManifoldKind::Euclidean) throw ConfigError("gaussian potential needs a euclidean manifold");
        const Mat A = json_mat(field(spec, "A", "potential"));
        const Vec y = spec.contains("y") ? json_vec(spec.at("y")) : Vec::Zero(M.dim());
        if (A.rows() != M.dim() || A.cols() != M.dim() || y.size() != M.dim())
            throw ConfigError("gaussian potential dimensions do not match the manifold");
        return PotentialSpec::gaussian(A, y);
    }
    if (kind == "log_heat_kernel") {
        require_keys(spec, {"kind", "kappa", "t", "y"}, "potential");
        if (M.kind() != ManifoldKind::Hyperbolic) throw ConfigError("log_heat_kernel needs hyperbolic3");
        const double kappa = as_double(field(spec, "kappa", "potential"), "potential.kappa");
        const double t = as_double(field(spec, "t", "potential"), "potential.t");
        const Vec y = spec.contains("y") ? json_vec(spec.at("y")) : default_point(M);
        if (y.size() != M.ambient_dim()) throw ConfigError("potential.y must be a hyperboloid point");
        return PotentialSpec::log_heat_kernel(kappa, t, y);
    }
    throw ConfigError("unknown potential kind '" + kind + "'");
}

ScalarField build_function(const json& spec, const Manifold& M) {
    const std::string kind = kind_of(spec, "function");
    const int amb = M.ambient_dim();
    if (kind == "linear") {
        require_keys(spec, {"kind", "b", "c"}, "function");
        const Vec b = json_vec(field(spec, "b", "function"));
        if (b.size() != amb) throw ConfigError("function.b has the wrong dimension");
        return ScalarField::linear(b, spec.contains("c") ? as_double(spec.at("c"), "function.c") : 0.0);
    }
    if (kind == "coordinate") {
        require_keys(spec, {"kind", "index", "power"}, "function");
        const int i = as_int(field(spec, "index", "function"), "function.index");
        if (i < 0 || i >= amb) throw ConfigError("function.index out of range");
        const int k = spec.contains("power") ? as_int(spec.at("power"), "function.power") : 1;
        return ScalarField::coordinate_power(i, k);
    }
    if (kind == "sin" || kind == "cos") {
        require_keys(spec, {"kind", "frequency"}, "function");
        if (M.kind() != ManifoldKind::Circle) throw ConfigError("sin/cos test functions live on the circle");
        const double k = spec.contains("frequency") ? as_double(spec.at("frequency"), "function.frequency") : 1.0;
        return circle_trig(M.spec().circumference, k, kind == "sin");
    }
    if (kind == "quadratic") {
        require_keys(spec, {"kind", "Q", "b", "c"}, "function");
        const Mat Q = json_mat(field(spec, "Q", "function"));
        const Vec b = spec.contains("b") ? json_vec(spec.at("b")) : Vec::Zero(amb);
        if (Q.rows() != amb || Q.cols() != amb || b.size() != amb) throw ConfigError("function dimensions mismatch");
        return ScalarField::quadratic(Q, b, spec.contains("c") ? as_double(spec.at("c"), "function.c") : 0.0);
    }
    if (kind == "polynomial") {
        require_keys(spec, {"kind", "degree", "seed"}, "function");
        return random_polynomial(amb, spec.contains("degree") ? as_int(spec.at("degree"), "function.degree") : 3,
                                 spec.contains("seed") ? spec.at("seed").get<unsigned long long>() : 1ULL);
    }
    throw ConfigError("unknown function kind '" + kind + "'");
}

PairSampler build_sampler(const json& spec, const Manifold& M, const PotentialSpec& pot) {
    const std::string kind = kind_of(spec, "sampler");
    const double lambda = as_double(field(spec, "lambda", "sampler"), "sampler.lambda");
    if (!(lambda > 0.0)) throw ConfigError("sampler.lambda must be positive");
    if (kind == "circle_metropolis") {
        require_keys(spec, {"kind", "lambda", "burn_in", "start"}, "sampler");
        if (M.kind() != ManifoldKind::Circle) throw ConfigError("circle_metropolis needs a circle manifold");
        const int burn = spec.contains("burn_in") ? as_int(spec.at("burn_in"), "sampler.burn_in") : 0;
        const double start = spec.contains("start") ? as_double(spec.at("start"), "sampler.start") : 0.0;
        return circle_metropolis(M.spec().circumference, lambda, burn, start);
    }
    if (kind == "sphere_geodesic" || kind == "sphere_antipodal") {
        require_keys(spec, {"kind", "lambda", "p"}, "sampler");
        if (M.kind() != ManifoldKind::Sphere) throw ConfigError(kind + " needs a sphere manifold");
        if (kind == "sphere_geodesic") return sphere_geodesic_pairs(M.dim(), M.sectional_curvature(), lambda);
        return sphere_antipodal_pairs(M.dim(), M.sectional_curvature(), lambda,
                                      spec.contains("p") ? as_double(spec.at("p"), "sampler.p") : 0.2);
    }
    if (kind == "euclidean_gaussian") {
        require_keys(spec, {"kind", "lambda", "mean", "cov", "drift"}, "sampler");
        if (M.kind() != ManifoldKind::Euclidean) throw ConfigError("euclidean_gaussian needs a euclidean manifold");
        const int n = M.dim();
        const Vec mean = spec.contains("mean") ? json_vec(spec.at("mean")) : Vec::Zero(n);
        const Mat cov = spec.contains("cov") ? json_mat(spec.at("cov")) : Mat::Identity(n, n);
        if (mean.size() != n || cov.rows() != n || cov.cols() != n)
            throw ConfigError("sampler mean/cov dimensions do not match the manifold");
        const double drift = spec.contains("drift") ? as_double(spec.at("drift"), "sampler.drift") : 1.0;
        try {
            return euclidean_gaussian_pairs(pot, mean, cov, lambda, drift);
        } catch (const Error& e) {
            throw ConfigError(std::string("sampler: ") + e.what());
        }
    }
    throw ConfigError("unknown sampler kind '" + kind + "'");
}

// ---- presets ---------------------------------------------------------------------

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"circle-metropolis", "euclidean-gaussian", "sphere-uniform",
                                                "hyperbolic-heat-kernel", "circle-sin", "chart-diffusion"};
    return names;
}

ExperimentConfig preset(const std::string& name) {
    ExperimentConfig c;
    c.seed = 7;
    if (name == "circle-metropolis") {
        c.operation = "stein-bound";
        c.manifold = manifold_shorthand("circle");
        c.potential = {{"kind", "zero"}};
        c.params = {{"sampler", {{"kind", "circle_metropolis"}, {"lambda", 0.01}}},
                    {"n_base", 10000},
                    {"m_cond", 32},
                    {"metric", "wasserstein"}};
    } else if (name == "euclidean-gaussian") {
        c.operation = "estimate";
        c.manifold = manifold_shorthand("euclidean2");
        c.potential = {{"kind", "gaussian"}, {"A", {{1.0, 0.0}, {0.0, 1.0}}}, {"y", {0.0, 0.0}}};
        c.params = {{"quantity", "grad"},
                    {"x", {0.5, -0.3}},
                    {"f", {{"kind", "linear"}, {"b", {1.0, 2.0}}}},
                    {"t", 0.5},
                    {"u", {1.0, 0.0}}};
        c.n_samples = 10000;
    } else if (name == "sphere-uniform") {
        c.operation = "estimate";
        c.manifold = manifold_shorthand("sphere2");
        c.potential = {{"kind", "zero"}, {"K", 0.5}};
        c.params = {{"quantity", "hess"},
                    {"f", {{"kind", "coordinate"}, {"index", 2}}},
                    {"t", 0.5},
                    {"u", {1.0, 0.0}},
                    {"v", {0.0, 1.0}}};
        c.n_samples = 4000;
    } else if (name == "hyperbolic-heat-kernel") {
        c.operation = "spectral";
        c.manifold = manifold_shorthand("hyperbolic3");
        c.potential = {{"kind", "zero"}};
        c.params = {{"quantity", "bakry-emery"}, {"kappa", -1.0}, {"t_grid", {0.2, 0.5, 0.9}}, {"pairs", 1000}};
    } else if (name == "circle-sin") {
        c.operation = "spectral";
        c.manifold = manifold_shorthand("circle");
        c.potential = {{"kind", "zero"}};
        c.params = {{"quantity", "decay"}, {"f", {{"kind", "sin"}}}, {"t_grid", {0.5, 1.0, 2.0, 4.0}}};
        c.n_samples = 1000;
    } else if (name == "chart-diffusion") {
        c.operation = "verify-geometry";
        c.manifold = {{"kind", "chart_diffusion"}, {"dim", 2}, {"sigma", "stereographic"}, {"kappa", 1.0}};
        c.potential = {{"kind", "zero"}};
        c.params = {{"points", 20}, {"functions", 3}};
    } else {
        throw ConfigError("unknown preset '" + name + "'");
    }
    return c;
}

}  // namespace stein::harness
