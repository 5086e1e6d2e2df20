#include "stein_harness/json_io.hpp"

#include <cmath>
#include <limits>

namespace stein::harness {

namespace {

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json nums(const std::vector<double>& xs) {
    json a = json::array();
    for (double v : xs) a.push_back(num(v));
    return a;
}

json vec(const Vec& v) {
    json a = json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
    return a;
}

}  // namespace

double number_or_nan(const json& j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

json to_json(const McEstimate& e) {
    return {{"value", num(e.value)}, {"std_error", num(e.std_error)}, {"n_samples", e.n_samples}, {"t", e.t}, {"seed", e.seed}};
}

json to_json(const FdComparison& c) {
    return {{"estimator", to_json(c.estimator)},
            {"finite_difference", to_json(c.finite_difference)},
            {"difference", to_json(c.difference)},
            {"agrees_3se", c.agrees(3.0)}};
}

json to_json(const SteinConstants& c) {
    json log = json::array();
    for (const auto& [k, v] : c.log) log.push_back({{"name", k}, {"value", num(v)}});
    return {{"valid", c.valid},
            {"compact", c.compact},
            {"K", c.K},
            {"norms",
             {{"R", c.norms.R}, {"nabla_R", c.norms.nabla_R}, {"T", c.norms.T}, {"nabla_T", c.norms.nabla_T},
              {"source", c.norms.source}}},
            {"C0", num(c.C0)},
            {"C1", num(c.C1)},
            {"C2", num(c.C2)},
            {"C3", num(c.C3)},
            {"rate", num(c.rate)},
            {"gap", num(c.gap)},
            {"eps", num(c.eps)},
            {"grad", num(c.grad)},
            {"c1", num(c.c1)},
            {"c2", num(c.c2)},
            {"c3", num(c.c3)},
            {"c4", num(c.c4)},
            {"C", num(c.C)},
            {"C_c2", num(c.C_c2)},
            {"log", log}};
}

SteinConstants constants_from_json(const json& j) {
    SteinConstants c;
    c.valid = j.at("valid").get<bool>();
    c.compact = j.at("compact").get<bool>();
    c.K = j.at("K").get<double>();
    const json& n = j.at("norms");
    c.norms.R = n.at("R").get<double>();
    c.norms.nabla_R = n.at("nabla_R").get<double>();
    c.norms.T = n.at("T").get<double>();
    c.norms.nabla_T = n.at("nabla_T").get<double>();
    c.norms.source = n.at("source").get<std::string>();
    c.C0 = number_or_nan(j.at("C0"));
    c.C1 = number_or_nan(j.at("C1"));
    c.C2 = number_or_nan(j.at("C2"));
    c.C3 = number_or_nan(j.at("C3"));
    c.rate = number_or_nan(j.at("rate"));
    c.gap = number_or_nan(j.at("gap"));
    c.eps = number_or_nan(j.at("eps"));
    c.grad = number_or_nan(j.at("grad"));
    c.c1 = number_or_nan(j.at("c1"));
    c.c2 = number_or_nan(j.at("c2"));
    c.c3 = number_or_nan(j.at("c3"));
    c.c4 = number_or_nan(j.at("c4"));
    c.C = number_or_nan(j.at("C"));
    c.C_c2 = number_or_nan(j.at("C_c2"));
    for (const json& e : j.at("log")) c.log.emplace_back(e.at("name").get<std::string>(), number_or_nan(e.at("value")));
    return c;
}

json to_json(const SteinReport& r) {
    return {{"e_abs_r1", num(r.e_abs_r1)},
            {"e_abs_r1_se", num(r.e_abs_r1_se)},
            {"e_abs_r2", num(r.e_abs_r2)},
            {"e_abs_r2_se", num(r.e_abs_r2_se)},
            {"third_moment_term", num(r.third_moment_term)},
            {"third_moment_term_se", num(r.third_moment_term_se)},
            {"four_term_bound", num(r.four_term_bound)},
            {"bound", num(r.bound)},
            {"metric_kind", metric_kind_name(r.metric_kind)},
            {"lambda", r.lambda},
            {"n_base", r.n_base},
            {"m_cond", r.m_cond},
            {"discard_fraction", r.discard_fraction},
            {"seed", r.seed},
            {"constants", to_json(r.constants)},
            {"notes", r.notes}};
}

SteinReport report_from_json(const json& j) {
    SteinReport r;
    r.e_abs_r1 = number_or_nan(j.at("e_abs_r1"));
    r.e_abs_r1_se = number_or_nan(j.at("e_abs_r1_se"));
    r.e_abs_r2 = number_or_nan(j.at("e_abs_r2"));
    r.e_abs_r2_se = number_or_nan(j.at("e_abs_r2_se"));
    r.third_moment_term = number_or_nan(j.at("third_moment_term"));
    r.third_moment_term_se = number_or_nan(j.at("third_moment_term_se"));
    r.four_term_bound = number_or_nan(j.at("four_term_bound"));
    r.bound = number_or_nan(j.at("bound"));
    r.metric_kind = parse_metric_kind(j.at("metric_kind").get<std::string>());
    r.lambda = j.at("lambda").get<double>();
    r.n_base = j.at("n_base").get<std::size_t>();
    r.m_cond = j.at("m_cond").get<int>();
    r.discard_fraction = j.at("discard_fraction").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.constants = constants_from_json(j.at("constants"));
    r.notes = j.at("notes").get<std::vector<std::string>>();
    return r;
}

json to_json(const IdentityReport& r) {
    json j;
    const auto v = r.values();
    for (std::size_t i = 0; i < v.size(); ++i) j[IdentityReport::names()[i]] = num(v[i]);
    j["max"] = num(r.max());
    return j;
}

json to_json(const L2DecayReport& r) {
    json pts = json::array();
    for (const auto& p : r.points)
        pts.push_back({{"t", p.t}, {"norm", num(p.norm)}, {"std_error", num(p.std_error)}, {"bound", num(p.bound)},
                       {"holds", p.holds}});
    return {{"gap", r.gap},
            {"variance", num(r.variance)},
            {"fitted_rate", num(r.fitted_rate)},
            {"start_nodes", r.start_nodes},
            {"paths_per_node", r.paths_per_node},
            {"all_hold", r.all_hold()},
            {"points", pts}};
}

json to_json(const DecayFit& f) {
    return {{"order", f.order},
            {"t_grid", nums(f.t_grid)},
            {"sup_estimates", nums(f.sup_estimates)},
            {"sup_std_errors", nums(f.sup_std_errors)},
            {"f_derivative", nums(f.f_derivative)},
            {"fitted_rate", num(f.fitted_rate)},
            {"fitted_smallt_exponent", num(f.fitted_smallt_exponent)}};
}

json to_json(const SteinSolution& s) {
    return {{"f", num(s.f)},
            {"f_std_error", num(s.f_std_error)},
            {"df", vec(s.df)},
            {"df_std_error", vec(s.df_std_error)},
            {"tail_bound", num(s.tail_bound)},
            {"quadrature_error", num(s.quadrature_error)},
            {"mu_h", num(s.mu_h)},
            {"mu_h_std_error", num(s.mu_h_std_error)},
            {"t_max", s.t_max}};
}

}  // namespace stein::harness
