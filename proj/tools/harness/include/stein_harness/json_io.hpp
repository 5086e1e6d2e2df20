#pragma once

#include "stein/identities.hpp"
#include "stein/semigroup.hpp"
#include "stein/spectral.hpp"
#include "stein/stein_bound.hpp"

#include <json.hpp>

namespace stein::harness {

using json = nlohmann::json;

json to_json(const McEstimate& e);
json to_json(const FdComparison& c);
json to_json(const SteinConstants& c);
json to_json(const SteinReport& r);
json to_json(const IdentityReport& r);
json to_json(const L2DecayReport& r);
json to_json(const DecayFit& f);
json to_json(const SteinSolution& s);

SteinConstants constants_from_json(const json& j);
SteinReport report_from_json(const json& j);

// Non-finite doubles become null in JSON; read them back as NaN.
double number_or_nan(const json& j);

}  // namespace stein::harness
