#ifndef RHEM_MODEL_SPEC_HPP
#define RHEM_MODEL_SPEC_HPP

#include "rhem/fit.hpp"
#include "rhem/sim.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>

namespace rhem {

/// {family, terms:[{type, covariate, num_basis?, degree?, grouping?}],
///  double_penalty, criterion, include_intercept?}
ModelSpec model_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ModelSpec& spec);
ModelSpec read_model_spec(const std::string& path);

nlohmann::json to_json(const FitResult& fit);
void write_coefficients(std::ostream& out, const FitResult& fit);
void write_curve(std::ostream& out, const SmoothCurve& curve);

/*
 * {baseline, linear:[{covariate, coefficient}],
 *  smooth:[{covariate, shape: "logistic", center, rate, scale?}],
 *  class_offsets:{class: offset}}
 * The logistic shape is scale / (1 + exp(rate (x - center))).
 */
IntensityModel intensity_model_from_json(const nlohmann::json& j);
nlohmann::json describe(const IntensityModel& model);

} // namespace rhem

#endif
