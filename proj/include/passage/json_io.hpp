// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include <json.hpp>

#include "passage/identify.hpp"
#include "passage/process.hpp"
#include "passage/verify.hpp"

namespace passage {

using nlohmann::json;

// Field names here are part of the config-file format; do not rename.
json triplet_to_json(const LevyTriplet& t);
LevyTriplet triplet_from_json(const json& j);

json spec_to_json(const ProcessSpec& spec);
ProcessSpec spec_from_json(const json& j);

json mc_report_to_json(const MCReport& r);           // wall_time excluded
json martingale_report_to_json(const MartingaleReport& r);
json multiplicativity_report_to_json(const MultiplicativityReport& r);
json fit_result_to_json(const FitResult& r);

/// CSV with columns x,l,q,value (leading '#' lines and a header row are
/// skipped on read).
TransformGrid transform_grid_from_csv(const std::string& text, double q_min);
std::string transform_grid_to_csv(const TransformGrid& grid);

/// Formats a double so that it round-trips exactly.
std::string format_double(double v);

}  // namespace passage
