#pragma once

#include <json.hpp>
#include <string>

#include "qmeas/dynamics.hpp"

namespace qmeas {

using json = nlohmann::json;

/// Matrices travel as flat row-major [re, im] pairs plus the dimension.
json matrix_to_json(const ComplexMatrix& m);
ComplexMatrix matrix_from_json(const json& j);

json vector_to_json(const Eigen::VectorXcd& v);
Eigen::VectorXcd vector_from_json(const json& j);

/// Schedules round-trip bit-faithfully for doubles (shortest-representation
/// number printing re-parses to the identical bits).
json schedule_to_json(const ControlSchedule& s);
ControlSchedule schedule_from_json(const json& j,
                                   const Tolerances& tol = default_tolerances());

/// Write via a temp file and rename, so readers never observe partial output.
void atomic_write(const std::string& path, const std::string& contents);

}  // namespace qmeas
