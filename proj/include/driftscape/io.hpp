#ifndef DRIFTSCAPE_IO_HPP
#define DRIFTSCAPE_IO_HPP

#include <iosfwd>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "driftscape/estimate.hpp"
#include "driftscape/exact.hpp"
#include "driftscape/simbench.hpp"
#include "driftscape/trajectory.hpp"

namespace driftscape {

inline constexpr int kSchemaVersion = 1;

/// Shortest round-trip decimal rendering of a double.
std::string format_double(double v);

/// CSV trajectories, header `track_id,t,x,y`, `#` comment lines ignored.
/// Rows of one track must be contiguous with strictly increasing t.
TrajectorySet parse_trajectories(std::istream& in);
TrajectorySet parse_trajectories_file(const std::string& path);

void write_trajectories(std::ostream& out, const TrajectorySet& data);
void write_trajectories_file(const std::string& path,
                             const TrajectorySet& data);

/// Parameter record: {"gamma": g, "components": [{"weight", "center",
/// "information"}]}, matrices row-major.
nlohmann::json params_to_json(const ModelParams& theta);
ModelParams params_from_json(const nlohmann::json& j);

nlohmann::json fit_result_to_json(const FitResult& fit);
/// Reads theta from either a fit-result document or a bare parameter
/// record.
ModelParams params_from_document(const nlohmann::json& j);

nlohmann::json study_report_to_json(const StudyReport& report);

/// Grid CSV with columns x,y,value (midpoint coordinates).
void write_grid_csv(std::ostream& out, const GridSpec& grid,
                    const std::vector<double>& values);

struct RunConfig {
  Scenario scenario;
  StudyConfig study;
};

/// Study configuration document. Unknown keys anywhere are rejected.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& cfg);

nlohmann::json optimizer_config_to_json(const OptimizerConfig& cfg);
nlohmann::json em_config_to_json(const EmConfig& cfg);

}  // namespace driftscape

#endif
