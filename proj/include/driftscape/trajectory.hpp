#ifndef DRIFTSCAPE_TRAJECTORY_HPP
#define DRIFTSCAPE_TRAJECTORY_HPP

#include <array>
#include <string>
#include <vector>

#include "driftscape/types.hpp"

namespace driftscape {

/// A single track: strictly increasing timestamps with matching positions.
struct Track {
  std::string id;
  std::vector<double> times;
  std::vector<Vec2> points;
};

/// G independent tracks of time-stamped 2-D positions, irregular steps.
struct TrajectorySet {
  std::vector<Track> tracks;

  long segment_count() const;

  /// Throws EmptyData / TooFewPoints / UnsortedTimes on malformed sets.
  void validate() const;
};

/// One observation step.
struct Segment {
  Vec2 start;
  Vec2 end;
  double dt;
};

/// All segments of the set, in (track, index) order.
std::vector<Segment> all_segments(const TrajectorySet& data);

/// High-frequency estimator of gamma^2: sum ||dx||^2 / (2 sum dt).
/// The factor 2 accounts for the two coordinates.
double quadratic_variation_gamma_sq(const TrajectorySet& data);

/// Scales every position by the given factor (used for Y = X / gamma).
TrajectorySet scale_positions(const TrajectorySet& data, double factor);

/// Axis-aligned bounding box over all positions: {xmin, xmax, ymin, ymax}.
std::array<double, 4> bounding_box(const TrajectorySet& data);

}  // namespace driftscape

#endif
