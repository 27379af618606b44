#include "driftscape/trajectory.hpp"

#include <array>

#include "driftscape/errors.hpp"

namespace driftscape {

long TrajectorySet::segment_count() const {
  long n = 0;
  for (const auto& t : tracks) {
    n += static_cast<long>(t.times.size()) - 1;
  }
  return n;
}

void TrajectorySet::validate() const {
  if (tracks.empty()) throw EmptyData("trajectory set has no tracks");
  for (const auto& t : tracks) {
    if (t.times.size() != t.points.size()) {
      throw InvalidParameter("track '" + t.id + "': times/points mismatch");
    }
    if (t.times.size() < 2) throw TooFewPoints(t.id);
    for (std::size_t i = 1; i < t.times.size(); ++i) {
      if (!(t.times[i] > t.times[i - 1])) {
        throw UnsortedTimes("track '" + t.id + "': times must increase");
      }
    }
  }
}

std::vector<Segment> all_segments(const TrajectorySet& data) {
  std::vector<Segment> out;
  out.reserve(static_cast<std::size_t>(data.segment_count()));
  for (const auto& t : data.tracks) {
    for (std::size_t i = 0; i + 1 < t.times.size(); ++i) {
      out.push_back({t.points[i], t.points[i + 1], t.times[i + 1] - t.times[i]});
    }
  }
  return out;
}

double quadratic_variation_gamma_sq(const TrajectorySet& data) {
  data.validate();
  double sq = 0.0;
  double total_dt = 0.0;
  for (const auto& t : data.tracks) {
    for (std::size_t i = 0; i + 1 < t.times.size(); ++i) {
      sq += (t.points[i + 1] - t.points[i]).squaredNorm();
      total_dt += t.times[i + 1] - t.times[i];
    }
  }
  return sq / (2.0 * total_dt);
}

TrajectorySet scale_positions(const TrajectorySet& data, double factor) {
  TrajectorySet out = data;
  for (auto& t : out.tracks) {
    for (auto& p : t.points) p *= factor;
  }
  return out;
}

std::array<double, 4> bounding_box(const TrajectorySet& data) {
  data.validate();
  std::array<double, 4> box = {data.tracks[0].points[0].x(),
                               data.tracks[0].points[0].x(),
                               data.tracks[0].points[0].y(),
                               data.tracks[0].points[0].y()};
  for (const auto& t : data.tracks) {
    for (const auto& p : t.points) {
      box[0] = std::min(box[0], p.x());
      box[1] = std::max(box[1], p.x());
      box[2] = std::min(box[2], p.y());
      box[3] = std::max(box[3], p.y());
    }
  }
  return box;
}

}  // namespace driftscape
