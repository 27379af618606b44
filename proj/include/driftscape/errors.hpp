#ifndef DRIFTSCAPE_ERRORS_HPP
#define DRIFTSCAPE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace driftscape {

/// Base class of all errors raised by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidParameter : Error {
  using Error::Error;
};

struct LengthMismatch : Error {
  using Error::Error;
};

struct EmptyData : Error {
  using Error::Error;
};

struct NonFiniteValue : Error {
  using Error::Error;
};

struct SingularJacobian : Error {
  using Error::Error;
};

struct NonPsdCovariance : Error {
  using Error::Error;
};

struct UnsortedTimes : Error {
  using Error::Error;
};

struct TimeCollision : Error {
  using Error::Error;
};

struct ProposalBudgetExceeded : Error {
  using Error::Error;
};

struct NonPositiveEstimate : Error {
  using Error::Error;
};

struct AllRestartsFailed : Error {
  using Error::Error;
};

struct DegenerateGrid : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct ParseError : Error {
  ParseError(int line_, const std::string& what_)
      : Error("line " + std::to_string(line_) + ": " + what_), line(line_) {}
  int line;
};

struct NonMonotoneTime : Error {
  NonMonotoneTime(std::string track_, int line_)
      : Error("track '" + track_ + "': non-increasing time at line " +
              std::to_string(line_)),
        track(std::move(track_)),
        line(line_) {}
  std::string track;
  int line;
};

struct TooFewPoints : Error {
  explicit TooFewPoints(std::string track_)
      : Error("track '" + track_ + "' has fewer than 2 points"),
        track(std::move(track_)) {}
  std::string track;
};

}  // namespace driftscape

#endif
