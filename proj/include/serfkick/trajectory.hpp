#pragma once

#include "serfkick/errors.hpp"
#include "serfkick/linalg.hpp"

#include <string>
#include <vector>

namespace serfkick {

/// Time-ordered density-matrix snapshots of one run.
struct StateTrajectory {
  std::vector<double> times;
  std::vector<Matrix16> states;
  std::string params_tag;

  std::size_t size() const { return times.size(); }

  void validate() const {
    if (times.size() != states.size()) throw ValidationError("trajectory: times and states differ in length");
    for (std::size_t i = 1; i < times.size(); ++i) {
      if (!(times[i] > times[i - 1])) throw ValidationError("trajectory: times must be strictly increasing");
    }
  }
};

}  // namespace serfkick
