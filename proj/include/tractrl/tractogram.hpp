#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tractrl/geometry.hpp"

namespace tractrl {

enum class DoneReason : uint8_t { None = 0, OracleStop, WmExit, Angle, MaxSteps };

std::string to_string(DoneReason r);

struct Tractogram {
  std::vector<Streamline> streamlines;
  // Optional per-streamline annotations; empty or parallel to streamlines.
  std::vector<DoneReason> reasons;
  std::vector<double> scores;
  std::vector<uint8_t> short_flag;  // 1 = below the minimum step count

  size_t size() const { return streamlines.size(); }
};

}  // namespace tractrl
