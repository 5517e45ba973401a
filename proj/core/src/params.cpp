// Copyright 2026 The v2xcoop Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "v2xcoop/params.hpp"

#include "v2xcoop/errors.hpp"

#include <string>

namespace v2xcoop
{

namespace
{

void require(bool ok, const std::string & what)
{
  if (!ok) {
    throw ConfigError("invalid parameter: " + what);
  }
}

}  // namespace

void Parameters::validate() const
{
  require(ts > 0.0, "ts must be positive");
  require(planning_horizon >= 1, "planning_horizon must be >= 1");
  require(control_horizon >= 1, "control_horizon must be >= 1");
  require(inner_iterations >= 1, "inner_iterations must be >= 1");
  require(merge_offset >= 0.0 && merge_spacing >= 0.0, "merge offsets must be non-negative");
  require(lag_time > 0.0, "lag_time must be positive");
  require(l1 > 0.0 && l2 > 0.0 && lf > 0.0, "l1, l2, lf must be positive");
  require(lane_width > 0.0, "lane_width must be positive");
  require(ramp_angle > 0.0 && ramp_angle < 1.5, "ramp_angle must be in (0, 1.5) rad");
  require(fillet_radius > 0.0, "fillet_radius must be positive");
  require(vehicle_length > vehicle_width && vehicle_width > 0.0, "vehicle must be longer than wide");
  require(accel_max > 0.0, "accel_max must be positive");
  require(steer_max > 0.0 && steer_max < 1.5, "steer_max must be in (0, 1.5) rad");
  require(gap_distance >= 0.0 && safety_distance >= 0.0, "safety distances must be non-negative");
  require(alpha >= 0.0, "alpha must be non-negative");
  require((q_x.array() >= 0.0).all(), "q_x must be non-negative");
  require((q_u.array() > 0.0).all(), "q_u must be positive");
  require(k_x >= 0.0 && k_u > 0.0, "terminal multipliers out of range");
}

}  // namespace v2xcoop
