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

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

namespace v2xcoop
{

/// Simulation and algorithm parameters. Defaults are the reference values
/// used throughout the project; every field can be overridden from a config.
struct Parameters
{
  // timing
  double ts{0.1};          // sampling / control period [s]
  int planning_horizon{90};  // T_P1 [steps]
  int control_horizon{30};   // T_P2 [steps]
  int inner_iterations{3};   // T_iter
  double merge_offset{0.6};  // c0 [s]
  double merge_spacing{0.7};  // c1 [s]
  double lag_time{0.5};      // T_l [s]

  // geometry
  double l1{110.0};          // region before the merge point [m]
  double l2{40.0};           // acceleration lane [m]
  double lf{15.0};           // terminal slot length [m]
  double lane_width{4.5};    // [m]
  double ramp_angle{15.0 * std::numbers::pi / 180.0};
  double fillet_radius{100.0};

  // vehicle
  double vehicle_length{3.5};
  double vehicle_width{1.7};
  double accel_max{7.0};      // |a| bound [m/s^2]
  double steer_max{34.0 * std::numbers::pi / 180.0};  // |psi| bound [rad]

  // safety
  double gap_distance{10.0};   // longitudinal planner gap d_S^1 [m]
  double safety_distance{2.5};  // circle-center distance D_S [m]
  double alpha{8.0};

  // tracking weights
  Eigen::Vector4d q_x{1.0, 1.0, 0.0, 0.0};
  Eigen::Vector2d q_u{1.0, 0.1};
  Eigen::Matrix<double, 2, 4> m_f{(Eigen::Matrix<double, 2, 4>() << 1.0, 0.0, 0.0, 0.0, 0.0, 0.3,
                                   0.0, 0.0)
                                    .finished()};
  double k_x{10.0};
  double k_u{10.0};

  int merge_offset_steps() const { return static_cast<int>(std::lround(merge_offset / ts)); }
  int merge_spacing_steps() const { return static_cast<int>(std::lround(merge_spacing / ts)); }
  /// Distance from the vehicle center to each covering circle center.
  double circle_offset() const { return 0.5 * (vehicle_length - vehicle_width); }

  /// Throws ConfigError when a value is out of its admissible range.
  void validate() const;
};

}  // namespace v2xcoop
