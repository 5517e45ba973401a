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

#include "v2xcoop/errors.hpp"
#include "v2xcoop/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace v2xcoop::scenario
{

namespace
{

constexpr double kStraight = 1e-12;

double wrap_angle(double a)
{
  return std::remainder(a, 2.0 * std::numbers::pi);
}

}  // namespace

Eigen::Vector2d CurveSegment::point(double t) const
{
  if (std::abs(curvature) < kStraight) {
    return start + t * Eigen::Vector2d(std::cos(heading), std::sin(heading));
  }
  const double h = heading + curvature * t;
  return start + Eigen::Vector2d(
                   (std::sin(h) - std::sin(heading)) / curvature,
                   (std::cos(heading) - std::cos(h)) / curvature);
}

LaneCurve::LaneCurve(const Eigen::Vector2d & start, double heading)
: start_(start), start_heading_(heading)
{
}

LaneCurve & LaneCurve::add_line(double length) { return add_arc(length, 0.0); }

LaneCurve & LaneCurve::add_arc(double length, double curvature)
{
  if (!(length > 0.0)) {
    throw ConfigError("LaneCurve: segment length must be positive");
  }
  CurveSegment seg;
  if (segments_.empty()) {
    seg.start = start_;
    seg.heading = start_heading_;
    seg.s_start = 0.0;
  } else {
    const CurveSegment & last = segments_.back();
    seg.start = last.point(last.length);
    seg.heading = last.heading_at(last.length);
    seg.s_start = last.s_start + last.length;
  }
  seg.length = length;
  seg.curvature = curvature;
  segments_.push_back(seg);
  return *this;
}

double LaneCurve::length() const
{
  return segments_.empty() ? 0.0 : segments_.back().s_start + segments_.back().length;
}

const CurveSegment & LaneCurve::segment_for(double s, double & t) const
{
  if (segments_.empty()) {
    throw ConfigError("LaneCurve: empty curve");
  }
  auto it = std::upper_bound(
    segments_.begin(), segments_.end(), s,
    [](double value, const CurveSegment & seg) { return value < seg.s_start; });
  const CurveSegment & seg = it == segments_.begin() ? segments_.front() : *std::prev(it);
  t = s - seg.s_start;
  return seg;
}

Eigen::Vector2d LaneCurve::point(double s) const
{
  double t = 0.0;
  const CurveSegment & seg = segment_for(s, t);
  if (t < 0.0) {
    return seg.start + t * Eigen::Vector2d(std::cos(seg.heading), std::sin(seg.heading));
  }
  if (t > seg.length) {
    const double h = seg.heading_at(seg.length);
    return seg.point(seg.length) + (t - seg.length) * Eigen::Vector2d(std::cos(h), std::sin(h));
  }
  return seg.point(t);
}

double LaneCurve::heading(double s) const
{
  double t = 0.0;
  const CurveSegment & seg = segment_for(s, t);
  return seg.heading_at(std::clamp(t, 0.0, seg.length));
}

double LaneCurve::project(const Eigen::Vector2d & p) const
{
  if (segments_.empty()) {
    throw ConfigError("LaneCurve: empty curve");
  }
  double best_s = 0.0;
  double best_d = std::numeric_limits<double>::infinity();
  const auto count = segments_.size();
  for (std::size_t k = 0; k < count; ++k) {
    const CurveSegment & seg = segments_[k];
    const double lo = k == 0 ? -std::numeric_limits<double>::infinity() : 0.0;
    const double hi = k + 1 == count ? std::numeric_limits<double>::infinity() : seg.length;
    double t = 0.0;
    if (std::abs(seg.curvature) < kStraight) {
      t = (p - seg.start).dot(Eigen::Vector2d(std::cos(seg.heading), std::sin(seg.heading)));
      t = std::clamp(t, lo, hi);
    } else {
      const double r = 1.0 / seg.curvature;
      const Eigen::Vector2d c =
        seg.start + r * Eigen::Vector2d(-std::sin(seg.heading), std::cos(seg.heading));
      const Eigen::Vector2d a = seg.start - c;
      const Eigen::Vector2d b = p - c;
      const double dtheta = wrap_angle(std::atan2(b.y(), b.x()) - std::atan2(a.y(), a.x()));
      t = std::clamp(dtheta / seg.curvature, 0.0, seg.length);
    }
    const Eigen::Vector2d q = t < 0.0 || t > seg.length ? point(seg.s_start + t) : seg.point(t);
    const double d = (q - p).norm();
    if (d < best_d) {
      best_d = d;
      best_s = seg.s_start + t;
    }
  }
  return best_s;
}

LaneCurve LaneCurve::rotated(double angle) const
{
  const Eigen::Rotation2Dd rot(angle);
  LaneCurve out(rot * start_, start_heading_ + angle);
  for (const CurveSegment & seg : segments_) {
    out.add_arc(seg.length, seg.curvature);
  }
  return out;
}

LaneCurve make_main_lane(const RampGeometry & geom, double extra_length)
{
  LaneCurve lane(Eigen::Vector2d(0.0, 0.0), 0.5 * std::numbers::pi);
  lane.add_line(geom.l1 + geom.l2 + extra_length);
  return lane;
}

LaneCurve make_ramp_lane(const RampGeometry & geom, double extra_length)
{
  const double w = geom.lane_width;
  const double h1 = 0.5 * std::numbers::pi;
  const double h0 = h1 + geom.ramp_angle;
  const double fillet_len = geom.fillet_radius * geom.ramp_angle;
  if (!(geom.ramp_angle > 0.0) || !(fillet_len < geom.l1)) {
    throw ConfigError("ramp geometry: fillet does not fit before the merge point");
  }
  const double kappa = -1.0 / geom.fillet_radius;
  // walk back from P = (w, l1) over the fillet and the approach line
  const Eigen::Vector2d arc_disp(
    (std::sin(h1) - std::sin(h0)) / kappa, (std::cos(h0) - std::cos(h1)) / kappa);
  const double approach = geom.l1 - fillet_len;
  const Eigen::Vector2d p(w, geom.l1);
  const Eigen::Vector2d start =
    p - arc_disp - approach * Eigen::Vector2d(std::cos(h0), std::sin(h0));

  // S-shaped taper: two opposite arcs of angle theta shifting by w over l2
  const double theta = 2.0 * std::atan(w / geom.l2);
  const double radius = geom.l2 / (2.0 * std::sin(theta));

  LaneCurve lane(start, h0);
  lane.add_line(approach)
    .add_arc(fillet_len, kappa)
    .add_arc(radius * theta, 1.0 / radius)
    .add_arc(radius * theta, -1.0 / radius)
    .add_line(extra_length);
  return lane;
}

}  // namespace v2xcoop::scenario
