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

#include <string>
#include <vector>

/// Self-contained SVG charts built from trace data.
namespace v2xcoop::cli::svg
{

struct Series
{
  std::string label;
  std::vector<double> x;
  std::vector<double> y;  // non-finite values break the line
  bool dashed{false};
};

struct ChartOptions
{
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y{false};
  bool equal_aspect{false};
  int width{760};
  int height{480};
};

std::string line_chart(const std::vector<Series> & series, const ChartOptions & options);

/// rows x columns grid coloured from white (0) to dark red (max).
std::string heat_map(
  const std::vector<std::vector<double>> & rows, const std::vector<std::string> & row_labels,
  double column_step, const ChartOptions & options);

const std::string & palette(std::size_t index);

}  // namespace v2xcoop::cli::svg
