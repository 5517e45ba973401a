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

#include <stdexcept>
#include <string>

namespace v2xcoop
{

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Invalid scenario, parameter set or configuration document.
class ConfigError : public Error
{
public:
  using Error::Error;
};

/// QP solver could not produce a usable solution.
class SolverError : public Error
{
public:
  using Error::Error;
};

/// V2X bus protocol violation (wrong round, double send, timeout).
class ProtocolError : public Error
{
public:
  using Error::Error;
};

}  // namespace v2xcoop
