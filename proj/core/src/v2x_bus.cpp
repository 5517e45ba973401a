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

#include "v2xcoop/v2x_bus.hpp"

#include "v2xcoop/errors.hpp"

#include <bit>
#include <cstring>
#include <sstream>

namespace v2xcoop::bus
{

const char * to_string(PayloadKind kind)
{
  switch (kind) {
    case PayloadKind::coordinate:
      return "coordinate";
    case PayloadKind::dual_vector:
      return "dual_vector";
    case PayloadKind::nominal_trajectory:
      return "nominal_trajectory";
  }
  return "unknown";
}

std::vector<std::uint8_t> encode(const Eigen::VectorXd & v)
{
  std::vector<std::uint8_t> out(static_cast<std::size_t>(v.size()) * 8);
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(v(i));
    for (int b = 0; b < 8; ++b) {
      out[static_cast<std::size_t>(i) * 8 + static_cast<std::size_t>(b)] =
        static_cast<std::uint8_t>(bits >> (8 * b));
    }
  }
  return out;
}

Eigen::VectorXd decode(std::span<const std::uint8_t> bytes)
{
  if (bytes.size() % 8 != 0) {
    throw ProtocolError("decode: payload size is not a multiple of 8");
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(bytes.size() / 8));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(bytes[static_cast<std::size_t>(i) * 8 + static_cast<std::size_t>(b)])
              << (8 * b);
    }
    v(i) = std::bit_cast<double>(bits);
  }
  return v;
}

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes)
{
  std::uint64_t h = 14695981039346656037ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex_digest(std::uint64_t digest)
{
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << digest;
  return os.str();
}

V2xBus::V2xBus(std::vector<int> participants, std::chrono::milliseconds timeout)
: participants_(participants.begin(), participants.end()), timeout_(timeout)
{
  if (participants_.size() != participants.size()) {
    throw ProtocolError("V2xBus: duplicate participant id");
  }
}

void V2xBus::broadcast(
  int sender, std::uint64_t round, PayloadKind kind, std::vector<std::uint8_t> payload)
{
  std::unique_lock lock(mutex_);
  if (!participants_.count(sender)) {
    throw ProtocolError("V2xBus: unknown sender " + std::to_string(sender));
  }
  if (round == round_ + 1) {
    if (!cv_.wait_for(lock, timeout_, [&] { return round_ >= round; })) {
      throw ProtocolError("V2xBus: timeout waiting for round " + std::to_string(round));
    }
  }
  if (round != round_) {
    throw ProtocolError(
      "V2xBus: sender " + std::to_string(sender) + " used round " + std::to_string(round) +
      " while the bus is at round " + std::to_string(round_));
  }
  if (inbox_.count(sender)) {
    throw ProtocolError(
      "V2xBus: sender " + std::to_string(sender) + " sent twice in round " + std::to_string(round));
  }
  if (log_ != nullptr) {
    *log_ << "{\"round\":" << round << ",\"sender\":" << sender << ",\"kind\":\""
          << to_string(kind) << "\",\"digest\":\"" << hex_digest(fnv1a(payload)) << "\"}\n";
  }
  inbox_.emplace(sender, BusMessage{sender, round, kind, std::move(payload)});
  ++sent_;
  cv_.notify_all();
}

std::vector<BusMessage> V2xBus::receive_all(int agent, std::uint64_t round)
{
  std::unique_lock lock(mutex_);
  if (!participants_.count(agent)) {
    throw ProtocolError("V2xBus: unknown receiver " + std::to_string(agent));
  }
  if (round != round_) {
    throw ProtocolError(
      "V2xBus: receive for round " + std::to_string(round) + " while the bus is at round " +
      std::to_string(round_));
  }
  if (collected_.count(agent)) {
    throw ProtocolError("V2xBus: agent " + std::to_string(agent) + " collected twice");
  }
  const bool complete = cv_.wait_for(lock, timeout_, [&] {
    return inbox_.size() == participants_.size();
  });
  if (!complete) {
    std::string missing;
    for (int p : participants_) {
      if (!inbox_.count(p)) {
        missing += (missing.empty() ? "" : ", ") + std::to_string(p);
      }
    }
    throw ProtocolError(
      "V2xBus: timeout in round " + std::to_string(round) + ", missing senders: " + missing);
  }
  std::vector<BusMessage> out;
  out.reserve(inbox_.size());
  for (const auto & [sender, msg] : inbox_) {
    if (sender != agent) {
      out.push_back(msg);
    }
  }
  collected_.insert(agent);
  if (collected_.size() == participants_.size()) {
    inbox_.clear();
    collected_.clear();
    ++round_;
    cv_.notify_all();
  }
  return out;
}

std::uint64_t V2xBus::round() const
{
  std::lock_guard lock(mutex_);
  return round_;
}

std::vector<int> V2xBus::participants() const
{
  std::lock_guard lock(mutex_);
  return {participants_.begin(), participants_.end()};
}

std::size_t V2xBus::participant_count() const
{
  std::lock_guard lock(mutex_);
  return participants_.size();
}

void V2xBus::remove_participant(int id)
{
  std::lock_guard lock(mutex_);
  if (!inbox_.empty() || !collected_.empty()) {
    throw ProtocolError("V2xBus: participants can only change between rounds");
  }
  if (participants_.erase(id) == 0) {
    throw ProtocolError("V2xBus: unknown participant " + std::to_string(id));
  }
}

void V2xBus::set_log(std::ostream * log)
{
  std::lock_guard lock(mutex_);
  log_ = log;
}

std::uint64_t V2xBus::messages_sent() const
{
  std::lock_guard lock(mutex_);
  return sent_;
}

}  // namespace v2xcoop::bus
