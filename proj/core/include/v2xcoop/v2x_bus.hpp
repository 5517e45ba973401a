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

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

/**
 * Ideal synchronous broadcast medium.
 *
 * Every registered agent sends exactly one message per round and then
 * collects the messages of all peers for that round. The round counter
 * advances once every participant has collected; a send for the next round
 * blocks until then. Deliveries are lossless, instantaneous and returned in
 * sender-id order.
 */
namespace v2xcoop::bus
{

enum class PayloadKind { coordinate, dual_vector, nominal_trajectory };

const char * to_string(PayloadKind kind);

struct BusMessage
{
  int sender{0};
  std::uint64_t round{0};
  PayloadKind kind{PayloadKind::dual_vector};
  std::vector<std::uint8_t> payload;
};

/// Little-endian IEEE-754 encoding; decoding reproduces the input bit for bit.
std::vector<std::uint8_t> encode(const Eigen::VectorXd & v);
Eigen::VectorXd decode(std::span<const std::uint8_t> bytes);

/// 64-bit FNV-1a digest, used for message logs and trace digests.
std::uint64_t fnv1a(std::span<const std::uint8_t> bytes);
std::string hex_digest(std::uint64_t digest);

class V2xBus
{
public:
  explicit V2xBus(
    std::vector<int> participants,
    std::chrono::milliseconds timeout = std::chrono::milliseconds(30000));

  V2xBus(const V2xBus &) = delete;
  V2xBus & operator=(const V2xBus &) = delete;

  /// Queue a message for every other participant. The round must be the
  /// current one, or the next one (then the call waits for the barrier).
  /// Throws ProtocolError on unknown sender, stale/future round or double send.
  void broadcast(int sender, std::uint64_t round, PayloadKind kind, std::vector<std::uint8_t> payload);

  /// Wait for the round-r messages of every peer and return them sorted by
  /// sender. Throws ProtocolError on timeout, listing the missing senders.
  std::vector<BusMessage> receive_all(int agent, std::uint64_t round);

  std::uint64_t round() const;
  std::vector<int> participants() const;
  std::size_t participant_count() const;

  /// Allowed only between rounds (no message of the current round queued).
  void remove_participant(int id);

  /// Optional JSON-lines log: {"round", "sender", "kind", "digest"} per send.
  void set_log(std::ostream * log);

  /// Total messages broadcast so far.
  std::uint64_t messages_sent() const;

private:
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::set<int> participants_;
  std::uint64_t round_{0};
  std::map<int, BusMessage> inbox_;
  std::set<int> collected_;
  std::chrono::milliseconds timeout_;
  std::ostream * log_{nullptr};
  std::uint64_t sent_{0};
};

}  // namespace v2xcoop::bus
