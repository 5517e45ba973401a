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
#include "v2xcoop/v2x_bus.hpp"

#include <doctest.h>
#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace v2xcoop;
using namespace std::chrono_literals;

namespace
{

std::vector<std::uint8_t> payload_of(double value) { return bus::encode(Eigen::VectorXd::Constant(1, value)); }

// Runs one round with every participant on its own thread and returns the
// received sender lists, indexed like participants.
std::vector<std::vector<bus::BusMessage>> threaded_round(bus::V2xBus & b, const std::vector<int> & ids)
{
  const std::uint64_t r = b.round();
  std::vector<std::vector<bus::BusMessage>> got(ids.size());
  std::vector<std::thread> pool;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    pool.emplace_back([&, i] {
      b.broadcast(ids[i], r, bus::PayloadKind::dual_vector, payload_of(ids[i] * 1.5));
      got[i] = b.receive_all(ids[i], r);
    });
  }
  for (auto & t : pool) {
    t.join();
  }
  return got;
}

}  // namespace

TEST_SUITE("v2x_bus")
{
  TEST_CASE("encode and decode are bit exact")
  {
    Eigen::VectorXd v(6);
    v << 1.0, -0.0, std::numeric_limits<double>::quiet_NaN(),
      std::numeric_limits<double>::infinity(), std::numeric_limits<double>::denorm_min(),
      -123456.789e-300;
    const auto bytes = bus::encode(v);
    CHECK(bytes.size() == 48);
    const Eigen::VectorXd back = bus::decode(bytes);
    REQUIRE(back.size() == v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      CHECK(std::bit_cast<std::uint64_t>(back(i)) == std::bit_cast<std::uint64_t>(v(i)));
    }
    // little-endian layout of 1.0
    CHECK(bytes[7] == 0x3f);
    CHECK(bytes[6] == 0xf0);
    CHECK(bytes[0] == 0x00);
    const std::vector<std::uint8_t> bad(7, 0);
    CHECK_THROWS_AS(bus::decode(bad), ProtocolError);
    CHECK(bus::decode(std::vector<std::uint8_t>{}).size() == 0);
  }

  TEST_CASE("fnv1a reference values")
  {
    CHECK(bus::fnv1a(std::vector<std::uint8_t>{}) == 14695981039346656037ULL);
    const std::string a = "a";
    const std::vector<std::uint8_t> bytes(a.begin(), a.end());
    CHECK(bus::hex_digest(bus::fnv1a(bytes)) == "af63dc4c8601ec8c");
  }

  TEST_CASE("a single participant receives nothing")
  {
    bus::V2xBus b({4});
    b.broadcast(4, 0, bus::PayloadKind::coordinate, payload_of(2.0));
    CHECK(b.receive_all(4, 0).empty());
    CHECK(b.round() == 1);
  }

  TEST_CASE("three participants each receive two messages sorted by sender")
  {
    bus::V2xBus b({7, 2, 5});
    CHECK(b.participants() == std::vector<int>{2, 5, 7});
    b.broadcast(7, 0, bus::PayloadKind::dual_vector, payload_of(7.0));
    b.broadcast(2, 0, bus::PayloadKind::dual_vector, payload_of(2.0));
    b.broadcast(5, 0, bus::PayloadKind::dual_vector, payload_of(5.0));
    for (int id : {5, 2, 7}) {
      const auto msgs = b.receive_all(id, 0);
      REQUIRE(msgs.size() == 2);
      CHECK(msgs[0].sender < msgs[1].sender);
      for (const auto & m : msgs) {
        CHECK(m.sender != id);
        CHECK(m.round == 0);
        CHECK(m.kind == bus::PayloadKind::dual_vector);
        CHECK(bus::decode(m.payload)(0) == static_cast<double>(m.sender));
      }
    }
    CHECK(b.round() == 1);
    CHECK(b.messages_sent() == 3);
  }

  TEST_CASE("protocol violations are rejected")
  {
    CHECK_THROWS_AS(bus::V2xBus({1, 1}), ProtocolError);

    bus::V2xBus b({0, 1}, 50ms);
    CHECK_THROWS_AS(b.broadcast(9, 0, bus::PayloadKind::dual_vector, {}), ProtocolError);
    CHECK_THROWS_AS(b.broadcast(0, 3, bus::PayloadKind::dual_vector, {}), ProtocolError);
    b.broadcast(0, 0, bus::PayloadKind::dual_vector, payload_of(0.0));
    CHECK_THROWS_AS(b.broadcast(0, 0, bus::PayloadKind::dual_vector, {}), ProtocolError);
    CHECK_THROWS_AS(b.receive_all(0, 1), ProtocolError);
    CHECK_THROWS_AS(b.receive_all(9, 0), ProtocolError);
    try {
      (void)b.receive_all(0, 0);
      FAIL("expected a timeout");
    } catch (const ProtocolError & e) {
      CHECK(std::string(e.what()).find("missing senders: 1") != std::string::npos);
    }
    b.broadcast(1, 0, bus::PayloadKind::dual_vector, payload_of(1.0));
    CHECK(b.receive_all(0, 0).size() == 1);
    CHECK_THROWS_AS(b.receive_all(0, 0), ProtocolError);
    CHECK_THROWS_AS(b.remove_participant(1), ProtocolError);
    CHECK(b.receive_all(1, 0).size() == 1);
    CHECK(b.round() == 1);
    // stale round
    CHECK_THROWS_AS(b.broadcast(0, 0, bus::PayloadKind::dual_vector, {}), ProtocolError);
  }

  TEST_CASE("a send for the next round times out without the barrier")
  {
    bus::V2xBus b({0, 1}, 50ms);
    b.broadcast(0, 0, bus::PayloadKind::dual_vector, payload_of(0.0));
    b.broadcast(1, 0, bus::PayloadKind::dual_vector, payload_of(1.0));
    (void)b.receive_all(0, 0);
    CHECK_THROWS_AS(b.broadcast(0, 1, bus::PayloadKind::dual_vector, {}), ProtocolError);
  }

  TEST_CASE("remove_participant between rounds")
  {
    bus::V2xBus b({0, 1, 2});
    b.remove_participant(1);
    CHECK(b.participant_count() == 2);
    CHECK_THROWS_AS(b.remove_participant(1), ProtocolError);
    b.broadcast(0, 0, bus::PayloadKind::nominal_trajectory, payload_of(0.0));
    b.broadcast(2, 0, bus::PayloadKind::nominal_trajectory, payload_of(2.0));
    CHECK(b.receive_all(0, 0).size() == 1);
    CHECK(b.receive_all(2, 0).size() == 1);
    CHECK(b.round() == 1);
  }

  TEST_CASE("log lines carry round, sender, kind and digest")
  {
    bus::V2xBus b({0, 1});
    std::ostringstream log;
    b.set_log(&log);
    const auto p0 = payload_of(3.0);
    b.broadcast(0, 0, bus::PayloadKind::coordinate, p0);
    b.broadcast(1, 0, bus::PayloadKind::nominal_trajectory, payload_of(4.0));
    std::istringstream in(log.str());
    std::string line;
    std::vector<nlohmann::json> lines;
    while (std::getline(in, line)) {
      lines.push_back(nlohmann::json::parse(line));
    }
    REQUIRE(lines.size() == 2);
    CHECK(lines[0].at("round") == 0);
    CHECK(lines[0].at("sender") == 0);
    CHECK(lines[0].at("kind") == "coordinate");
    CHECK(lines[0].at("digest") == bus::hex_digest(bus::fnv1a(p0)));
    CHECK(lines[1].at("kind") == "nominal_trajectory");
  }

  TEST_CASE("threaded rounds are deterministic")
  {
    const std::vector<int> ids{3, 1, 4, 0, 2};
    bus::V2xBus b(ids);
    for (int round = 0; round < 20; ++round) {
      const auto got = threaded_round(b, ids);
      for (std::size_t i = 0; i < ids.size(); ++i) {
        REQUIRE(got[i].size() == ids.size() - 1);
        int prev = -1;
        for (const auto & m : got[i]) {
          CHECK(m.sender > prev);
          prev = m.sender;
          CHECK(m.round == static_cast<std::uint64_t>(round));
          CHECK(bus::decode(m.payload)(0) == m.sender * 1.5);
        }
      }
      CHECK(b.round() == static_cast<std::uint64_t>(round + 1));
    }
  }

  TEST_CASE("an early sender waits for the barrier")
  {
    bus::V2xBus b({0, 1});
    b.broadcast(0, 0, bus::PayloadKind::dual_vector, payload_of(0.0));
    b.broadcast(1, 0, bus::PayloadKind::dual_vector, payload_of(1.0));
    (void)b.receive_all(0, 0);
    std::thread late([&] {
      std::this_thread::sleep_for(20ms);
      (void)b.receive_all(1, 0);
    });
    b.broadcast(0, 1, bus::PayloadKind::dual_vector, payload_of(0.5));
    late.join();
    CHECK(b.round() == 1);
    b.broadcast(1, 1, bus::PayloadKind::dual_vector, payload_of(1.5));
    CHECK(bus::decode(b.receive_all(1, 1)[0].payload)(0) == 0.5);
  }
}
