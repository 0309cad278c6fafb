#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "resa/harness/node.hpp"

namespace resa::harness {

struct HostEntry {
  std::string host;
  std::uint16_t port = 0;
};

// node id -> listening endpoint
using HostTable = std::map<std::string, HostEntry>;

// Lines "<node> <host> <port>"; '#' starts a comment.
HostTable parse_host_table(std::string_view text);

struct SocketOptions {
  std::size_t max_frame = 1 << 20;
  std::size_t inbound_capacity = 1024;
  std::int64_t tick_us = 100'000;
  int retry_initial_ms = 20;
  int retry_max_ms = 2000;
};

struct SocketMetrics {
  std::atomic<std::uint64_t> connect_failures{0};
  std::atomic<std::uint64_t> connections{0};
  std::atomic<std::uint64_t> frames_sent{0};
  std::atomic<std::uint64_t> frames_received{0};
  std::atomic<std::uint64_t> frames_resent{0};
  std::atomic<std::uint64_t> oversized{0};
  std::atomic<std::uint64_t> decode_errors{0};
};

// Ports that were free on 127.0.0.1 a moment ago.
std::vector<std::uint16_t> free_loopback_ports(std::size_t count);

enum class FrameType : std::uint8_t { kHello = 1, kHelloAck = 2, kData = 3, kAck = 4 };

// [u32 length (big endian, counts type + payload)][u8 type][payload]
Bytes encode_frame(FrameType type, std::span<const std::uint8_t> payload);

// Runs one node over TCP: an I/O thread owns every socket of the node and a
// reactor thread feeds the node one message at a time. Channels are
// reliable across reconnects: unacknowledged frames are resent.
class SocketRunner {
 public:
  SocketRunner(std::shared_ptr<Node> node, HostTable hosts, SocketOptions options = {});
  ~SocketRunner();
  SocketRunner(const SocketRunner&) = delete;
  SocketRunner& operator=(const SocketRunner&) = delete;

  // Binds the listening socket and starts both threads.
  void start();
  // Stops both threads and closes every socket. Idempotent.
  void stop();
  // Runs `fn` on the reactor thread.
  void post(std::function<void()> fn);

  const SocketMetrics& metrics() const;
  std::uint16_t listen_port() const;

 private:
  class Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace resa::harness
