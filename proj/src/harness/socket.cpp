#include "resa/harness/socket.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <iostream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>
#include <vector>

namespace resa::harness {

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now().time_since_epoch())
      .count();
}

void set_nonblocking(int fd) { fcntl(fd, F_SETFL, fcntl(fd, F_GETFL, 0) | O_NONBLOCK); }

void set_nodelay(int fd) {
  int one = 1;
  setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

bool resolve(const HostEntry& h, sockaddr_storage& out, socklen_t& len) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  auto port = std::to_string(h.port);
  if (getaddrinfo(h.host.c_str(), port.c_str(), &hints, &res) != 0 || !res) return false;
  std::memcpy(&out, res->ai_addr, res->ai_addrlen);
  len = res->ai_addrlen;
  freeaddrinfo(res);
  return true;
}

Bytes u64_payload(std::uint64_t v) {
  ByteWriter w;
  w.u64(v);
  return std::move(w).take();
}

struct Frame {
  FrameType type;
  Bytes payload;
};

// Extracts complete frames from `buf`. Returns false on a protocol error.
bool take_frames(Bytes& buf, std::size_t max_frame, std::vector<Frame>& out, bool& oversized) {
  std::size_t pos = 0;
  while (buf.size() - pos >= 4) {
    std::uint32_t len = (std::uint32_t{buf[pos]} << 24) | (std::uint32_t{buf[pos + 1]} << 16) |
                        (std::uint32_t{buf[pos + 2]} << 8) | std::uint32_t{buf[pos + 3]};
    if (len == 0) return false;
    if (len > max_frame) {
      oversized = true;
      return false;
    }
    if (buf.size() - pos - 4 < len) break;
    auto type = buf[pos + 4];
    if (type < 1 || type > 4) return false;
    out.push_back({static_cast<FrameType>(type),
                   Bytes(buf.begin() + static_cast<long>(pos) + 5,
                         buf.begin() + static_cast<long>(pos + 4 + len))});
    pos += 4 + len;
  }
  buf.erase(buf.begin(), buf.begin() + static_cast<long>(pos));
  return true;
}

// Reads what is available. Returns false on EOF or error.
bool read_some(int fd, Bytes& buf) {
  std::uint8_t tmp[65536];
  for (;;) {
    auto n = ::recv(fd, tmp, sizeof(tmp), 0);
    if (n > 0) {
      buf.insert(buf.end(), tmp, tmp + n);
      if (static_cast<std::size_t>(n) < sizeof(tmp)) return true;
      continue;
    }
    if (n == 0) return false;
    if (errno == EAGAIN || errno == EWOULDBLOCK) return true;
    if (errno == EINTR) continue;
    return false;
  }
}

// Writes as much as possible. Returns false on error.
bool write_some(int fd, Bytes& buf, std::size_t& pos) {
  while (pos < buf.size()) {
    auto n = ::send(fd, buf.data() + pos, buf.size() - pos, MSG_NOSIGNAL);
    if (n > 0) {
      pos += static_cast<std::size_t>(n);
      continue;
    }
    if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) break;
    if (n < 0 && errno == EINTR) continue;
    return false;
  }
  if (pos == buf.size()) {
    buf.clear();
    pos = 0;
  }
  return true;
}

}  // namespace

Bytes encode_frame(FrameType type, std::span<const std::uint8_t> payload) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(payload.size() + 1)).u8(static_cast<std::uint8_t>(type));
  w.raw(payload);
  return std::move(w).take();
}

HostTable parse_host_table(std::string_view text) {
  HostTable table;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string node, host;
    long port = -1;
    if (!(ls >> node)) continue;
    if (!(ls >> host >> port) || port < 0 || port > 65535) {
      throw Error("host table line " + std::to_string(lineno) + ": expected '<node> <host> <port>'");
    }
    table[node] = {host, static_cast<std::uint16_t>(port)};
  }
  return table;
}

std::vector<std::uint16_t> free_loopback_ports(std::size_t count) {
  std::vector<int> fds;
  std::vector<std::uint16_t> ports;
  for (std::size_t i = 0; i < count; ++i) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    if (fd < 0 || ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
      if (fd >= 0) ::close(fd);
      for (int f : fds) ::close(f);
      throw Error("cannot reserve a loopback port");
    }
    socklen_t len = sizeof(addr);
    getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    ports.push_back(ntohs(addr.sin_port));
    fds.push_back(fd);
  }
  for (int f : fds) ::close(f);
  return ports;
}

class SocketRunner::Impl : public Transport {
 public:
  Impl(std::shared_ptr<Node> node, HostTable hosts, SocketOptions options)
      : node_(std::move(node)), hosts_(std::move(hosts)), options_(options) {}

  ~Impl() override { stop(); }

  void send(Envelope e) override {
    e.from_node = node_->id();
    if (e.to_node == node_->id()) {
      {
        std::lock_guard lock(in_mu_);
        inbound_.push_back(std::move(e));
      }
      in_cv_.notify_one();
      return;
    }
    auto bytes = encode_envelope(e);
    if (bytes.size() + 9 > options_.max_frame) {
      ++metrics.oversized;
      std::cerr << "resa: dropping " << bytes.size() << "-byte message to " << e.to_node
                << ": exceeds the frame limit of " << options_.max_frame << " bytes\n";
      return;
    }
    {
      std::lock_guard lock(out_mu_);
      staged_[e.to_node].push_back(std::move(bytes));
    }
    wake();
  }

  std::int64_t now_us() const override {
    return std::chrono::duration_cast<std::chrono::microseconds>(Clock::now().time_since_epoch())
        .count();
  }

  void start() {
    auto self = hosts_.find(node_->id());
    if (self == hosts_.end()) throw Error("node '" + node_->id() + "' is missing from the host table");
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    int one = 1;
    setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_storage addr{};
    socklen_t len = 0;
    if (!resolve(self->second, addr, len) ||
        ::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), len) != 0 ||
        ::listen(listen_fd_, 64) != 0) {
      auto err = std::string(std::strerror(errno));
      ::close(listen_fd_);
      throw Error("cannot listen on " + self->second.host + ":" +
                  std::to_string(self->second.port) + ": " + err);
    }
    set_nonblocking(listen_fd_);
    sockaddr_in bound{};
    socklen_t blen = sizeof(bound);
    getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &blen);
    port_ = ntohs(bound.sin_port);
    if (::pipe(wake_) != 0) throw Error("cannot create wake pipe");
    set_nonblocking(wake_[0]);
    set_nonblocking(wake_[1]);
    for (const auto& [peer, entry] : hosts_) {
      if (peer == node_->id()) continue;
      auto& o = out_[peer];
      o.peer = peer;
      o.addr = entry;
      o.backoff_ms = options_.retry_initial_ms;
    }
    running_ = true;
    node_->attach(*this);
    io_ = std::thread([this] { io_loop(); });
    reactor_ = std::thread([this] { reactor_loop(); });
  }

  void stop() {
    if (!running_.exchange(false)) return;
    wake();
    in_cv_.notify_all();
    if (io_.joinable()) io_.join();
    if (reactor_.joinable()) reactor_.join();
    for (auto& [_, o] : out_) {
      if (o.fd >= 0) ::close(o.fd);
    }
    for (auto& i : in_) {
      if (i.fd >= 0) ::close(i.fd);
    }
    ::close(listen_fd_);
    ::close(wake_[0]);
    ::close(wake_[1]);
  }

  void post(std::function<void()> fn) {
    {
      std::lock_guard lock(in_mu_);
      posted_.push_back(std::move(fn));
    }
    in_cv_.notify_one();
  }

  SocketMetrics metrics;
  std::uint16_t port_ = 0;

 private:
  enum class State { kIdle, kConnecting, kHello, kReady };

  struct Outbound {
    std::string peer;
    HostEntry addr;
    int fd = -1;
    State state = State::kIdle;
    std::int64_t retry_at = 0;
    int backoff_ms = 0;
    bool ever_ready = false;
    std::uint64_t next_seq = 1;
    std::uint64_t written_upto = 0;
    std::deque<std::pair<std::uint64_t, Bytes>> unacked;  // full DATA frames
    Bytes wbuf;
    std::size_t wpos = 0;
    Bytes rbuf;
  };

  struct Inbound {
    int fd = -1;
    std::string peer;
    Bytes rbuf;
    Bytes wbuf;
    std::size_t wpos = 0;
  };

  void wake() {
    if (wake_pending_.exchange(true)) return;
    std::uint8_t b = 1;
    [[maybe_unused]] auto r = ::write(wake_[1], &b, 1);
  }

  void fail(Outbound& o) {
    if (o.fd >= 0) ::close(o.fd);
    o.fd = -1;
    o.state = State::kIdle;
    o.wbuf.clear();
    o.wpos = 0;
    o.rbuf.clear();
    o.retry_at = now_ms() + o.backoff_ms;
    o.backoff_ms = std::min(o.backoff_ms * 2, options_.retry_max_ms);
    ++metrics.connect_failures;
  }

  void connect(Outbound& o) {
    sockaddr_storage addr{};
    socklen_t len = 0;
    if (!resolve(o.addr, addr, len)) {
      fail(o);
      return;
    }
    o.fd = ::socket(AF_INET, SOCK_STREAM, 0);
    set_nonblocking(o.fd);
    set_nodelay(o.fd);
    int rc = ::connect(o.fd, reinterpret_cast<sockaddr*>(&addr), len);
    if (rc != 0 && errno != EINPROGRESS) {
      fail(o);
      return;
    }
    o.state = State::kConnecting;
  }

  void on_connected(Outbound& o) {
    int err = 0;
    socklen_t len = sizeof(err);
    getsockopt(o.fd, SOL_SOCKET, SO_ERROR, &err, &len);
    if (err != 0) {
      fail(o);
      return;
    }
    ++metrics.connections;
    o.state = State::kHello;
    ByteWriter hw;
    hw.str(node_->id()).u64(incarnation_);
    auto hello = encode_frame(FrameType::kHello, std::move(hw).take());
    o.wbuf.insert(o.wbuf.end(), hello.begin(), hello.end());
  }

  void drop_acked(Outbound& o, std::uint64_t upto) {
    while (!o.unacked.empty() && o.unacked.front().first <= upto) o.unacked.pop_front();
  }

  void handle_outbound_frames(Outbound& o) {
    std::vector<Frame> frames;
    bool oversized = false;
    if (!take_frames(o.rbuf, options_.max_frame, frames, oversized)) {
      fail(o);
      return;
    }
    for (const auto& f : frames) {
      ByteReader r(f.payload);
      auto upto = r.u64();
      if (f.type == FrameType::kHelloAck) {
        drop_acked(o, upto);
        if (o.ever_ready && !o.unacked.empty()) metrics.frames_resent += o.unacked.size();
        o.written_upto = upto;
        o.state = State::kReady;
        o.ever_ready = true;
        o.backoff_ms = options_.retry_initial_ms;
      } else if (f.type == FrameType::kAck) {
        drop_acked(o, upto);
      }
    }
  }

  void handle_inbound_frames(Inbound& in, bool& close_it) {
    std::vector<Frame> frames;
    bool oversized = false;
    if (!take_frames(in.rbuf, options_.max_frame, frames, oversized)) {
      if (oversized) {
        ++metrics.oversized;
        std::cerr << "resa: closing connection from '" << in.peer
                  << "': frame exceeds the limit of " << options_.max_frame << " bytes\n";
      }
      close_it = true;
    }
    bool ack = false;
    for (const auto& f : frames) {
      if (f.type == FrameType::kHello) {
        ByteReader hr(f.payload);
        in.peer = hr.str();
        const auto inc = hr.u64();
        auto& p = peers_in_[in.peer];
        if (p.incarnation != inc) p = PeerIn{inc, 0, false};
        auto reply = encode_frame(FrameType::kHelloAck, u64_payload(p.last));
        in.wbuf.insert(in.wbuf.end(), reply.begin(), reply.end());
      } else if (f.type == FrameType::kData && !in.peer.empty()) {
        ByteReader r(f.payload);
        auto seq = r.u64();
        auto& p = peers_in_[in.peer];
        if (!p.synced) {
          p.last = seq - 1;
          p.synced = true;
        }
        if (seq != p.last + 1) continue;
        p.last = seq;
        ack = true;
        ++metrics.frames_received;
        try {
          auto env = decode_envelope(std::span<const std::uint8_t>(f.payload).subspan(8));
          std::lock_guard lock(in_mu_);
          inbound_.push_back(std::move(env));
        } catch (const DecodeError&) {
          ++metrics.decode_errors;
        }
      }
    }
    if (ack) {
      in_cv_.notify_one();
      auto reply = encode_frame(FrameType::kAck, u64_payload(peers_in_[in.peer].last));
      in.wbuf.insert(in.wbuf.end(), reply.begin(), reply.end());
    }
  }

  void io_loop() {
    std::vector<pollfd> fds;
    std::vector<std::pair<int, std::string>> owners;  // 0 wake, 1 listen, 2 out, 3 in
    while (running_) {
      {
        std::map<std::string, std::deque<Bytes>> staged;
        {
          std::lock_guard lock(out_mu_);
          staged.swap(staged_);
        }
        for (auto& [peer, msgs] : staged) {
          auto it = out_.find(peer);
          if (it == out_.end()) {
            std::cerr << "resa: no route to node '" << peer << "'\n";
            continue;
          }
          auto& o = it->second;
          for (auto& m : msgs) {
            ByteWriter w;
            w.u64(o.next_seq).raw(m);
            o.unacked.emplace_back(o.next_seq++, encode_frame(FrameType::kData, w.data()));
          }
        }
      }
      const auto now = now_ms();
      int timeout = 100;
      for (auto& [_, o] : out_) {
        if (o.state == State::kIdle && !o.unacked.empty()) {
          if (now >= o.retry_at) {
            connect(o);
          } else {
            timeout = std::min<int>(timeout, static_cast<int>(o.retry_at - now));
          }
        }
        if (o.state == State::kReady) {
          for (const auto& [seq, frame] : o.unacked) {
            if (seq <= o.written_upto) continue;
            o.wbuf.insert(o.wbuf.end(), frame.begin(), frame.end());
            o.written_upto = seq;
            ++metrics.frames_sent;
          }
        }
      }

      bool paused;
      {
        std::lock_guard lock(in_mu_);
        paused = inbound_.size() >= options_.inbound_capacity;
      }
      paused_ = paused;

      fds.clear();
      owners.clear();
      fds.push_back({wake_[0], POLLIN, 0});
      owners.emplace_back(0, "");
      fds.push_back({listen_fd_, POLLIN, 0});
      owners.emplace_back(1, "");
      for (auto& [peer, o] : out_) {
        if (o.fd < 0) continue;
        short ev = POLLIN;
        if (o.state == State::kConnecting || !o.wbuf.empty()) ev |= POLLOUT;
        fds.push_back({o.fd, ev, 0});
        owners.emplace_back(2, peer);
      }
      for (std::size_t i = 0; i < in_.size(); ++i) {
        short ev = paused ? 0 : POLLIN;
        if (!in_[i].wbuf.empty()) ev |= POLLOUT;
        fds.push_back({in_[i].fd, ev, 0});
        owners.emplace_back(3, std::to_string(i));
      }
      int rc = ::poll(fds.data(), fds.size(), timeout);
      if (rc < 0 && errno != EINTR) break;
      if (rc <= 0) continue;

      std::vector<std::size_t> closed;
      for (std::size_t k = 0; k < fds.size(); ++k) {
        auto re = fds[k].revents;
        if (re == 0) continue;
        auto [kind, key] = owners[k];
        if (kind == 0) {
          std::uint8_t buf[256];
          while (::read(wake_[0], buf, sizeof(buf)) > 0) {
          }
          wake_pending_ = false;
        } else if (kind == 1) {
          for (;;) {
            int fd = ::accept(listen_fd_, nullptr, nullptr);
            if (fd < 0) break;
            set_nonblocking(fd);
            set_nodelay(fd);
            in_.push_back(Inbound{fd, "", {}, {}, 0});
          }
        } else if (kind == 2) {
          auto& o = out_.at(key);
          if (o.state == State::kConnecting) {
            if (re & (POLLOUT | POLLERR | POLLHUP)) on_connected(o);
            if (o.state == State::kIdle) continue;
          }
          if ((re & POLLIN) || (re & (POLLERR | POLLHUP))) {
            if (!read_some(o.fd, o.rbuf)) {
              fail(o);
              continue;
            }
            handle_outbound_frames(o);
            if (o.state == State::kIdle) continue;
          }
          if (!o.wbuf.empty() && !write_some(o.fd, o.wbuf, o.wpos)) fail(o);
        } else {
          auto idx = std::stoul(key);
          auto& in = in_[idx];
          bool close_it = false;
          if (re & (POLLIN | POLLERR | POLLHUP)) {
            bool alive = read_some(in.fd, in.rbuf);
            handle_inbound_frames(in, close_it);
            if (!alive) close_it = true;
          }
          if (!close_it && !in.wbuf.empty() && !write_some(in.fd, in.wbuf, in.wpos)) close_it = true;
          if (close_it) closed.push_back(idx);
        }
      }
      for (auto it = closed.rbegin(); it != closed.rend(); ++it) {
        ::close(in_[*it].fd);
        in_.erase(in_.begin() + static_cast<long>(*it));
      }
    }
  }

  void reactor_loop() {
    const auto tick = std::chrono::microseconds(options_.tick_us);
    auto next_tick = Clock::now() + tick;
    while (running_) {
      std::deque<Envelope> batch;
      std::deque<std::function<void()>> fns;
      {
        std::unique_lock lock(in_mu_);
        in_cv_.wait_until(lock, next_tick, [&] {
          return !running_ || !inbound_.empty() || !posted_.empty();
        });
        batch.swap(inbound_);
        fns.swap(posted_);
      }
      if (!running_) break;
      for (auto& fn : fns) fn();
      for (auto& e : batch) node_->on_message(e);
      if (paused_) wake();
      auto now = Clock::now();
      if (now >= next_tick) {
        node_->on_tick();
        next_tick += tick;
        if (next_tick < now) next_tick = now + tick;
      }
    }
  }

  std::shared_ptr<Node> node_;
  HostTable hosts_;
  SocketOptions options_;

  std::mutex out_mu_;
  std::map<std::string, std::deque<Bytes>> staged_;
  std::mutex in_mu_;
  std::condition_variable in_cv_;
  std::deque<Envelope> inbound_;
  std::deque<std::function<void()>> posted_;
  std::atomic<bool> running_{false};
  std::atomic<bool> wake_pending_{false};
  std::atomic<bool> paused_{false};
  int wake_[2] = {-1, -1};
  int listen_fd_ = -1;
  std::thread io_;
  std::thread reactor_;

  std::map<std::string, Outbound> out_;
  std::vector<Inbound> in_;
  // Per sending peer. A new incarnation (restarted process) starts a fresh
  // sequence; so does our own restart, hence `synced`.
  struct PeerIn {
    std::uint64_t incarnation = 0;
    std::uint64_t last = 0;
    bool synced = false;
  };
  std::map<std::string, PeerIn> peers_in_;
  std::uint64_t incarnation_ = std::random_device{}() * 0x100000000ull + std::random_device{}();
};

SocketRunner::SocketRunner(std::shared_ptr<Node> node, HostTable hosts, SocketOptions options)
    : impl_(std::make_unique<Impl>(std::move(node), std::move(hosts), options)) {}

SocketRunner::~SocketRunner() { impl_->stop(); }

void SocketRunner::start() { impl_->start(); }
void SocketRunner::stop() { impl_->stop(); }
void SocketRunner::post(std::function<void()> fn) { impl_->post(std::move(fn)); }
const SocketMetrics& SocketRunner::metrics() const { return impl_->metrics; }
std::uint16_t SocketRunner::listen_port() const { return impl_->port_; }

}  // namespace resa::harness
