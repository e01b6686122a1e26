#include "olap/exchange.hpp"

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
#include <fstream>
#include <sstream>
#include <thread>

namespace olap {

namespace {

constexpr std::size_t kWireHeader = 16;

[[noreturn]] void fail(const std::string& what) {
  throw CommAborted(what + ": " + std::strerror(errno));
}

void put_le(std::uint8_t* out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::uint64_t get_le(const std::uint8_t* in, int bytes) {
  std::uint64_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | in[i];
  return v;
}

void write_all(int fd, const void* data, std::size_t n) {
  auto p = static_cast<const std::uint8_t*>(data);
  while (n > 0) {
    auto w = ::send(fd, p, n, MSG_NOSIGNAL);
    if (w < 0) {
      if (errno == EINTR) continue;
      fail("socket write");
    }
    p += w;
    n -= static_cast<std::size_t>(w);
  }
}

void read_all(int fd, void* data, std::size_t n) {
  auto p = static_cast<std::uint8_t*>(data);
  while (n > 0) {
    auto r = ::recv(fd, p, n, 0);
    if (r == 0) throw CommAborted("peer closed connection during startup");
    if (r < 0) {
      if (errno == EINTR) continue;
      fail("socket read");
    }
    p += r;
    n -= static_cast<std::size_t>(r);
  }
}

sockaddr_in resolve(const HostPort& hp) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (int rc = ::getaddrinfo(hp.host.c_str(), nullptr, &hints, &res); rc != 0)
    throw CommAborted("cannot resolve host '" + hp.host + "': " + ::gai_strerror(rc));
  sockaddr_in addr{};
  std::memcpy(&addr, res->ai_addr, sizeof(addr));
  ::freeaddrinfo(res);
  addr.sin_port = htons(hp.port);
  return addr;
}

int listen_on(const HostPort& hp) {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) fail("socket");
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_ANY);
  addr.sin_port = htons(hp.port);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    ::close(fd);
    fail("bind port " + std::to_string(hp.port));
  }
  if (::listen(fd, SOMAXCONN) < 0) {
    ::close(fd);
    fail("listen");
  }
  return fd;
}

void tune(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

void set_nonblocking(int fd) {
  int flags = ::fcntl(fd, F_GETFL, 0);
  ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

}  // namespace

std::vector<HostPort> parse_hostfile(std::string_view text) {
  std::vector<HostPort> hosts;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.pop_back();
    auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    line = line.substr(first);
    auto colon = line.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == line.size())
      throw std::invalid_argument("hostfile line " + std::to_string(lineno) + ": expected host:port");
    HostPort hp;
    hp.host = line.substr(0, colon);
    const auto port = std::stoul(line.substr(colon + 1));
    if (port == 0 || port > 65535)
      throw std::invalid_argument("hostfile line " + std::to_string(lineno) + ": bad port");
    hp.port = static_cast<std::uint16_t>(port);
    hosts.push_back(std::move(hp));
  }
  if (hosts.empty()) throw std::invalid_argument("hostfile lists no ranks");
  return hosts;
}

std::vector<HostPort> read_hostfile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open hostfile '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_hostfile(ss.str());
}

SocketComm::SocketComm(std::vector<HostPort> hosts, int rank, SocketOptions options)
    : hosts_(std::move(hosts)), rank_(rank), options_(options) {
  const int p = static_cast<int>(hosts_.size());
  if (rank < 0 || rank >= p) throw std::invalid_argument("rank out of range for hostfile");
  peers_.assign(p, -1);

  // A listener passed in through options is owned (and closed) from here on.
  int listener = options_.listen_fd;
  try {
    if (listener < 0 && rank_ + 1 < p) listener = listen_on(hosts_[rank_]);

    // Connect down to every lower rank; each handshake names this rank.
    const auto deadline = std::chrono::steady_clock::now() +
                          std::chrono::duration<double>(options_.connect_timeout_s);
    for (int j = 0; j < rank_; ++j) {
      const auto addr = resolve(hosts_[j]);
      for (;;) {
        int fd = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd < 0) fail("socket");
        if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) == 0) {
          peers_[j] = fd;
          break;
        }
        ::close(fd);
        if (std::chrono::steady_clock::now() > deadline)
          fail("connect to rank " + std::to_string(j) + " at " + hosts_[j].host + ":" +
               std::to_string(hosts_[j].port));
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
      }
      tune(peers_[j]);
      std::uint8_t hello[8];
      put_le(hello, static_cast<std::uint32_t>(rank_), 4);
      put_le(hello + 4, static_cast<std::uint32_t>(p), 4);
      write_all(peers_[j], hello, sizeof(hello));
    }

    // Accept every higher rank.
    for (int accepted = 0; accepted < p - 1 - rank_; ++accepted) {
      pollfd pfd{listener, POLLIN, 0};
      const int rc = ::poll(&pfd, 1, static_cast<int>(options_.connect_timeout_s * 1000));
      if (rc == 0) throw CommAborted("timed out waiting for higher ranks to connect");
      if (rc < 0) fail("poll on listener");
      int fd = ::accept(listener, nullptr, nullptr);
      if (fd < 0) fail("accept");
      tune(fd);
      std::uint8_t hello[8];
      read_all(fd, hello, sizeof(hello));
      const auto peer = static_cast<int>(get_le(hello, 4));
      const auto peer_p = static_cast<int>(get_le(hello + 4, 4));
      if (peer_p != p || peer <= rank_ || peer >= p || peers_[peer] != -1) {
        ::close(fd);
        throw CommAborted("unexpected handshake from rank " + std::to_string(peer));
      }
      peers_[peer] = fd;
    }
  } catch (...) {
    if (listener >= 0) ::close(listener);
    for (int fd : peers_)
      if (fd >= 0) ::close(fd);
    throw;
  }
  if (listener >= 0) ::close(listener);
  for (int fd : peers_)
    if (fd >= 0) set_nonblocking(fd);

  // Startup barrier; doubles as connection warm-up.
  barrier();
  reset_stats();
}

SocketComm::~SocketComm() {
  for (int fd : peers_)
    if (fd >= 0) ::close(fd);
}

std::vector<Bytes> SocketComm::exchange(std::vector<Bytes> outgoing) {
  const int p = size();
  const std::uint32_t round = round_++;
  std::vector<Bytes> in(p);
  in[rank_] = std::move(outgoing[rank_]);

  struct Peer {
    std::uint8_t send_header[kWireHeader];
    std::size_t sent = 0;  // bytes of header+payload written
    std::uint8_t recv_header[kWireHeader];
    std::size_t received = 0;  // bytes of header+payload read
    std::uint64_t recv_len = 0;
    bool send_done = false;
    bool recv_done = false;
  };
  std::vector<Peer> state(p);
  int pending = 0;
  for (int d = 0; d < p; ++d) {
    if (d == rank_) continue;
    put_le(state[d].send_header, round, 4);
    put_le(state[d].send_header + 4, static_cast<std::uint32_t>(d), 4);
    put_le(state[d].send_header + 8, outgoing[d].size(), 8);
    pending += 2;
  }

  std::vector<pollfd> fds;
  std::vector<int> who;
  while (pending > 0) {
    fds.clear();
    who.clear();
    for (int d = 0; d < p; ++d) {
      if (d == rank_) continue;
      short ev = 0;
      if (!state[d].send_done) ev |= POLLOUT;
      if (!state[d].recv_done) ev |= POLLIN;
      if (ev) {
        fds.push_back({peers_[d], ev, 0});
        who.push_back(d);
      }
    }
    const int rc = ::poll(fds.data(), fds.size(), static_cast<int>(options_.io_timeout_s * 1000));
    if (rc == 0) throw CommAborted("exchange round " + std::to_string(round) + " timed out");
    if (rc < 0) {
      if (errno == EINTR) continue;
      fail("poll");
    }
    for (std::size_t i = 0; i < fds.size(); ++i) {
      const int d = who[i];
      auto& st = state[d];
      if (fds[i].revents & (POLLERR | POLLNVAL))
        throw CommAborted("connection to rank " + std::to_string(d) + " failed");
      if ((fds[i].revents & POLLOUT) && !st.send_done) {
        const auto& payload = outgoing[d];
        const std::size_t total = kWireHeader + payload.size();
        while (st.sent < total) {
          const std::uint8_t* src;
          std::size_t n;
          if (st.sent < kWireHeader) {
            src = st.send_header + st.sent;
            n = kWireHeader - st.sent;
          } else {
            src = payload.data() + (st.sent - kWireHeader);
            n = total - st.sent;
          }
          auto w = ::send(peers_[d], src, n, MSG_NOSIGNAL);
          if (w < 0) {
            if (errno == EAGAIN || errno == EWOULDBLOCK) break;
            if (errno == EINTR) continue;
            fail("send to rank " + std::to_string(d));
          }
          st.sent += static_cast<std::size_t>(w);
        }
        if (st.sent == total) {
          st.send_done = true;
          --pending;
        }
      }
      if ((fds[i].revents & (POLLIN | POLLHUP)) && !st.recv_done) {
        for (;;) {
          std::uint8_t* dst;
          std::size_t n;
          if (st.received < kWireHeader) {
            dst = st.recv_header + st.received;
            n = kWireHeader - st.received;
          } else {
            auto& buf = in[d];
            const std::size_t off = st.received - kWireHeader;
            if (off == st.recv_len) break;
            dst = buf.data() + off;
            n = st.recv_len - off;
          }
          auto r = ::recv(peers_[d], dst, n, 0);
          if (r == 0) throw CommAborted("rank " + std::to_string(d) + " disconnected");
          if (r < 0) {
            if (errno == EAGAIN || errno == EWOULDBLOCK) break;
            if (errno == EINTR) continue;
            fail("recv from rank " + std::to_string(d));
          }
          const bool had_header = st.received >= kWireHeader;
          st.received += static_cast<std::size_t>(r);
          if (!had_header && st.received == kWireHeader) {
            const auto got_round = static_cast<std::uint32_t>(get_le(st.recv_header, 4));
            const auto got_dst = static_cast<int>(get_le(st.recv_header + 4, 4));
            if (got_round != round || got_dst != rank_)
              throw CommAborted("rank " + std::to_string(d) + " is out of step (round " +
                                std::to_string(got_round) + ", expected " + std::to_string(round) + ")");
            st.recv_len = get_le(st.recv_header + 8, 8);
            in[d].resize(st.recv_len);
          }
        }
        if (st.received >= kWireHeader && st.received - kWireHeader == st.recv_len) {
          st.recv_done = true;
          --pending;
        }
      }
    }
  }
  return in;
}

LoopbackMesh bind_loopback_mesh(int ranks) {
  LoopbackMesh mesh;
  for (int r = 0; r < ranks; ++r) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) fail("socket");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    socklen_t len = sizeof(addr);
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0 || ::listen(fd, SOMAXCONN) < 0 ||
        ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) < 0) {
      ::close(fd);
      for (int other : mesh.listen_fds) ::close(other);
      fail("bind loopback listener");
    }
    mesh.hosts.push_back({"127.0.0.1", ntohs(addr.sin_port)});
    mesh.listen_fds.push_back(fd);
  }
  return mesh;
}

}  // namespace olap
