#pragma once

#include <cstdint>
#include <cstring>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace olap {

using Bytes = std::vector<std::uint8_t>;

// A peer failed or disconnected; every rank in the collective gives up.
class CommAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke an exchange precondition (oversize round, bad framing).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline constexpr std::size_t kDefaultRoundCap = std::size_t{64} << 20;

struct ExchangeStats {
  std::uint64_t rounds = 0;
  std::uint64_t bytes_sent = 0;       // excludes the self slot
  std::uint64_t bytes_received = 0;   // excludes the self slot
  std::uint64_t peak_round_bytes = 0; // largest per-call outgoing payload, self included
};

// Bulk-synchronous all-to-all among P ranks. Every public call is
// collective: all ranks must make the same sequence of calls.
class Comm {
 public:
  virtual ~Comm() = default;

  virtual int rank() const = 0;
  virtual int size() const = 0;
  virtual std::string_view backend() const = 0;

  // Rank i receives what rank j declared for destination i.
  std::vector<std::uint64_t> all_to_all_counts(std::span<const std::uint64_t> counts);

  // outgoing[d] goes to rank d; result[s] came from rank s. Bytes from one
  // sender arrive in order. Throws ContractViolation when the summed
  // outgoing payload exceeds round_cap().
  std::vector<Bytes> all_to_all_v(std::vector<Bytes> outgoing);

  std::vector<std::uint64_t> all_gather(std::uint64_t value);
  std::uint64_t all_reduce_sum(std::uint64_t value);
  std::uint64_t all_reduce_max(std::uint64_t value);
  double all_reduce_max(double value);
  double all_reduce_sum(double value);
  void barrier();

  std::size_t round_cap() const { return round_cap_; }
  void set_round_cap(std::size_t cap) { round_cap_ = cap; }

  const ExchangeStats& stats() const { return stats_; }
  void reset_stats() { stats_ = {}; }

  // Order in which callers should visit per-source results. Identity unless
  // a shuffle seed is set, in which case every call yields a fresh random
  // permutation; used to check that results ignore arrival order.
  std::vector<int> source_order();
  void set_source_shuffle(std::uint64_t seed);

 protected:
  virtual std::vector<Bytes> exchange(std::vector<Bytes> outgoing) = 0;

 private:
  std::size_t round_cap_ = SIZE_MAX;
  ExchangeStats stats_;
  bool shuffle_ = false;
  std::mt19937_64 shuffle_rng_;
};

class InProcHub;

// One rank's endpoint on a shared in-process hub.
class InProcComm final : public Comm {
 public:
  InProcComm(std::shared_ptr<InProcHub> hub, int rank);
  int rank() const override { return rank_; }
  int size() const override;
  std::string_view backend() const override { return "inproc"; }

 protected:
  std::vector<Bytes> exchange(std::vector<Bytes> outgoing) override;

 private:
  std::shared_ptr<InProcHub> hub_;
  int rank_;
};

std::shared_ptr<InProcHub> make_inproc_hub(int ranks);
// Wakes every rank blocked in, or later entering, a collective on `hub`.
void abort_hub(InProcHub& hub, const std::string& why);

// Runs fn on P threads, one InProcComm each. If any rank throws, the hub is
// aborted so the others unblock, and the first non-abort error is rethrown.
void run_inproc(int ranks, const std::function<void(Comm&)>& fn);

struct HostPort {
  std::string host;
  std::uint16_t port = 0;
};

// Newline-separated host:port entries, indexed by rank. Blank lines and
// lines starting with '#' are skipped.
std::vector<HostPort> parse_hostfile(std::string_view text);
std::vector<HostPort> read_hostfile(const std::string& path);

struct SocketOptions {
  int listen_fd = -1;           // pre-bound listener; otherwise bind hosts[rank]
  double connect_timeout_s = 30;
  double io_timeout_s = 300;
};

// Full TCP mesh. Lower ranks accept, higher ranks connect; a startup barrier
// (also pre-warming every connection) completes before the constructor
// returns. Per call and peer, the wire carries a little-endian
// {round:u32, dst:u32, byte_len:u64} header followed by byte_len bytes.
class SocketComm final : public Comm {
 public:
  SocketComm(std::vector<HostPort> hosts, int rank, SocketOptions options = {});
  ~SocketComm() override;
  SocketComm(const SocketComm&) = delete;
  SocketComm& operator=(const SocketComm&) = delete;

  int rank() const override { return rank_; }
  int size() const override { return static_cast<int>(hosts_.size()); }
  std::string_view backend() const override { return "socket"; }

 protected:
  std::vector<Bytes> exchange(std::vector<Bytes> outgoing) override;

 private:
  std::vector<HostPort> hosts_;
  int rank_;
  SocketOptions options_;
  std::vector<int> peers_;  // fd per rank, -1 for self
  std::uint32_t round_ = 0;
};

// Binds `ranks` loopback listeners on ephemeral ports and returns them with
// the matching host list. Used to stand up socket meshes inside one process.
struct LoopbackMesh {
  std::vector<HostPort> hosts;
  std::vector<int> listen_fds;
};
LoopbackMesh bind_loopback_mesh(int ranks);

// Like run_inproc, with one SocketComm per thread over loopback TCP.
void run_socket_threads(int ranks, const std::function<void(Comm&)>& fn);

// ---------------------------------------------------------------------------
// Memory-capped streaming exchange.

// Receives one item at a time from a stream producer.
class ItemSink {
 public:
  void put(int dest, std::span<const std::uint8_t> payload) {
    dest_ = dest;
    payload_.assign(payload.begin(), payload.end());
    full_ = true;
  }
  template <typename T>
  void put_pod(int dest, const T& value) {
    static_assert(std::is_trivially_copyable_v<T>);
    put(dest, {reinterpret_cast<const std::uint8_t*>(&value), sizeof(T)});
  }

  bool full() const { return full_; }
  int dest() const { return dest_; }
  const Bytes& payload() const { return payload_; }
  void clear() { full_ = false; }

 private:
  int dest_ = -1;
  Bytes payload_;
  bool full_ = false;
};

struct StreamStats {
  std::uint64_t rounds = 0;
  std::uint64_t items_sent = 0;
  std::uint64_t items_received = 0;
  std::uint64_t peak_round_bytes = 0;
};

// Length-prefixed framing: u32 little-endian length, then the payload.
inline constexpr std::size_t kFrameHeader = 4;

// Puts exactly one item into the sink and returns true, or returns false
// once the rank has nothing left to send.
using ItemProducer = std::function<bool(ItemSink&)>;
using ItemConsumer = std::function<void(int source, std::span<const std::uint8_t> item)>;

// Streams items to their destinations in rounds whose per-rank outgoing
// bytes (framing included) stay within `cap`. Rounds continue until no rank
// has items left; exhausted ranks take part with empty payloads. Each
// round's counts exchange carries a "more data" flag in the low bit.
StreamStats staged_stream(Comm& comm, std::size_t cap, const ItemProducer& next,
                          const ItemConsumer& deliver);

template <typename T>
T read_pod(std::span<const std::uint8_t> item) {
  static_assert(std::is_trivially_copyable_v<T>);
  if (item.size() != sizeof(T)) throw ContractViolation("item size does not match record type");
  T v;
  std::memcpy(&v, item.data(), sizeof(T));
  return v;
}

}  // namespace olap
