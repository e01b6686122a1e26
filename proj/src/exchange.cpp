#include "olap/exchange.hpp"

#include <algorithm>
#include <bit>
#include <condition_variable>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

namespace olap {

// ---------------------------------------------------------------------------
// Comm

std::vector<std::uint64_t> Comm::all_to_all_counts(std::span<const std::uint64_t> counts) {
  const int p = size();
  if (static_cast<int>(counts.size()) != p) throw ContractViolation("counts vector must have one entry per rank");
  std::vector<Bytes> out(p);
  for (int d = 0; d < p; ++d) {
    out[d].resize(sizeof(std::uint64_t));
    std::memcpy(out[d].data(), &counts[d], sizeof(std::uint64_t));
  }
  auto in = exchange(std::move(out));
  std::vector<std::uint64_t> result(p);
  for (int s = 0; s < p; ++s) {
    if (in[s].size() != sizeof(std::uint64_t)) throw CommAborted("malformed counts message");
    std::memcpy(&result[s], in[s].data(), sizeof(std::uint64_t));
  }
  return result;
}

std::vector<Bytes> Comm::all_to_all_v(std::vector<Bytes> outgoing) {
  const int p = size();
  if (static_cast<int>(outgoing.size()) != p) throw ContractViolation("one outgoing buffer per rank required");
  std::uint64_t total = 0, remote = 0;
  for (int d = 0; d < p; ++d) {
    total += outgoing[d].size();
    if (d != rank()) remote += outgoing[d].size();
  }
  if (total > round_cap_)
    throw ContractViolation("exchange round of " + std::to_string(total) + " bytes exceeds cap " +
                            std::to_string(round_cap_));
  auto in = exchange(std::move(outgoing));
  stats_.rounds += 1;
  stats_.bytes_sent += remote;
  stats_.peak_round_bytes = std::max(stats_.peak_round_bytes, total);
  for (int s = 0; s < p; ++s)
    if (s != rank()) stats_.bytes_received += in[s].size();
  return in;
}

std::vector<std::uint64_t> Comm::all_gather(std::uint64_t value) {
  std::vector<std::uint64_t> counts(size(), value);
  return all_to_all_counts(counts);
}

std::uint64_t Comm::all_reduce_sum(std::uint64_t value) {
  auto all = all_gather(value);
  return std::accumulate(all.begin(), all.end(), std::uint64_t{0});
}

std::uint64_t Comm::all_reduce_max(std::uint64_t value) {
  auto all = all_gather(value);
  return *std::max_element(all.begin(), all.end());
}

double Comm::all_reduce_max(double value) {
  auto all = all_gather(std::bit_cast<std::uint64_t>(value));
  double best = std::bit_cast<double>(all[0]);
  for (auto v : all) best = std::max(best, std::bit_cast<double>(v));
  return best;
}

double Comm::all_reduce_sum(double value) {
  auto all = all_gather(std::bit_cast<std::uint64_t>(value));
  double sum = 0;
  for (auto v : all) sum += std::bit_cast<double>(v);
  return sum;
}

void Comm::barrier() { (void)all_gather(0); }

std::vector<int> Comm::source_order() {
  std::vector<int> order(size());
  std::iota(order.begin(), order.end(), 0);
  if (shuffle_) std::shuffle(order.begin(), order.end(), shuffle_rng_);
  return order;
}

void Comm::set_source_shuffle(std::uint64_t seed) {
  shuffle_ = true;
  shuffle_rng_.seed(seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(rank() + 1)));
}

// ---------------------------------------------------------------------------
// In-process backend

class InProcHub {
 public:
  explicit InProcHub(int ranks)
      : ranks_(ranks), slots_(static_cast<std::size_t>(ranks) * ranks) {}

  int ranks() const { return ranks_; }
  Bytes& slot(int src, int dst) { return slots_[static_cast<std::size_t>(src) * ranks_ + dst]; }

  void wait() {
    std::unique_lock lock(mu_);
    check();
    const auto gen = generation_;
    if (++arrived_ == ranks_) {
      arrived_ = 0;
      ++generation_;
      cv_.notify_all();
      return;
    }
    cv_.wait(lock, [&] { return generation_ != gen || aborted_; });
    check();
  }

  void abort(const std::string& why) {
    std::lock_guard lock(mu_);
    if (!aborted_) {
      aborted_ = true;
      reason_ = why;
    }
    cv_.notify_all();
  }

 private:
  void check() const {
    if (aborted_) throw CommAborted("collective aborted: " + reason_);
  }

  int ranks_;
  std::vector<Bytes> slots_;
  std::mutex mu_;
  std::condition_variable cv_;
  int arrived_ = 0;
  std::uint64_t generation_ = 0;
  bool aborted_ = false;
  std::string reason_;
};

std::shared_ptr<InProcHub> make_inproc_hub(int ranks) {
  if (ranks <= 0) throw std::invalid_argument("rank count must be positive");
  return std::make_shared<InProcHub>(ranks);
}

void abort_hub(InProcHub& hub, const std::string& why) { hub.abort(why); }

InProcComm::InProcComm(std::shared_ptr<InProcHub> hub, int rank) : hub_(std::move(hub)), rank_(rank) {
  if (rank < 0 || rank >= hub_->ranks()) throw std::invalid_argument("rank out of range");
}

int InProcComm::size() const { return hub_->ranks(); }

std::vector<Bytes> InProcComm::exchange(std::vector<Bytes> outgoing) {
  const int p = hub_->ranks();
  for (int d = 0; d < p; ++d) hub_->slot(rank_, d) = std::move(outgoing[d]);
  hub_->wait();
  std::vector<Bytes> in(p);
  for (int s = 0; s < p; ++s) in[s] = std::move(hub_->slot(s, rank_));
  hub_->wait();
  return in;
}

namespace {

void run_threads(int ranks, const std::function<void(int)>& body, const std::function<void(const std::string&)>& on_error) {
  std::vector<std::exception_ptr> errors(ranks);
  std::vector<bool> aborted(ranks, false);
  std::vector<std::thread> threads;
  threads.reserve(ranks);
  for (int r = 0; r < ranks; ++r) {
    threads.emplace_back([&, r] {
      try {
        body(r);
      } catch (const CommAborted& e) {
        errors[r] = std::current_exception();
        aborted[r] = true;
        on_error(e.what());
      } catch (const std::exception& e) {
        errors[r] = std::current_exception();
        on_error("rank " + std::to_string(r) + ": " + e.what());
      } catch (...) {
        errors[r] = std::current_exception();
        on_error("rank " + std::to_string(r) + ": unknown error");
      }
    });
  }
  for (auto& t : threads) t.join();
  for (int r = 0; r < ranks; ++r)
    if (errors[r] && !aborted[r]) std::rethrow_exception(errors[r]);
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

void run_inproc(int ranks, const std::function<void(Comm&)>& fn) {
  auto hub = make_inproc_hub(ranks);
  run_threads(
      ranks,
      [&](int r) {
        InProcComm comm(hub, r);
        fn(comm);
      },
      [&](const std::string& why) { hub->abort(why); });
}

void run_socket_threads(int ranks, const std::function<void(Comm&)>& fn) {
  auto mesh = bind_loopback_mesh(ranks);
  run_threads(
      ranks,
      [&](int r) {
        SocketOptions opts;
        opts.listen_fd = mesh.listen_fds[r];
        SocketComm comm(mesh.hosts, r, opts);
        fn(comm);
      },
      // Unwinding closes the failed rank's sockets, which aborts its peers.
      [](const std::string&) {});
}

// ---------------------------------------------------------------------------
// Staged streaming

StreamStats staged_stream(Comm& comm, std::size_t cap, const ItemProducer& next,
                          const ItemConsumer& deliver) {
  const int p = comm.size();
  StreamStats stats;
  ItemSink sink;
  bool exhausted = false;
  bool any_more = true;

  while (any_more) {
    std::vector<Bytes> out(p);
    std::vector<std::uint64_t> items(p, 0);
    std::size_t used = 0;

    auto place = [&]() -> bool {
      const std::size_t framed = kFrameHeader + sink.payload().size();
      if (framed > cap)
        throw ContractViolation("single item of " + std::to_string(framed) + " bytes exceeds round cap " +
                                std::to_string(cap));
      if (used + framed > cap) return false;
      const int d = sink.dest();
      if (d < 0 || d >= p) throw ContractViolation("item destination " + std::to_string(d) + " out of range");
      auto& buf = out[d];
      const auto len = static_cast<std::uint32_t>(sink.payload().size());
      const std::uint8_t header[kFrameHeader] = {
          static_cast<std::uint8_t>(len), static_cast<std::uint8_t>(len >> 8),
          static_cast<std::uint8_t>(len >> 16), static_cast<std::uint8_t>(len >> 24)};
      buf.insert(buf.end(), header, header + kFrameHeader);
      buf.insert(buf.end(), sink.payload().begin(), sink.payload().end());
      used += framed;
      ++items[d];
      sink.clear();
      return true;
    };

    if (sink.full() && !place()) throw ContractViolation("round cap too small for pending item");
    while (!exhausted) {
      if (!next(sink)) {
        exhausted = true;
        break;
      }
      if (!sink.full()) throw ContractViolation("producer reported an item but put none");
      if (!place()) break;
    }

    const bool more = !exhausted || sink.full();
    std::vector<std::uint64_t> declared(p);
    for (int d = 0; d < p; ++d) declared[d] = (items[d] << 1) | (more ? 1 : 0);
    auto received_counts = comm.all_to_all_counts(declared);
    any_more = false;
    for (auto c : received_counts) any_more = any_more || (c & 1);

    stats.peak_round_bytes = std::max<std::uint64_t>(stats.peak_round_bytes, used);
    if (used > cap) throw ContractViolation("round payload exceeded cap");
    for (auto n : items) stats.items_sent += n;

    auto in = comm.all_to_all_v(std::move(out));
    ++stats.rounds;
    for (int s : comm.source_order()) {
      const auto& buf = in[s];
      std::size_t off = 0;
      std::uint64_t seen = 0;
      while (off < buf.size()) {
        if (off + kFrameHeader > buf.size()) throw CommAborted("truncated item frame");
        const std::uint32_t len = std::uint32_t{buf[off]} | (std::uint32_t{buf[off + 1]} << 8) |
                                  (std::uint32_t{buf[off + 2]} << 16) | (std::uint32_t{buf[off + 3]} << 24);
        off += kFrameHeader;
        if (off + len > buf.size()) throw CommAborted("truncated item payload");
        deliver(s, std::span<const std::uint8_t>(buf.data() + off, len));
        off += len;
        ++seen;
      }
      if (seen != (received_counts[s] >> 1))
        throw CommAborted("item count from rank " + std::to_string(s) + " disagrees with declared count");
      stats.items_received += seen;
    }
  }
  return stats;
}

}  // namespace olap
