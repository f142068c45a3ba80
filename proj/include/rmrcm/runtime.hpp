#pragma once

#include "rmrcm/recursion.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

namespace rmrcm {

// --- topology -----------------------------------------------------------

/// Assignment of finest subdomains to workers and the pairing used at each
/// exchange level. With W = 2^k workers over 2^L leaves, worker w owns the
/// consecutive leaves [w * 2^(L-k), (w + 1) * 2^(L-k)); merges below level
/// k stay inside a worker and levels k-1 ... 0 need one exchange each.
class WorkerTopology {
public:
    WorkerTopology(const DecompositionHierarchy& hierarchy, int workers);

    int workers() const noexcept { return workers_; }
    int depth() const noexcept { return depth_; }
    /// Number of exchange levels, log2(workers).
    int rounds() const noexcept { return rounds_; }
    int leaves_per_worker() const noexcept { return per_worker_; }
    int first_leaf(int worker) const noexcept { return worker * per_worker_; }
    int owner(int leaf) const noexcept { return leaf / per_worker_; }

    /// Partner of `worker` at exchange level `level` (< rounds()): the
    /// worker at the same position in the sibling block.
    int partner(int level, int worker) const;
    /// Worker that solves the interface system of node (level, index): the
    /// lowest-ranked worker of the lower child's block.
    int solver(int level, int index) const;
    /// True when `worker` lies in the upper child block of its level-`level` node.
    bool in_upper_block(int level, int worker) const;
    /// True when `worker` holds the basis set of its node after merging
    /// `level` (first worker of its block of size W / 2^level).
    bool is_leader(int level, int worker) const;

private:
    int workers_;
    int depth_;
    int rounds_;
    int per_worker_;
};

WorkerTopology plan_topology(const DecompositionHierarchy& hierarchy, int workers);

// --- transport ----------------------------------------------------------

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::span<const std::byte> bytes) noexcept;

struct Envelope {
    int from = 0;
    int to = 0;
    int tag = 0;  ///< exchange level, or a phase-specific tag
    std::uint64_t length = 0;
    std::uint64_t checksum = 0;
    std::vector<std::byte> payload;
};

/// Point-to-point transport between workers. Implementations deliver each
/// envelope unchanged; receive() blocks until a matching one arrives.
class Transport {
public:
    virtual ~Transport() = default;
    virtual void send(Envelope envelope) = 0;
    virtual Envelope receive(int self, int from, int tag) = 0;
    /// Unblocks every pending and future receive with a ProtocolError.
    virtual void abort() = 0;
};

/// Mailbox-per-worker transport for workers living in one process.
/// Optional random delays before delivery exercise arbitrary arrival
/// orders.
class InProcessTransport : public Transport {
public:
    /// `validator(self, from, tag)` returns false for envelopes the receiver
    /// never expects; such envelopes raise a ProtocolError on receipt.
    using Validator = bool (*)(const void* context, int self, int from, int tag);

    explicit InProcessTransport(int workers, std::uint64_t delay_seed = 0, int max_delay_us = 0);

    void set_validator(Validator v, const void* context) noexcept
    {
        validator_ = v;
        validator_context_ = context;
    }

    void send(Envelope envelope) override;
    Envelope receive(int self, int from, int tag) override;
    void abort() override;

    std::int64_t messages_sent() const noexcept { return sent_.load(); }
    std::int64_t bytes_sent() const noexcept { return bytes_.load(); }

private:
    struct Mailbox {
        std::mutex mutex;
        std::condition_variable ready;
        std::deque<Envelope> queue;
    };
    std::vector<Mailbox> boxes_;
    std::uint64_t delay_seed_;
    int max_delay_us_;
    std::atomic<bool> aborted_{false};
    std::atomic<std::int64_t> sent_{0};
    std::atomic<std::int64_t> bytes_{0};
    Validator validator_ = nullptr;
    const void* validator_context_ = nullptr;
};

/// Byte encoding of the values exchanged between workers.
std::vector<std::byte> encode(const BasisSet& set);
BasisSet decode_basis_set(std::span<const std::byte> bytes);
std::vector<std::byte> encode(const std::vector<std::vector<double>>& blocks);
std::vector<std::vector<double>> decode_blocks(std::span<const std::byte> bytes);

/// Typed view of a transport for one worker: stamps length and checksum on
/// send, verifies both on receive.
class Channel {
public:
    Channel(Transport& transport, int self) : transport_(&transport), self_(self) {}

    void send(int to, int tag, std::vector<std::byte> payload);
    std::vector<std::byte> receive(int from, int tag);

private:
    Transport* transport_;
    int self_;
};

// --- timed execution ----------------------------------------------------

struct WorkerTiming {
    double mmbf = 0.0;
    double interface = 0.0;
    double comm = 0.0;
    double total = 0.0;
};

/// Run-level times are averages over workers for the three categories and
/// wall-clock time for the total, so mmbf + interface + comm <= total.
struct TimingReport {
    double mmbf_time = 0.0;
    double interface_time = 0.0;
    double comm_time = 0.0;
    double total_time = 0.0;
    std::vector<WorkerTiming> workers;

    WorkerTiming maxima() const;
    WorkerTiming sums() const;
};

struct RunOptions {
    int workers = 1;
    /// Random per-message delay for stress testing (0 disables).
    int max_delay_us = 0;
    std::uint64_t delay_seed = 1;
};

struct RunResult {
    MrcmResult mrcm;
    TimingReport timing;
    std::int64_t messages = 0;        ///< all envelopes
    std::int64_t exchange_messages = 0;  ///< envelopes of the bottom-up exchanges
    int exchange_rounds = 0;
};

/// Solves `problem` on `options.workers` concurrent workers.
RunResult timed_run(const MrcmProblem& problem, const RunOptions& options);

} // namespace rmrcm
