#include "rmrcm/runtime.hpp"

#include "rmrcm/error.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstring>
#include <exception>
#include <random>
#include <thread>

namespace rmrcm {

WorkerTopology::WorkerTopology(const DecompositionHierarchy& hierarchy, int workers)
    : workers_(workers), depth_(hierarchy.depth())
{
    if (!is_power_of_two(workers) || workers > hierarchy.leaf_count())
        throw ConfigError("worker count must be a power of two not exceeding the number of subdomains (" +
                          std::to_string(hierarchy.leaf_count()) + "), got " + std::to_string(workers));
    rounds_ = std::bit_width(unsigned(workers)) - 1;
    per_worker_ = hierarchy.leaf_count() / workers;
}

int WorkerTopology::partner(int level, int worker) const
{
    if (level < 0 || level >= rounds_)
        throw ConfigError("topology: level " + std::to_string(level) + " has no exchange");
    return worker ^ (workers_ >> (level + 1));
}

int WorkerTopology::solver(int level, int index) const
{
    if (level >= rounds_)
        return (index << (depth_ - level)) / per_worker_;
    return index * (workers_ >> level);
}

bool WorkerTopology::in_upper_block(int level, int worker) const
{
    return (worker & (workers_ >> (level + 1))) != 0;
}

bool WorkerTopology::is_leader(int level, int worker) const
{
    return worker % (workers_ >> std::min(level, rounds_)) == 0;
}

WorkerTopology plan_topology(const DecompositionHierarchy& hierarchy, int workers)
{
    return WorkerTopology(hierarchy, workers);
}

// --- transport ----------------------------------------------------------

std::uint64_t fnv1a(std::span<const std::byte> bytes) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (auto b : bytes) {
        h ^= std::uint64_t(b);
        h *= 0x100000001b3ull;
    }
    return h;
}

InProcessTransport::InProcessTransport(int workers, std::uint64_t delay_seed, int max_delay_us)
    : boxes_(std::size_t(workers)), delay_seed_(delay_seed), max_delay_us_(max_delay_us)
{
}

void InProcessTransport::send(Envelope envelope)
{
    if (envelope.to < 0 || envelope.to >= int(boxes_.size()))
        throw ProtocolError("send to unknown worker " + std::to_string(envelope.to));
    if (max_delay_us_ > 0) {
        std::mt19937_64 rng(delay_seed_ ^ (std::uint64_t(envelope.from) << 32) ^ (std::uint64_t(envelope.to) << 16) ^
                            std::uint64_t(envelope.tag));
        std::this_thread::sleep_for(std::chrono::microseconds(rng() % std::uint64_t(max_delay_us_ + 1)));
    }
    sent_ += 1;
    bytes_ += std::int64_t(envelope.payload.size());
    auto& box = boxes_[envelope.to];
    {
        std::lock_guard lock(box.mutex);
        box.queue.push_back(std::move(envelope));
    }
    box.ready.notify_all();
}

Envelope InProcessTransport::receive(int self, int from, int tag)
{
    auto& box = boxes_.at(self);
    std::unique_lock lock(box.mutex);
    for (;;) {
        if (aborted_)
            throw ProtocolError("transport aborted");
        for (auto it = box.queue.begin(); it != box.queue.end(); ++it) {
            if (validator_ && !validator_(validator_context_, self, it->from, it->tag))
                throw ProtocolError("unexpected sender " + std::to_string(it->from) + " for worker " +
                                    std::to_string(self) + " (tag " + std::to_string(it->tag) + ")");
            if (it->from == from && it->tag == tag) {
                Envelope e = std::move(*it);
                box.queue.erase(it);
                return e;
            }
        }
        box.ready.wait(lock);
    }
}

void InProcessTransport::abort()
{
    aborted_ = true;
    for (auto& box : boxes_) {
        std::lock_guard lock(box.mutex);
        box.ready.notify_all();
    }
}

namespace {

class Writer {
public:
    template <class T>
    void put(const T& v)
    {
        const auto* p = reinterpret_cast<const std::byte*>(&v);
        out.insert(out.end(), p, p + sizeof(T));
    }
    void put(const std::vector<double>& v)
    {
        put(std::uint64_t(v.size()));
        const auto* p = reinterpret_cast<const std::byte*>(v.data());
        out.insert(out.end(), p, p + v.size() * sizeof(double));
    }
    void put(const DenseMatrix& m)
    {
        put(std::uint64_t(m.rows));
        put(std::uint64_t(m.cols));
        put(m.data);
    }

    std::vector<std::byte> out;
};

class Reader {
public:
    explicit Reader(std::span<const std::byte> b) : bytes(b) {}

    template <class T>
    T get()
    {
        need(sizeof(T));
        T v;
        std::memcpy(&v, bytes.data() + pos, sizeof(T));
        pos += sizeof(T);
        return v;
    }
    std::vector<double> get_doubles()
    {
        const auto n = get<std::uint64_t>();
        need(n * sizeof(double));
        std::vector<double> v(n);
        std::memcpy(v.data(), bytes.data() + pos, n * sizeof(double));
        pos += n * sizeof(double);
        return v;
    }
    DenseMatrix get_matrix()
    {
        DenseMatrix m;
        m.rows = get<std::uint64_t>();
        m.cols = get<std::uint64_t>();
        m.data = get_doubles();
        if (m.data.size() != m.rows * m.cols)
            throw ProtocolError("payload: matrix size mismatch");
        return m;
    }
    void finish() const
    {
        if (pos != bytes.size())
            throw ProtocolError("payload: trailing bytes");
    }

private:
    void need(std::size_t n) const
    {
        if (bytes.size() - pos < n)
            throw ProtocolError("payload: truncated");
    }

    std::span<const std::byte> bytes;
    std::size_t pos = 0;
};

} // namespace

std::vector<std::byte> encode(const BasisSet& set)
{
    Writer w;
    w.put(std::int32_t(set.level));
    w.put(std::int32_t(set.index));
    w.put(std::uint64_t(set.patches.size()));
    for (int p : set.patches)
        w.put(std::int32_t(p));
    w.put(set.trace);
    w.put(std::uint64_t(set.tables.size()));
    for (const auto& t : set.tables)
        w.put(t);
    return std::move(w.out);
}

BasisSet decode_basis_set(std::span<const std::byte> bytes)
{
    Reader r(bytes);
    BasisSet set;
    set.level = r.get<std::int32_t>();
    set.index = r.get<std::int32_t>();
    const auto np = r.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < np; ++i)
        set.patches.push_back(r.get<std::int32_t>());
    set.trace = r.get_matrix();
    const auto nt = r.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < nt; ++i)
        set.tables.push_back(r.get_matrix());
    r.finish();
    return set;
}

std::vector<std::byte> encode(const std::vector<std::vector<double>>& blocks)
{
    Writer w;
    w.put(std::uint64_t(blocks.size()));
    for (const auto& b : blocks)
        w.put(b);
    return std::move(w.out);
}

std::vector<std::vector<double>> decode_blocks(std::span<const std::byte> bytes)
{
    Reader r(bytes);
    std::vector<std::vector<double>> out(r.get<std::uint64_t>());
    for (auto& b : out)
        b = r.get_doubles();
    r.finish();
    return out;
}

void Channel::send(int to, int tag, std::vector<std::byte> payload)
{
    Envelope e;
    e.from = self_;
    e.to = to;
    e.tag = tag;
    e.length = payload.size();
    e.checksum = fnv1a(payload);
    e.payload = std::move(payload);
    transport_->send(std::move(e));
}

std::vector<std::byte> Channel::receive(int from, int tag)
{
    Envelope e = transport_->receive(self_, from, tag);
    if (e.from != from || e.tag != tag)
        throw ProtocolError("unexpected envelope from worker " + std::to_string(e.from));
    if (e.length != e.payload.size() || e.checksum != fnv1a(e.payload))
        throw ProtocolError("checksum mismatch on message from worker " + std::to_string(from));
    return std::move(e.payload);
}

// --- timed execution ----------------------------------------------------

WorkerTiming TimingReport::maxima() const
{
    WorkerTiming m;
    for (const auto& w : workers) {
        m.mmbf = std::max(m.mmbf, w.mmbf);
        m.interface = std::max(m.interface, w.interface);
        m.comm = std::max(m.comm, w.comm);
        m.total = std::max(m.total, w.total);
    }
    return m;
}

WorkerTiming TimingReport::sums() const
{
    WorkerTiming s;
    for (const auto& w : workers) {
        s.mmbf += w.mmbf;
        s.interface += w.interface;
        s.comm += w.comm;
        s.total += w.total;
    }
    return s;
}

namespace {

constexpr int scatter_tag = 1000;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct Shared {
    const MrcmProblem* problem;
    const WorkerTopology* topo;
    std::vector<DiscreteSolution> leaves;
    std::vector<std::vector<double>> coefficients;
    std::vector<std::vector<InterfaceSystem>> systems;  // per worker
    std::vector<WorkerTiming> timing;
    std::vector<std::size_t> basis_bytes, table_bytes;
    std::vector<int> local_solves;
    std::atomic<std::int64_t> exchange_sent{0};
};

bool expected_sender(const void* context, int self, int from, int tag)
{
    const auto* topo = static_cast<const WorkerTopology*>(context);
    const int level = tag >= scatter_tag ? tag - scatter_tag : tag;
    return level >= 0 && level < topo->rounds() && topo->partner(level, self) == from;
}

void run_worker(Shared& sh, Transport& transport, int w)
{
    const auto& problem = *sh.problem;
    const auto& topo = *sh.topo;
    const auto& h = problem.hierarchy();
    Channel channel(transport, w);
    WorkerTiming& time = sh.timing[w];
    const auto start = Clock::now();

    const int first = topo.first_leaf(w), count = topo.leaves_per_worker();
    std::vector<LeafBasis> bases;
    std::vector<BasisSet> sets;
    auto t = Clock::now();
    for (int l = first; l < first + count; ++l) {
        bases.push_back(compute_leaf_basis(problem, l));
        sh.basis_bytes[w] += bases.back().storage_bytes();
        sh.local_solves[w] += bases.back().local_solves;
    }
    time.mmbf += seconds_since(t);

    t = Clock::now();
    for (const auto& b : bases)
        sets.push_back(leaf_basis_set(problem, b));
    // Merges among this worker's own leaves.
    for (int level = h.depth() - 1; level >= topo.rounds(); --level) {
        std::vector<BasisSet> next;
        for (std::size_t i = 0; i + 1 < sets.size(); i += 2) {
            MergeResult m = merge(problem, level, sets[i].index / 2, sets[i], sets[i + 1]);
            sh.table_bytes[w] += m.set.table_bytes();
            sh.systems[w].push_back(std::move(m.system));
            next.push_back(std::move(m.set));
        }
        sets = std::move(next);
    }
    time.interface += seconds_since(t);

    // Bottom-up exchanges: the upper block hands its basis set to the
    // solver of the lower block; every worker sends one message per level.
    std::optional<BasisSet> mine;
    if (!sets.empty())
        mine = std::move(sets.front());
    for (int level = topo.rounds() - 1; level >= 0; --level) {
        const int partner = topo.partner(level, w);
        const bool leader = topo.is_leader(level + 1, w);
        t = Clock::now();
        if (topo.in_upper_block(level, w)) {
            channel.send(partner, level, leader ? encode(*mine) : std::vector<std::byte>{});
            sh.exchange_sent += 1;
            channel.receive(partner, level);
            if (leader)
                mine.reset();
            time.comm += seconds_since(t);
            continue;
        }
        auto payload = channel.receive(partner, level);
        channel.send(partner, level, {});
        sh.exchange_sent += 1;
        time.comm += seconds_since(t);
        if (!leader)
            continue;
        BasisSet upper = decode_basis_set(payload);
        t = Clock::now();
        MergeResult m = merge(problem, level, mine->index / 2, *mine, upper);
        sh.table_bytes[w] += m.set.table_bytes();
        sh.systems[w].push_back(std::move(m.system));
        mine = std::move(m.set);
        time.interface += seconds_since(t);
    }

    // Top-down scatter of the final coefficients of every leaf.
    std::vector<std::vector<double>> coeffs;
    if (w == 0) {
        for (const auto& tab : mine->tables)
            coeffs.push_back(tab.column(0));
    }
    for (int level = 0; level < topo.rounds(); ++level) {
        const int partner = topo.partner(level, w);
        if (!topo.is_leader(level + 1, w))
            continue;
        t = Clock::now();
        const int block_leaves = (topo.workers() >> (level + 1)) * count;
        if (!topo.in_upper_block(level, w)) {
            std::vector<std::vector<double>> upper(coeffs.begin() + block_leaves, coeffs.end());
            coeffs.resize(block_leaves);
            channel.send(partner, scatter_tag + level, encode(upper));
        } else {
            coeffs = decode_blocks(channel.receive(partner, scatter_tag + level));
        }
        time.comm += seconds_since(t);
    }
    if (int(coeffs.size()) != count)
        throw ProtocolError("worker " + std::to_string(w) + " received coefficients for " +
                            std::to_string(coeffs.size()) + " subdomains, expected " + std::to_string(count));
    for (int i = 0; i < count; ++i) {
        sh.leaves[first + i] = evaluate_leaf(bases[i], problem.space(), coeffs[i]);
        sh.coefficients[first + i] = std::move(coeffs[i]);
    }
    time.total = seconds_since(start);
}

} // namespace

RunResult timed_run(const MrcmProblem& problem, const RunOptions& options)
{
    const WorkerTopology topo(problem.hierarchy(), options.workers);
    const int nw = topo.workers();
    InProcessTransport transport(nw, options.delay_seed, options.max_delay_us);
    transport.set_validator(&expected_sender, &topo);

    Shared sh;
    sh.problem = &problem;
    sh.topo = &topo;
    sh.leaves.resize(problem.hierarchy().leaf_count());
    sh.coefficients.resize(problem.hierarchy().leaf_count());
    sh.systems.resize(nw);
    sh.timing.resize(nw);
    sh.basis_bytes.assign(nw, 0);
    sh.table_bytes.assign(nw, 0);
    sh.local_solves.assign(nw, 0);

    std::vector<std::exception_ptr> errors(nw);
    const auto start = Clock::now();
    {
        std::vector<std::jthread> threads;
        for (int w = 0; w < nw; ++w)
            threads.emplace_back([&, w] {
                try {
                    run_worker(sh, transport, w);
                } catch (...) {
                    errors[w] = std::current_exception();
                    transport.abort();
                }
            });
    }
    const double wall = seconds_since(start);
    // Prefer the original failure over the aborts it caused elsewhere.
    for (auto& e : errors)
        if (e) {
            try {
                std::rethrow_exception(e);
            } catch (const ProtocolError& pe) {
                if (std::string(pe.what()) == "transport aborted")
                    continue;
                throw;
            }
        }

    RunResult r;
    r.mrcm.solution.hierarchy = &problem.hierarchy();
    r.mrcm.solution.leaves = std::move(sh.leaves);
    r.mrcm.coefficients = std::move(sh.coefficients);
    for (int w = 0; w < nw; ++w) {
        for (auto& s : sh.systems[w])
            r.mrcm.systems.push_back(std::move(s));
        r.mrcm.basis_bytes += sh.basis_bytes[w];
        r.mrcm.table_bytes += sh.table_bytes[w];
        r.mrcm.local_solves += sh.local_solves[w];
    }
    std::sort(r.mrcm.systems.begin(), r.mrcm.systems.end(),
              [](const auto& a, const auto& b) { return std::pair(a.level, a.index) < std::pair(b.level, b.index); });

    r.timing.workers = sh.timing;
    const auto sums = r.timing.sums();
    r.timing.mmbf_time = sums.mmbf / nw;
    r.timing.interface_time = sums.interface / nw;
    r.timing.comm_time = sums.comm / nw;
    r.timing.total_time = wall;
    r.messages = transport.messages_sent();
    r.exchange_messages = sh.exchange_sent.load();
    r.exchange_rounds = topo.rounds();
    return r;
}

} // namespace rmrcm
