#pragma once

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "paraflame/binio.hpp"
#include "paraflame/rng.hpp"
#include "paraflame/solver.hpp"

// Trajectory generation and the on-disk container.
//
// Binary layout (little-endian):
//   magic "PFT1" | version u32 | equation tag u8 (0=MS, 1=KS) | N u32 |
//   record count u32 | per record: gamma f64, seed u64, dt f64,
//   frame count u32, frames as N f64 values each.

namespace paraflame::data {

struct TrajectoryRecord {
    double gamma = 0.0;
    std::uint64_t seed = 0;
    double dt = 0.015;
    std::vector<Field> frames;
};

struct TrajectorySet {
    solver::Equation equation = solver::Equation::KS;
    std::uint32_t grid_size = 256;
    std::vector<TrajectoryRecord> records;
};

struct PlanEntry {
    double gamma = 0.0;
    std::uint32_t sequences = 0;
    std::uint32_t frames = 0;
};

struct GenerationPlan {
    solver::Equation equation = solver::Equation::KS;
    std::uint32_t grid_size = 256;
    double dt = 0.015;
    double abs_tol = 1e-9;
    double rel_tol = 1e-7;
    bool dealias = true;
    std::uint64_t base_seed = 0;
    double ic_low = 0.0;
    double ic_high = 0.03;
    std::vector<PlanEntry> entries;
};

/// i.i.d. per-grid-point uniform [ic_low, ic_high) draw from the counter
/// generator; grid value j depends only on (seed, j).
inline Field sample_initial_condition(std::uint32_t n, std::uint64_t seed, double lo = 0.0,
                                      double hi = 0.03) {
    CounterRng rng(seed);
    Field f(n);
    for (std::uint32_t j = 0; j < n; ++j) f.values[j] = lo + (hi - lo) * rng.uniform01_at(j);
    return f;
}

/// Training protocol for the MS equation: 250 x 1000-frame sequences at the
/// three large nu, 250 x 500-frame sequences at the three small nu, plus one
/// extra-long 125000-frame sequence carrying the long-time behavior.
inline GenerationPlan paper_ms_plan() {
    GenerationPlan plan;
    plan.equation = solver::Equation::MS;
    plan.entries = {
        {0.025, 250, 500}, {0.035, 250, 500}, {0.05, 250, 500}, {0.05, 1, 125000},
        {0.07, 250, 1000}, {0.1, 250, 1000},  {0.15, 250, 1000},
    };
    return plan;
}

/// Training protocol for the KS equation: 250 x 500-frame sequences (0 < t < 7.5)
/// at each of the five beta values.
inline GenerationPlan paper_ks_plan() {
    GenerationPlan plan;
    plan.equation = solver::Equation::KS;
    for (double beta : {6.0, 9.0, 12.0, 18.0, 24.0}) plan.entries.push_back({beta, 250, 500});
    return plan;
}

/// Companion validation plan: 10% of the sequence counts, seeds drawn from a
/// disjoint range.
inline GenerationPlan validation_plan(GenerationPlan plan) {
    for (auto& e : plan.entries)
        e.sequences = std::max<std::uint32_t>(1, e.sequences / 10);
    plan.base_seed += 0x8000000000000000ull;
    return plan;
}

/// Runs the plan, one solver trajectory per (entry, sequence) with a unique
/// derived seed. Records parallelize across worker threads; output order is
/// the plan order regardless of scheduling.
inline TrajectorySet generate(const GenerationPlan& plan) {
    TrajectorySet set;
    set.equation = plan.equation;
    set.grid_size = plan.grid_size;

    struct Job {
        double gamma;
        std::uint64_t seed;
        std::uint32_t frames;
    };
    std::vector<Job> jobs;
    std::uint64_t job_index = 0;
    for (const auto& e : plan.entries)
        for (std::uint32_t s = 0; s < e.sequences; ++s)
            jobs.push_back({e.gamma, derive_seed(plan.base_seed, job_index++), e.frames});

    set.records.resize(jobs.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::string failure;
    std::mutex failure_mutex;

    auto work = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size() || failed.load()) return;
            const Job& job = jobs[i];
            solver::SolverConfig cfg;
            cfg.equation = plan.equation;
            cfg.gamma = job.gamma;
            cfg.dt = plan.dt;
            cfg.abs_tol = plan.abs_tol;
            cfg.rel_tol = plan.rel_tol;
            cfg.dealias = plan.dealias;
            try {
                Field ic = sample_initial_condition(plan.grid_size, job.seed, plan.ic_low,
                                                    plan.ic_high);
                TrajectoryRecord rec;
                rec.gamma = job.gamma;
                rec.seed = job.seed;
                rec.dt = plan.dt;
                rec.frames = solver::integrate(ic, cfg, static_cast<int>(job.frames));
                set.records[i] = std::move(rec);
            } catch (const Error& e) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                failed = true;
                if (failure.empty())
                    failure = std::string(e.what()) + " [gamma=" + std::to_string(job.gamma) +
                              ", seed=" + std::to_string(job.seed) + "]";
            }
        }
    };

    const unsigned nthreads = std::min<unsigned>(worker_threads(),
                                                 std::max<std::size_t>(jobs.size(), 1));
    if (nthreads <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < nthreads; ++t) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    if (failed) throw IntegrationError("generate: " + failure, 0.0);
    return set;
}

// ---------------------------------------------------------------------------
// pairing

struct PairBatch {
    std::vector<std::pair<Field, double>> inputs;  // (field, gamma)
    std::vector<std::vector<Field>> targets;       // n frames following each input
    int horizon = 0;
};

struct PairIndex {
    std::uint32_t record = 0;
    std::uint32_t frame = 0;
};

/// Streams shuffled 1-to-n training pairs in fixed-size batches. Input j of a
/// record pairs with target frames j+1 .. j+n; pairs never cross records.
class PairStream {
  public:
    PairStream(const TrajectorySet& set, int horizon, std::uint32_t stride,
               std::uint64_t shuffle_seed, std::size_t batch_size)
        : set_(set), horizon_(horizon), batch_size_(batch_size) {
        if (horizon < 1) throw ContractError("make_pairs: horizon must be >= 1");
        if (stride < 1) throw ContractError("make_pairs: stride must be >= 1");
        for (std::uint32_t r = 0; r < set.records.size(); ++r) {
            const auto& rec = set.records[r];
            if (rec.frames.size() <= static_cast<std::size_t>(horizon)) {
                std::cerr << "warning: record " << r << " has " << rec.frames.size()
                          << " frames, too short for horizon " << horizon << "; skipped\n";
                continue;
            }
            for (std::uint32_t j = 0; j + horizon < rec.frames.size(); j += stride)
                index_.push_back({r, j});
        }
        StreamRng rng(shuffle_seed);
        deterministic_shuffle(index_, rng);
    }

    std::size_t pair_count() const { return index_.size(); }
    std::size_t batch_count() const {
        return (index_.size() + batch_size_ - 1) / batch_size_;
    }

    PairBatch batch(std::size_t b) const {
        PairBatch out;
        out.horizon = horizon_;
        const std::size_t lo = b * batch_size_;
        const std::size_t hi = std::min(index_.size(), lo + batch_size_);
        for (std::size_t i = lo; i < hi; ++i) {
            const auto& rec = set_.records[index_[i].record];
            out.inputs.emplace_back(rec.frames[index_[i].frame], rec.gamma);
            std::vector<Field> tgt;
            tgt.reserve(horizon_);
            for (int k = 1; k <= horizon_; ++k)
                tgt.push_back(rec.frames[index_[i].frame + k]);
            out.targets.push_back(std::move(tgt));
        }
        return out;
    }

  private:
    const TrajectorySet& set_;
    int horizon_;
    std::size_t batch_size_;
    std::vector<PairIndex> index_;
};

// ---------------------------------------------------------------------------
// serialization

inline constexpr char kTrajectoryMagic[4] = {'P', 'F', 'T', '1'};
inline constexpr std::uint32_t kTrajectoryVersion = 1;

inline std::string serialize(const TrajectorySet& set) {
    std::string out;
    io::put_bytes(out, kTrajectoryMagic, 4);
    io::put_u32(out, kTrajectoryVersion);
    out.push_back(set.equation == solver::Equation::MS ? char(0) : char(1));
    io::put_u32(out, set.grid_size);
    io::put_u32(out, static_cast<std::uint32_t>(set.records.size()));
    for (const auto& rec : set.records) {
        io::put_f64(out, rec.gamma);
        io::put_u64(out, rec.seed);
        io::put_f64(out, rec.dt);
        io::put_u32(out, static_cast<std::uint32_t>(rec.frames.size()));
        for (const auto& f : rec.frames) {
            if (f.size() != set.grid_size)
                throw ContractError("serialize: frame size does not match grid size");
            for (double v : f.values) io::put_f64(out, v);
        }
    }
    return out;
}

inline TrajectorySet deserialize(const std::string& buf, const std::string& what) {
    io::Reader r(buf, what);
    const char* magic = r.take(4);
    if (std::memcmp(magic, kTrajectoryMagic, 4) != 0)
        throw FormatError(what + ": bad magic", 0);
    const std::uint32_t version = r.u32();
    if (version != kTrajectoryVersion)
        throw FormatError(what + ": unsupported version " + std::to_string(version), 4);
    TrajectorySet set;
    const std::uint8_t tag = r.u8();
    if (tag > 1) throw FormatError(what + ": bad equation tag", r.offset() - 1);
    set.equation = tag == 0 ? solver::Equation::MS : solver::Equation::KS;
    set.grid_size = r.u32();
    if (!fft::is_pow2(set.grid_size))
        throw FormatError(what + ": grid size is not a power of two", r.offset() - 4);
    const std::uint32_t n_records = r.u32();
    set.records.reserve(n_records);
    for (std::uint32_t i = 0; i < n_records; ++i) {
        TrajectoryRecord rec;
        rec.gamma = r.f64();
        rec.seed = r.u64();
        rec.dt = r.f64();
        const std::uint32_t n_frames = r.u32();
        rec.frames.reserve(n_frames);
        for (std::uint32_t f = 0; f < n_frames; ++f) {
            Field field(set.grid_size);
            for (std::uint32_t j = 0; j < set.grid_size; ++j) field.values[j] = r.f64();
            rec.frames.push_back(std::move(field));
        }
        set.records.push_back(std::move(rec));
    }
    if (r.offset() != buf.size())
        throw FormatError(what + ": trailing bytes", r.offset());
    return set;
}

inline void save(const TrajectorySet& set, const std::filesystem::path& path) {
    io::atomic_write(path, serialize(set));
}

inline TrajectorySet load(const std::filesystem::path& path) {
    return deserialize(io::read_all(path), path.string());
}

/// CSV export of one record: header "t,x_0,...,x_{N-1}", one row per frame.
inline void export_csv(const TrajectorySet& set, std::size_t record,
                       const std::filesystem::path& path) {
    if (record >= set.records.size())
        throw ContractError("export_csv: record index out of range");
    const auto& rec = set.records[record];
    std::string out = "t";
    for (std::uint32_t j = 0; j < set.grid_size; ++j) out += ",x_" + std::to_string(j);
    out += "\n";
    char num[32];
    for (std::size_t f = 0; f < rec.frames.size(); ++f) {
        std::snprintf(num, sizeof num, "%.17g", double(f + 1) * rec.dt);
        out += num;
        for (double v : rec.frames[f].values) {
            std::snprintf(num, sizeof num, ",%.17g", v);
            out += num;
        }
        out += "\n";
    }
    io::atomic_write(path, out);
}

}  // namespace paraflame::data
