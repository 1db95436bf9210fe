#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace nilm {

// Error hierarchy. Every failure surfaced to callers derives from Error so the
// CLI can map any module failure to a single exit code.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error { using Error::Error; };        // bad shapes, layer chains, flags
struct NumericError : Error { using Error::Error; };       // NaN/Inf where finiteness is promised
struct IngestionError : Error { using Error::Error; };     // unreadable or malformed channel files
struct AlignmentError : Error { using Error::Error; };     // series with no common time range
struct WindowingError : Error { using Error::Error; };     // unresolved gaps, T < W
struct TrainingError : Error { using Error::Error; };      // divergence during optimization
struct CheckpointError : Error { using Error::Error; };    // corrupt or incompatible model files
struct InferenceError : Error { using Error::Error; };     // wrong head, too-short input
struct MetricError : Error { using Error::Error; };        // undefined metric (zero truth sum)
struct GenerationError : Error { using Error::Error; };    // impossible synthetic specs
struct PerturbationError : Error { using Error::Error; };  // no activation inside the window
struct IoError : Error { using Error::Error; };            // filesystem failures

// Deterministic random source. Wraps std::mt19937_64 but derives doubles and
// bounded ints from raw bits, so the stream is identical on every platform
// (the standard pins mt19937_64 output but not the <random> distributions).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return state_(); }

    // uniform in [0, 1), 53-bit resolution
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n), unbiased via rejection
    std::uint64_t uniform_int(std::uint64_t n);

    // standard normal, Box-Muller with one cached value
    double normal();
    double normal(double mean, double std) { return mean + std * normal(); }

    // Fisher-Yates; deterministic for a fixed seed
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 state_;
    bool have_cached_ = false;
    double cached_ = 0.0;
};

// Mixes a base seed with a stream index so independent generators never share
// a stream (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

// FNV-1a over raw bytes; used for config digests and trunk checksums.
std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t seed = 0xcbf29ce484222325ULL);

inline bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

// Worker cap resolved from S2P_THREADS (falls back to hardware concurrency).
int worker_count();

// Runs fn(chunk_index, chunk_begin, chunk_end) over [0, n) split into
// contiguous chunks, one per worker (chunk_index < worker_count()). Results
// that depend on per-chunk state must be reduced in chunk order by the caller
// to stay deterministic for a fixed worker count.
void parallel_chunks(std::size_t n,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

}  // namespace nilm
