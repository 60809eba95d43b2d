#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace mmmi {

/// Address of a random stream: a master seed plus a hierarchical path such as
/// {("rep", 17), ("ignorable", 3)}. Identical paths give identical streams.
struct StreamPath {
    std::uint64_t master_seed = 0;
    std::vector<std::pair<std::string, std::int64_t>> path;

    StreamPath child(std::string tag, std::int64_t index) const;

    friend bool operator==(const StreamPath&, const StreamPath&) = default;
};

/// Philox4x32-10 counter-based generator. The 64-bit key is the hash of a
/// StreamPath; the counter walks blocks of four 32-bit words. Satisfies
/// UniformRandomBitGenerator so it can feed <random> distributions.
class Philox4x32 {
public:
    using result_type = std::uint64_t;

    explicit Philox4x32(std::uint64_t key = 0) noexcept;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept;

    /// One Philox4x32-10 block; the key's low word is k0.
    static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr, std::uint64_t key) noexcept;

    std::uint64_t key() const noexcept { return key_; }
    std::uint64_t block_counter() const noexcept { return counter_; }

private:
    void refill() noexcept;

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    std::array<std::uint32_t, 4> block_{};
    int next_ = 4;
};

/// A random stream owned by one worker at a time.
class Stream {
public:
    explicit Stream(std::uint64_t key) : engine_(key) {}

    Philox4x32& engine() noexcept { return engine_; }

    double normal() { return normal_(engine_); }
    double uniform() { return std::generate_canonical<double, 53>(engine_); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double chi_squared(double df) { return std::chi_squared_distribution<double>(df)(engine_); }

private:
    Philox4x32 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

/// 64-bit key from a path; pure function of (master_seed, path).
std::uint64_t stream_key(const StreamPath& path) noexcept;

Stream derive_stream(const StreamPath& path);

}  // namespace mmmi
