#include "mmmi/stream.hpp"

namespace mmmi {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a(const std::string& s) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

}  // namespace

StreamPath StreamPath::child(std::string tag, std::int64_t index) const {
    StreamPath out = *this;
    out.path.emplace_back(std::move(tag), index);
    return out;
}

Philox4x32::Philox4x32(std::uint64_t key) noexcept : key_(key) {}

std::array<std::uint32_t, 4> Philox4x32::block(std::array<std::uint32_t, 4> ctr, std::uint64_t key) noexcept {
    std::uint32_t k0 = static_cast<std::uint32_t>(key);
    std::uint32_t k1 = static_cast<std::uint32_t>(key >> 32);
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ k0, lo1, hi0 ^ ctr[3] ^ k1, lo0};
        k0 += kWeyl0;
        k1 += kWeyl1;
    }
    return ctr;
}

void Philox4x32::refill() noexcept {
    block_ = block({static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32), 0u, 0u}, key_);
    ++counter_;
    next_ = 0;
}

Philox4x32::result_type Philox4x32::operator()() noexcept {
    if (next_ >= 4) refill();
    const std::uint64_t lo = block_[next_];
    const std::uint64_t hi = block_[next_ + 1];
    next_ += 2;
    return (hi << 32) | lo;
}

std::uint64_t stream_key(const StreamPath& p) noexcept {
    std::uint64_t h = splitmix64(p.master_seed ^ 0x6A09E667F3BCC908ull);
    for (const auto& [tag, index] : p.path) {
        h = splitmix64(h ^ fnv1a(tag));
        h = splitmix64(h ^ static_cast<std::uint64_t>(index));
    }
    return h;
}

Stream derive_stream(const StreamPath& path) { return Stream(stream_key(path)); }

}  // namespace mmmi
