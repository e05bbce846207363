#include "hflab/rng.hpp"

#include <cmath>
#include <numbers>

namespace hflab {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

double to_unit(std::uint32_t a, std::uint32_t b) {
    const double bits = static_cast<double>(a >> 5) * 67108864.0 + static_cast<double>(b >> 6);
    return (bits + 0.5) * (1.0 / 9007199254740992.0);
}

}  // namespace

PhiloxBlock philox4x32(PhiloxBlock c, std::array<std::uint32_t, 2> k) {
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, c[0], hi0, lo0);
        mulhilo(kMul1, c[2], hi1, lo1);
        c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
        k[0] += kWeyl0;
        k[1] += kWeyl1;
    }
    return c;
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t path, std::uint32_t stream)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      path_lo_(static_cast<std::uint32_t>(path)),
      stream_(stream ^ (static_cast<std::uint32_t>(path >> 32) << 16)) {}

PhiloxBlock CounterRng::block(std::uint64_t b) const {
    return philox4x32({path_lo_, stream_, static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)}, key_);
}

double CounterRng::uniform(std::uint64_t index) const {
    const PhiloxBlock r = block(index / 2);
    return index % 2 == 0 ? to_unit(r[0], r[1]) : to_unit(r[2], r[3]);
}

double CounterRng::normal(std::uint64_t index) const {
    const PhiloxBlock r = block(index / 2);
    const double u1 = to_unit(r[0], r[1]), u2 = to_unit(r[2], r[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return index % 2 == 0 ? radius * std::cos(angle) : radius * std::sin(angle);
}

}  // namespace hflab
