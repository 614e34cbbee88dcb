#pragma once

#include <array>
#include <cstdint>

namespace bbb {

// Philox4x32-10 (Salmon et al. 2011). Stateless: the output is a pure function of key and counter.
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t m0 = 0xD2511F53u, m1 = 0xCD9E8D57u;
    constexpr std::uint32_t w0 = 0x9E3779B9u, w1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = std::uint64_t(m0) * ctr[0];
        const std::uint64_t p1 = std::uint64_t(m1) * ctr[2];
        ctr = {std::uint32_t(p1 >> 32) ^ ctr[1] ^ key[0], std::uint32_t(p1), std::uint32_t(p0 >> 32) ^ ctr[3] ^ key[1], std::uint32_t(p0)};
        key[0] += w0;
        key[1] += w1;
    }
    return ctr;
}

// Uniform variate in [0, 1) keyed by (seed, stream, step).
inline double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t step) {
    const auto r = philox4x32({std::uint32_t(step), std::uint32_t(step >> 32), std::uint32_t(stream), std::uint32_t(stream >> 32)},
                              {std::uint32_t(seed), std::uint32_t(seed >> 32)});
    const std::uint64_t bits = (std::uint64_t(r[0]) << 21) ^ (std::uint64_t(r[1]) >> 11);
    return double(bits & ((std::uint64_t(1) << 53) - 1)) * 0x1.0p-53;
}

} // namespace bbb
