#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string_view>

namespace redlab {

namespace detail {

inline constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t hash_name(std::string_view name) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace detail

/// Counter-based random stream.
///
/// The i-th output is a pure function of (key, i), so a stream can be
/// re-created at any position and independent streams are obtained by
/// deriving keys from names. Satisfies UniformRandomBitGenerator.
class Stream {
public:
    using result_type = std::uint64_t;

    explicit Stream(std::uint64_t seed, std::string_view name = "root") noexcept
        : key_(detail::mix64(seed ^ detail::mix64(detail::hash_name(name) + 0x9e3779b97f4a7c15ULL)))
    {
    }

    /// Independent child stream; the parent position is irrelevant.
    [[nodiscard]] Stream split(std::string_view name) const noexcept
    {
        return Stream(key_, name);
    }

    [[nodiscard]] Stream split(std::uint64_t index) const noexcept
    {
        return Stream(detail::mix64(key_ + index * 0xd1b54a32d192ed03ULL), "index");
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept
    {
        return detail::mix64(key_ + (++counter_) * 0x9e3779b97f4a7c15ULL);
    }

    /// Uniform on the open interval (0, 1).
    double uniform() noexcept
    {
        return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
    }

    double exponential(double rate) noexcept { return -std::log(uniform()) / rate; }

    [[nodiscard]] std::uint64_t position() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace redlab
