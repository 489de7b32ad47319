#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include <Eigen/Dense>

namespace sdebridge {

// Philox4x32-10 counter-based generator (Salmon et al. 2011).  A stream is
// identified by (seed, stream id); draws within a stream are indexed by a
// 64-bit counter.  Streams with distinct ids are independent, which makes
// parallel per-segment sampling reproducible regardless of thread scheduling.
class Philox4x32 {
public:
    using result_type = std::uint32_t;

    Philox4x32(std::uint64_t seed, std::uint64_t stream)
        : key0_(static_cast<std::uint32_t>(seed)),
          key1_(static_cast<std::uint32_t>(seed >> 32)),
          stream_lo_(static_cast<std::uint32_t>(stream)),
          stream_hi_(static_cast<std::uint32_t>(stream >> 32)) {}

    static std::array<std::uint32_t, 4> block(std::uint32_t k0, std::uint32_t k1,
                                              std::array<std::uint32_t, 4> ctr) {
        for (int r = 0; r < 10; ++r) {
            if (r > 0) {
                k0 += 0x9E3779B9u;
                k1 += 0xBB67AE85u;
            }
            ctr = round_once(ctr, k0, k1);
        }
        return ctr;
    }

    std::uint32_t operator()() {
        if (buf_pos_ == 4) refill();
        return buf_[buf_pos_++];
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return 0xFFFFFFFFu; }

private:
    static std::array<std::uint32_t, 4> round_once(const std::array<std::uint32_t, 4>& c,
                                                   std::uint32_t k0, std::uint32_t k1) {
        const std::uint64_t p0 = std::uint64_t(0xD2511F53u) * c[0];
        const std::uint64_t p1 = std::uint64_t(0xCD9E8D57u) * c[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        return {hi1 ^ c[1] ^ k0, lo1, hi0 ^ c[3] ^ k1, lo0};
    }

    void refill() {
        buf_ = block(key0_, key1_,
                     {static_cast<std::uint32_t>(counter_),
                      static_cast<std::uint32_t>(counter_ >> 32), stream_lo_, stream_hi_});
        ++counter_;
        buf_pos_ = 0;
    }

    std::uint32_t key0_, key1_, stream_lo_, stream_hi_;
    std::uint64_t counter_ = 0;
    std::array<std::uint32_t, 4> buf_{};
    int buf_pos_ = 4;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Distribution layer on top of Philox.  substream(tag) derives a new
// independent stream deterministically, so a hierarchy like
// root -> iteration -> segment gives every parallel unit its own stream.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
        : seed_(seed), stream_(stream), gen_(seed, stream) {}

    RngStream substream(std::uint64_t tag) const {
        const std::uint64_t mixed = splitmix64(stream_ ^ splitmix64(tag + 0x517CC1B727220A95ull));
        return RngStream(seed_, mixed);
    }

    std::uint64_t next_u64() {
        const std::uint64_t lo = gen_();
        const std::uint64_t hi = gen_();
        return lo | (hi << 32);
    }

    // (0,1]: never returns 0, safe under log().
    double uniform01() {
        return (double(next_u64() >> 11) + 1.0) * 0x1p-53;
    }

    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double th = 2.0 * M_PI * u2;
        spare_ = r * std::sin(th);
        have_spare_ = true;
        return r * std::cos(th);
    }

    double exponential(double rate) {
        if (rate <= 0) throw std::invalid_argument("exponential: rate must be positive");
        return -std::log(uniform01()) / rate;
    }

    // Marsaglia-Tsang; shape > 0, rate > 0.
    double gamma(double shape, double rate) {
        if (shape <= 0 || rate <= 0) throw std::invalid_argument("gamma: shape and rate must be positive");
        if (shape < 1.0) {
            const double u = uniform01();
            return gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform01();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
        }
    }

    Eigen::VectorXd normal_vec(Eigen::Index n) {
        Eigen::VectorXd z(n);
        for (Eigen::Index i = 0; i < n; ++i) z(i) = normal();
        return z;
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

private:
    std::uint64_t seed_, stream_;
    Philox4x32 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace sdebridge
