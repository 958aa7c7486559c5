#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace hoif {

// Deterministic random streams.
//
// A master seed spawns independent substreams by the splitting rule
//   stream_state = splitmix64(master_seed XOR (stream_id + 1) * 0x9E3779B97F4A7C15),
// and each substream is a xoshiro256** generator whose four state words are
// drawn from that splitmix64 sequence. Substreams indexed by replication are
// therefore order-independent: results do not depend on which thread runs
// which replication.
class Rng {
public:
    explicit Rng(std::uint64_t seed) { seed_state(seed); }

    static Rng stream(std::uint64_t master_seed, std::uint64_t stream_id) {
        return Rng(master_seed ^ ((stream_id + 1) * 0x9E3779B97F4A7C15ULL));
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform on [0,1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    bool bernoulli(double p) { return uniform01() < p; }

    // Index sampled from the probability vector by a CDF walk.
    int categorical(const Eigen::VectorXd& prob) {
        const double u = uniform01();
        double acc = 0.0;
        const auto n = static_cast<int>(prob.size());
        for (int j = 0; j < n; ++j) {
            acc += prob[j];
            if (u < acc) return j;
        }
        return n - 1;
    }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    // Fisher-Yates permutation of {0,...,n-1}.
    std::vector<int> permutation(int n) {
        std::vector<int> idx(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
        for (int i = n - 1; i > 0; --i) {
            const auto j = static_cast<int>(below(static_cast<std::uint64_t>(i) + 1));
            std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
        }
        return idx;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    void seed_state(std::uint64_t seed) {
        // splitmix64 expansion of the seed into the xoshiro state
        std::uint64_t z = seed;
        for (auto& s : s_) {
            z += 0x9E3779B97F4A7C15ULL;
            std::uint64_t w = z;
            w = (w ^ (w >> 30)) * 0xBF58476D1CE4E5B9ULL;
            w = (w ^ (w >> 27)) * 0x94D049BB133111EBULL;
            s = w ^ (w >> 31);
        }
    }

    std::uint64_t s_[4];
};

} // namespace hoif
