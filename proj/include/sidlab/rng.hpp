#pragma once

// Noise source: std::mt19937_64 per trajectory, seeded through SplitMix64 from
// (master seed, sigma index, trajectory index); normals by the ziggurat sampler
// of Boost.Random.

#include <cstdint>
#include <random>

#include <boost/random/normal_distribution.hpp>

#include "sidlab/vec.hpp"

namespace sidlab {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t sigma_index, std::uint64_t trajectory_index) {
    return splitmix64(splitmix64(splitmix64(master) ^ sigma_index) ^ trajectory_index);
}

class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed) : engine_(seed) {}
    double next() { return normal_(engine_); }
    Vec next_vec(std::size_t dim) {
        Vec v(dim);
        for (double& c : v) c = normal_(engine_);
        return v;
    }

private:
    std::mt19937_64 engine_;
    boost::random::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace sidlab
