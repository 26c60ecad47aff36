#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace madtopo {

// Seeded generator with stateless Box-Muller normals so that every draw is a
// pure function of the underlying mt19937_64 stream (no pair caching, no
// libstdc++-version dependence in the distribution layer).
class Rng {
public:
	explicit Rng(std::uint64_t seed) : gen_(seed) {}

	// Uniform in the open interval (0,1).
	double uniform()
	{
		return (static_cast<double>(gen_()) + 0.5) * 0x1.0p-64;
	}

	double normal(double mu = 0.0, double sigma = 1.0)
	{
		const double u1 = uniform();
		const double u2 = uniform();
		const double r = std::sqrt(-2.0 * std::log(u1));
		return mu + sigma * r * std::cos(6.283185307179586476925286766559 * u2);
	}

	// Uniform integer in [0, n).
	std::uint64_t uniform_int(std::uint64_t n)
	{
		return gen_() % n;
	}

	std::uint64_t next_u64() { return gen_(); }

private:
	std::mt19937_64 gen_;
};

} // namespace madtopo
