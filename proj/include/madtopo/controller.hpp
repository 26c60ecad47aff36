#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "madtopo/mlp.hpp"
#include "madtopo/observation.hpp"
#include "madtopo/rng.hpp"
#include "madtopo/topology.hpp"

namespace madtopo {

// The raw log-sigma head is clamped before exponentiation so exploration
// noise cannot grow without bound (an unbounded sigma turns an edge into a
// coin flip and destroys the credit assignment for that edge).
inline constexpr double kLogSigmaMin = -5.0;
inline constexpr double kLogSigmaMax = 2.0;

// Per-edge Gaussian parameters emitted by the actor head. sigma = exp(raw
// log-sigma head) so it stays strictly positive; at init the raw head is
// zero, giving sigma = 1 everywhere for broad early exploration.
struct GaussianEdgeParams {
	int n = 0;
	std::vector<double> mu;	   // n*n, row-major
	std::vector<double> sigma; // n*n, strictly positive
};

inline double sigmoid(double x)
{
	return 1.0 / (1.0 + std::exp(-x));
}

// sigmoid never reaches 0 or 1 mathematically, but for |x| beyond ~36 the
// double rounds to an endpoint, which WeightMatrix rejects. Weights handed to
// the environment are kept strictly interior.
inline double squash_weight(double z)
{
	constexpr double kFloor = 1e-12;
	return std::clamp(sigmoid(z), kFloor, 1.0 - kFloor);
}

inline double logit(double p)
{
	return std::log(p / (1.0 - p));
}

inline double gaussian_log_density(double z, double mu, double sigma)
{
	static constexpr double kLogSqrt2Pi = 0.91893853320467274178032973640562;
	const double d = (z - mu) / sigma;
	return -kLogSqrt2Pi - std::log(sigma) - 0.5 * d * d;
}

// One controller decision: pre-squash samples z, the squashed weight matrix
// w = sigmoid(z), and the joint log-density of z under the diagonal
// Gaussian. eps = (z - mu)/sigma is kept so the budget surrogate can be
// re-expressed as a function of the current parameters during updates.
struct SampledAction {
	std::vector<double> z;
	std::vector<double> eps;
	WeightMatrix w;
	double log_prob = 0.0;
};

// Actor-critic over flattened similarity observations. Actor and critic are
// separate nets with separate input layers; the actor's output stacks the mu
// head (first n^2) and the raw log-sigma head (last n^2).
class Controller {
public:
	Controller() = default;

	Controller(int n_agents, int hidden_dim, std::uint64_t seed) : n_(n_agents), seed_(seed)
	{
		if (n_agents < 2) { throw std::invalid_argument("Controller: need at least 2 agents"); }
		Rng rng(seed);
		const int obs = n_agents * n_agents;
		actor_ = Mlp({obs, hidden_dim, hidden_dim, 2 * obs}, rng);
		critic_ = Mlp({obs, hidden_dim, hidden_dim, 1}, rng);
	}

	int n_agents() const { return n_; }
	Mlp& actor() { return actor_; }
	const Mlp& actor() const { return actor_; }
	Mlp& critic() { return critic_; }
	const Mlp& critic() const { return critic_; }
	std::uint64_t seed() const { return seed_; }
	long train_step = 0;

	GaussianEdgeParams actor_forward(const Observation& obs, Mlp::Trace* trace = nullptr) const
	{
		check_obs(obs);
		const std::vector<double> out = actor_.forward(obs, trace);
		return split_heads(out);
	}

	GaussianEdgeParams split_heads(const std::vector<double>& actor_out) const
	{
		const int e = n_ * n_;
		GaussianEdgeParams gp;
		gp.n = n_;
		gp.mu.assign(actor_out.begin(), actor_out.begin() + e);
		gp.sigma.resize(e);
		for (int k = 0; k < e; ++k) { gp.sigma[k] = std::exp(std::clamp(actor_out[e + k], kLogSigmaMin, kLogSigmaMax)); }
		return gp;
	}

	double critic_forward(const Observation& obs, Mlp::Trace* trace = nullptr) const
	{
		check_obs(obs);
		return critic_.forward(obs, trace)[0];
	}

	static SampledAction sample_weights(const GaussianEdgeParams& gp, Rng& rng)
	{
		const int e = gp.n * gp.n;
		SampledAction a;
		a.z.resize(e);
		a.eps.resize(e);
		a.w.n = gp.n;
		a.w.w.resize(e);
		a.log_prob = 0.0;
		for (int k = 0; k < e; ++k)
		{
			const double eps = rng.normal();
			a.eps[k] = eps;
			a.z[k] = gp.mu[k] + gp.sigma[k] * eps;
			a.w.w[k] = squash_weight(a.z[k]);
			a.log_prob += gaussian_log_density(a.z[k], gp.mu[k], gp.sigma[k]);
		}
		return a;
	}

	// Inference-time action: the sigma -> 0 limit of sampling.
	static WeightMatrix deterministic_weights(const GaussianEdgeParams& gp)
	{
		WeightMatrix w;
		w.n = gp.n;
		w.w.resize(gp.mu.size());
		for (std::size_t k = 0; k < gp.mu.size(); ++k) { w.w[k] = squash_weight(gp.mu[k]); }
		return w;
	}

	static double log_prob_of(const std::vector<double>& z, const GaussianEdgeParams& gp)
	{
		double lp = 0.0;
		for (std::size_t k = 0; k < z.size(); ++k) { lp += gaussian_log_density(z[k], gp.mu[k], gp.sigma[k]); }
		return lp;
	}

	nlohmann::json to_json() const
	{
		nlohmann::json j;
		j["version"] = 1;
		j["n_agents"] = n_;
		j["rng_seed"] = seed_;
		j["train_step"] = train_step;
		j["actor"] = net_to_json(actor_);
		j["critic"] = net_to_json(critic_);
		return j;
	}

	static Controller from_json(const nlohmann::json& j)
	{
		if (j.at("version").get<int>() != 1)
		{
			throw std::runtime_error("Controller checkpoint: unsupported version");
		}
		Controller c;
		c.n_ = j.at("n_agents").get<int>();
		c.seed_ = j.at("rng_seed").get<std::uint64_t>();
		c.train_step = j.at("train_step").get<long>();
		c.actor_ = net_from_json(j.at("actor"));
		c.critic_ = net_from_json(j.at("critic"));
		return c;
	}

	void save(const std::string& path) const
	{
		std::ofstream out(path);
		if (!out) { throw std::runtime_error("Controller::save: cannot open " + path); }
		out << to_json().dump();
	}

	static Controller load(const std::string& path)
	{
		std::ifstream in(path);
		if (!in) { throw std::runtime_error("Controller::load: cannot open " + path); }
		nlohmann::json j;
		in >> j;
		return from_json(j);
	}

private:
	void check_obs(const Observation& obs) const
	{
		if (static_cast<int>(obs.size()) != n_ * n_)
		{
			throw std::invalid_argument("Controller: observation length != n^2");
		}
	}

	static nlohmann::json net_to_json(const Mlp& net)
	{
		nlohmann::json layers = nlohmann::json::array();
		for (const auto& l : net.layers())
		{
			layers.push_back({{"in", l.in}, {"out", l.out}, {"weight", l.weight}, {"bias", l.bias}});
		}
		return {{"layers", layers}};
	}

	static Mlp net_from_json(const nlohmann::json& j)
	{
		std::vector<int> sizes;
		for (const auto& lj : j.at("layers"))
		{
			if (sizes.empty()) { sizes.push_back(lj.at("in").get<int>()); }
			sizes.push_back(lj.at("out").get<int>());
		}
		Rng dummy(0);
		Mlp net(sizes, dummy);
		std::size_t k = 0;
		for (const auto& lj : j.at("layers"))
		{
			auto& layer = net.layers()[k++];
			layer.weight = lj.at("weight").get<std::vector<double>>();
			layer.bias = lj.at("bias").get<std::vector<double>>();
			if (layer.weight.size() != static_cast<std::size_t>(layer.in) * layer.out ||
				layer.bias.size() != static_cast<std::size_t>(layer.out))
			{
				throw std::runtime_error("Controller checkpoint: layer shape mismatch");
			}
		}
		return net;
	}

	int n_ = 0;
	std::uint64_t seed_ = 0;
	Mlp actor_;
	Mlp critic_;
};

} // namespace madtopo
