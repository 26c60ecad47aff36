#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace madtopo {

// N x N matrix of per-edge influence weights, each strictly inside (0,1).
// Entry w(i,j) is the influence of agent j's response on agent i; the
// diagonal w(i,i) doubles as agent i's activation threshold.
struct WeightMatrix {
	int n = 0;
	std::vector<double> w; // row-major, n*n

	WeightMatrix() = default;
	WeightMatrix(int n_agents, double fill = 0.5) : n(n_agents), w(static_cast<std::size_t>(n_agents) * n_agents, fill)
	{
		validate();
	}

	double& at(int i, int j) { return w[static_cast<std::size_t>(i) * n + j]; }
	double at(int i, int j) const { return w[static_cast<std::size_t>(i) * n + j]; }

	void validate() const
	{
		if (n <= 0 || w.size() != static_cast<std::size_t>(n) * n)
		{
			throw std::invalid_argument("WeightMatrix: shape mismatch");
		}
		for (double v : w)
		{
			if (!(v > 0.0 && v < 1.0))
			{
				throw std::invalid_argument("WeightMatrix: weight outside (0,1)");
			}
		}
	}
};

// Prompt priority class quantized from an edge weight. Invisible entries are
// omitted from prompts entirely.
enum class Tier
{
	Critical,
	Reference,
	Background,
	Invisible
};

// Serialized tag; Invisible maps to omission (empty string).
inline std::string tier_tag(Tier t)
{
	switch (t)
	{
		case Tier::Critical: return "[Critical]";
		case Tier::Reference: return "[Reference]";
		case Tier::Background: return "[Background]";
		case Tier::Invisible: return "";
	}
	return "";
}

inline const char* tier_name(Tier t)
{
	switch (t)
	{
		case Tier::Critical: return "Critical";
		case Tier::Reference: return "Reference";
		case Tier::Background: return "Background";
		case Tier::Invisible: return "Invisible";
	}
	return "Invisible";
}

struct BudgetConfig {
	int budget = 12;	 // soft cap B on active links per round
	double delta = 0.10; // minimum visible weight; "active link" == visible

	void validate() const
	{
		if (budget < 0) { throw std::invalid_argument("BudgetConfig: negative budget"); }
		if (!(delta > 0.0 && delta < 1.0)) { throw std::invalid_argument("BudgetConfig: delta outside (0,1)"); }
	}
};

struct ActivationMask {
	std::vector<bool> active;

	int count_active() const
	{
		return static_cast<int>(std::count(active.begin(), active.end(), true));
	}
};

// Average incoming influence on agent i from everyone else.
inline double mean_external_influence(const WeightMatrix& w, int i)
{
	if (w.n < 2)
	{
		throw std::domain_error("mean_external_influence: a single agent has no external influence");
	}
	if (i < 0 || i >= w.n)
	{
		throw std::out_of_range("mean_external_influence: agent index");
	}
	double sum = 0.0;
	for (int j = 0; j < w.n; ++j)
	{
		if (j != i) { sum += w.at(i, j); }
	}
	return sum / (w.n - 1);
}

// Agent i regenerates iff its mean external influence reaches its own
// diagonal weight; equality activates (the prune condition is strict).
inline ActivationMask compute_activation(const WeightMatrix& w)
{
	ActivationMask mask;
	mask.active.resize(w.n);
	for (int i = 0; i < w.n; ++i)
	{
		mask.active[i] = mean_external_influence(w, i) >= w.at(i, i);
	}
	return mask;
}

// Weight-to-tier quantization with strict boundaries; ties fall to the lower
// tier. Diagonal entries are forced Invisible (an agent never quotes itself).
inline Tier quantize_weight(double v)
{
	if (v > 0.40) { return Tier::Critical; }
	if (v > 0.25) { return Tier::Reference; }
	if (v > 0.10) { return Tier::Background; }
	return Tier::Invisible;
}

inline std::vector<Tier> quantize_tiers(const WeightMatrix& w)
{
	std::vector<Tier> tiers(w.w.size());
	for (int i = 0; i < w.n; ++i)
	{
		for (int j = 0; j < w.n; ++j)
		{
			tiers[static_cast<std::size_t>(i) * w.n + j] = (i == j) ? Tier::Invisible : quantize_weight(w.at(i, j));
		}
	}
	return tiers;
}

// Number of off-diagonal entries strictly above delta. Self-edges carry no
// message and are excluded.
inline int count_active_links(const WeightMatrix& w, const BudgetConfig& cfg)
{
	int count = 0;
	for (int i = 0; i < w.n; ++i)
	{
		for (int j = 0; j < w.n; ++j)
		{
			if (i != j && w.at(i, j) > cfg.delta) { ++count; }
		}
	}
	return count;
}

inline double budget_penalty(int active_links, const BudgetConfig& cfg)
{
	if (active_links < 0) { throw std::invalid_argument("budget_penalty: negative link count"); }
	return std::max(0.0, static_cast<double>(active_links) - static_cast<double>(cfg.budget));
}

} // namespace madtopo
