#pragma once

// Independent brute-force oracles used to freeze expected values. These are
// deliberately written apart from the library code paths they check.

#include <map>
#include <string>
#include <vector>

#include "madtopo/controller.hpp"
#include "madtopo/mlp.hpp"
#include "madtopo/ppo.hpp"

namespace oracles {

// Direct double-loop evaluation of the exponentially weighted TD(lambda)
// advantage sum over episode segments (done flags bootstrap 0).
inline std::vector<double> gae(
	const std::vector<double>& rewards, const std::vector<double>& values, const std::vector<bool>& dones,
	double gamma, double lambda)
{
	const std::size_t n = rewards.size();
	std::vector<double> deltas(n);
	for (std::size_t k = 0; k < n; ++k)
	{
		const double next_v = (!dones[k] && k + 1 < n) ? values[k + 1] : 0.0;
		deltas[k] = rewards[k] + gamma * next_v - values[k];
	}
	std::vector<double> adv(n, 0.0);
	for (std::size_t t = 0; t < n; ++t)
	{
		double coef = 1.0;
		for (std::size_t l = t; l < n; ++l)
		{
			adv[t] += coef * deltas[l];
			if (dones[l]) { break; }
			coef *= gamma * lambda;
		}
	}
	return adv;
}

// Exhaustive tally with the documented tie-break: highest count wins, ties
// go to the label whose lowest-index holder comes first.
inline std::string vote(const std::vector<std::string>& answers)
{
	std::map<std::string, int> counts;
	for (const auto& a : answers)
	{
		if (!a.empty()) { counts[a] += 1; }
	}
	if (counts.empty()) { throw std::runtime_error("oracle vote: empty electorate"); }
	int best = 0;
	for (const auto& [label, c] : counts) { best = std::max(best, c); }
	// scan agents in index order; the first agent holding a max-count label wins the tie
	for (const auto& a : answers)
	{
		if (!a.empty() && counts[a] == best) { return a; }
	}
	return "";
}

// Analytic gradients of the composite loss on [begin, end), flattened
// actor-then-critic, via the library's backprop.
inline std::vector<double> analytic_gradients(
	const madtopo::Controller& ctrl, const madtopo::RolloutBuffer& buffer, std::size_t begin, std::size_t end,
	const madtopo::TrainConfig& cfg, const madtopo::BudgetConfig& budget)
{
	madtopo::Mlp::Grads actor_grads = ctrl.actor().make_grads();
	madtopo::Mlp::Grads critic_grads = ctrl.critic().make_grads();
	const double inv = 1.0 / static_cast<double>(end - begin);
	for (std::size_t k = begin; k < end; ++k)
	{
		madtopo::detail::eval_and_backprop(
			ctrl, buffer.transitions[k], buffer.advantages[k], buffer.returns[k], cfg, budget, inv, false,
			&actor_grads, &critic_grads);
	}
	std::vector<double> flat;
	for (const auto& g : {actor_grads, critic_grads})
	{
		for (const auto& l : g.layers)
		{
			flat.insert(flat.end(), l.weight.begin(), l.weight.end());
			flat.insert(flat.end(), l.bias.begin(), l.bias.end());
		}
	}
	return flat;
}

// Central finite differences of the same loss over every parameter.
struct GradCheckResult {
	double max_rel_error = 0.0;
	std::size_t worst_index = 0;
};

inline GradCheckResult finite_difference_check(
	madtopo::Controller& ctrl, const madtopo::RolloutBuffer& buffer, std::size_t begin, std::size_t end,
	const madtopo::TrainConfig& cfg, const madtopo::BudgetConfig& budget, double step = 1e-5)
{
	const std::vector<double> analytic = analytic_gradients(ctrl, buffer, begin, end, cfg, budget);
	const std::size_t n_actor = ctrl.actor().num_params();
	const std::size_t n_total = n_actor + ctrl.critic().num_params();

	GradCheckResult res;
	for (std::size_t p = 0; p < n_total; ++p)
	{
		madtopo::Mlp& net = (p < n_actor) ? ctrl.actor() : ctrl.critic();
		const std::size_t idx = (p < n_actor) ? p : p - n_actor;
		const double orig = net.get_param(idx);
		net.set_param(idx, orig + step);
		const double plus = madtopo::evaluate_total_loss(ctrl, buffer, begin, end, cfg, budget);
		net.set_param(idx, orig - step);
		const double minus = madtopo::evaluate_total_loss(ctrl, buffer, begin, end, cfg, budget);
		net.set_param(idx, orig);
		const double numeric = (plus - minus) / (2.0 * step);
		const double denom = std::max({std::abs(numeric), std::abs(analytic[p]), 1e-6});
		const double rel = std::abs(numeric - analytic[p]) / denom;
		if (rel > res.max_rel_error)
		{
			res.max_rel_error = rel;
			res.worst_index = p;
		}
	}
	return res;
}

} // namespace oracles
