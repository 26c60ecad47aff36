#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "madtopo/controller.hpp"
#include "madtopo/observation.hpp"
#include "madtopo/topology.hpp"

namespace madtopo {

struct TrainConfig {
	double learning_rate = 1e-4;
	double gamma = 0.99;
	double gae_lambda = 0.95;
	double clip_eps = 0.20;
	double value_coef = 0.01;  // c1
	double budget_coef = 0.01; // c2
	int epochs_per_rollout = 1;
	int batch_size = 10;
	int rollout_length = 10;
	int hidden_dim = 128;
	double momentum = 0.0;			 // optional SGD momentum
	double budget_soft_temp = 0.02;	 // temperature of the differentiable link-count surrogate

	void validate() const
	{
		if (learning_rate <= 0 || batch_size <= 0 || rollout_length <= 0 || epochs_per_rollout <= 0 || hidden_dim <= 0)
		{
			throw std::invalid_argument("TrainConfig: non-positive field");
		}
		if (!(clip_eps > 0 && clip_eps < 1)) { throw std::invalid_argument("TrainConfig: clip_eps outside (0,1)"); }
		if (!(gamma > 0 && gamma <= 1) || !(gae_lambda > 0 && gae_lambda <= 1))
		{
			throw std::invalid_argument("TrainConfig: gamma/gae_lambda outside (0,1]");
		}
	}
};

// One controller decision plus what PPO needs to learn from it. eps keeps
// the reparameterized sample so the budget surrogate stays differentiable
// with respect to the current policy during updates.
struct Transition {
	Observation obs;
	std::vector<double> z;	 // pre-squash action
	std::vector<double> eps; // (z - mu_old) / sigma_old, elementwise
	double old_log_prob = 0.0;
	double reward = 0.0;
	double value_estimate = 0.0;
	bool done = false;
	int active_link_count = 0;
};

struct RolloutBuffer {
	std::vector<Transition> transitions;
	std::vector<double> advantages;
	std::vector<double> returns;

	std::size_t size() const { return transitions.size(); }
	void clear()
	{
		transitions.clear();
		advantages.clear();
		returns.clear();
	}
};

// Standard GAE recursion over episode segments; done flags bootstrap 0.
inline void compute_gae(RolloutBuffer& buffer, const TrainConfig& cfg)
{
	const std::size_t n = buffer.transitions.size();
	if (n == 0) { throw std::invalid_argument("compute_gae: empty buffer"); }
	buffer.advantages.assign(n, 0.0);
	buffer.returns.assign(n, 0.0);
	double running = 0.0;
	for (std::size_t idx = n; idx-- > 0;)
	{
		const Transition& t = buffer.transitions[idx];
		const double next_value =
			t.done ? 0.0 : (idx + 1 < n ? buffer.transitions[idx + 1].value_estimate : 0.0);
		const double not_done = t.done ? 0.0 : 1.0;
		const double delta = t.reward + cfg.gamma * next_value - t.value_estimate;
		running = delta + cfg.gamma * cfg.gae_lambda * not_done * running;
		if (t.done) { running = delta; }
		buffer.advantages[idx] = running;
		buffer.returns[idx] = running + t.value_estimate;
	}
}

// Clipped surrogate, Eq.-style: -mean(min(r*A, clip(r)*A)).
inline double policy_loss(
	const std::vector<double>& new_log_probs, const std::vector<double>& old_log_probs,
	const std::vector<double>& advantages, const TrainConfig& cfg)
{
	if (new_log_probs.size() != old_log_probs.size() || new_log_probs.size() != advantages.size())
	{
		throw std::invalid_argument("policy_loss: length mismatch");
	}
	double acc = 0.0;
	for (std::size_t k = 0; k < new_log_probs.size(); ++k)
	{
		const double ratio = std::exp(new_log_probs[k] - old_log_probs[k]);
		const double clipped = std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
		acc += std::min(ratio * advantages[k], clipped * advantages[k]);
	}
	return -acc / static_cast<double>(new_log_probs.size());
}

inline double value_loss(const std::vector<double>& values, const std::vector<double>& targets)
{
	if (values.size() != targets.size()) { throw std::invalid_argument("value_loss: length mismatch"); }
	double acc = 0.0;
	for (std::size_t k = 0; k < values.size(); ++k)
	{
		const double d = values[k] - targets[k];
		acc += d * d;
	}
	return acc / static_cast<double>(values.size());
}

inline double total_loss(double policy_l, double value_l, double budget_l, const TrainConfig& cfg)
{
	return policy_l + cfg.value_coef * value_l + cfg.budget_coef * budget_l;
}

// Differentiable stand-in for the exact over-budget link count: each
// off-diagonal weight contributes sigmoid((w - delta)/temp) to a soft count,
// hinged at B. Reported penalties always use the exact indicator count.
inline double budget_loss_soft(const WeightMatrix& w, const BudgetConfig& cfg, double temp)
{
	double soft = 0.0;
	for (int i = 0; i < w.n; ++i)
	{
		for (int j = 0; j < w.n; ++j)
		{
			if (i != j) { soft += sigmoid((w.at(i, j) - cfg.delta) / temp); }
		}
	}
	return std::max(0.0, soft - static_cast<double>(cfg.budget));
}

struct UpdateStats {
	double policy_loss = 0.0;
	double value_loss = 0.0;
	double budget_loss = 0.0;
	double total_loss = 0.0;
	double mean_ratio = 0.0;
	double mean_reward = 0.0;
	double mean_active_links = 0.0;
	double exact_budget_penalty = 0.0;
};

namespace detail {

// Loss and actor/critic gradient accumulation for one transition. Gradient
// paths: new log-prob -> (mu, raw log-sigma); soft budget through the
// reparameterized z' = mu + sigma*eps; value loss -> critic output.
struct SampleEval {
	double policy_term = 0.0; // min(r*A, clip*A), pre-negation
	double value_sq = 0.0;
	double budget_soft = 0.0;
	double ratio = 1.0;
};

inline SampleEval eval_and_backprop(
	const Controller& ctrl, const Transition& t, double advantage, double ret, const TrainConfig& cfg,
	const BudgetConfig& budget, double inv_batch, bool skip_budget,
	Mlp::Grads* actor_grads, Mlp::Grads* critic_grads)
{
	const int e = ctrl.n_agents() * ctrl.n_agents();
	Mlp::Trace actor_trace;
	Mlp::Trace critic_trace;
	const std::vector<double> actor_out = ctrl.actor().forward(t.obs, actor_grads ? &actor_trace : nullptr);
	const GaussianEdgeParams gp = ctrl.split_heads(actor_out);
	const double value = ctrl.critic().forward(t.obs, critic_grads ? &critic_trace : nullptr)[0];

	double new_lp = 0.0;
	for (int k = 0; k < e; ++k) { new_lp += gaussian_log_density(t.z[k], gp.mu[k], gp.sigma[k]); }
	const double ratio = std::exp(new_lp - t.old_log_prob);
	const double clipped = std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
	const double unclipped_term = ratio * advantage;
	const double clipped_term = clipped * advantage;

	SampleEval ev;
	ev.ratio = ratio;
	ev.policy_term = std::min(unclipped_term, clipped_term);
	const double vdiff = value - ret;
	ev.value_sq = vdiff * vdiff;

	// Reparameterized weights under the current policy.
	std::vector<double> z_cur(e);
	std::vector<double> w_cur(e);
	double soft_count = 0.0;
	for (int k = 0; k < e; ++k)
	{
		z_cur[k] = gp.mu[k] + gp.sigma[k] * t.eps[k];
		w_cur[k] = sigmoid(z_cur[k]);
	}
	for (int i = 0; i < ctrl.n_agents(); ++i)
	{
		for (int j = 0; j < ctrl.n_agents(); ++j)
		{
			if (i != j) { soft_count += sigmoid((w_cur[static_cast<std::size_t>(i) * ctrl.n_agents() + j] - budget.delta) / cfg.budget_soft_temp); }
		}
	}
	const double over = soft_count - static_cast<double>(budget.budget);
	ev.budget_soft = skip_budget ? 0.0 : std::max(0.0, over);

	if (actor_grads)
	{
		std::vector<double> grad_out(2 * static_cast<std::size_t>(e), 0.0);
		// Policy loss path: L contributes -(1/m)*min(...); gradient flows only
		// through the unclipped branch when it attains the min.
		if (unclipped_term <= clipped_term)
		{
			const double dL_dlp = -inv_batch * ratio * advantage;
			for (int k = 0; k < e; ++k)
			{
				const double d = (t.z[k] - gp.mu[k]) / (gp.sigma[k] * gp.sigma[k]);
				grad_out[k] += dL_dlp * d;										// d lp / d mu
				const double dz = (t.z[k] - gp.mu[k]) / gp.sigma[k];
				grad_out[e + k] += dL_dlp * (dz * dz - 1.0);					// d lp / d raw log-sigma
			}
		}
		// Budget path, active only above the hinge.
		if (!skip_budget && over > 0.0)
		{
			const double scale = cfg.budget_coef * inv_batch;
			for (int i = 0; i < ctrl.n_agents(); ++i)
			{
				for (int j = 0; j < ctrl.n_agents(); ++j)
				{
					if (i == j) { continue; }
					const int k = i * ctrl.n_agents() + j;
					const double s = sigmoid((w_cur[k] - budget.delta) / cfg.budget_soft_temp);
					const double ds_dw = s * (1.0 - s) / cfg.budget_soft_temp;
					const double dw_dz = w_cur[k] * (1.0 - w_cur[k]);
					const double dz = ds_dw * dw_dz;
					grad_out[k] += scale * dz;							  // dz'/dmu = 1
					grad_out[e + k] += scale * dz * gp.sigma[k] * t.eps[k]; // dz'/draw = sigma*eps
				}
			}
		}
		// The log-sigma head is clamped in split_heads; no gradient flows to a
		// raw output sitting outside the clamp interval.
		for (int k = 0; k < e; ++k)
		{
			const double raw = actor_out[e + k];
			if (raw <= kLogSigmaMin || raw >= kLogSigmaMax) { grad_out[e + k] = 0.0; }
		}
		ctrl.actor().backward(actor_trace, grad_out, *actor_grads);
	}
	if (critic_grads)
	{
		const std::vector<double> grad_out = {cfg.value_coef * inv_batch * 2.0 * vdiff};
		ctrl.critic().backward(critic_trace, grad_out, *critic_grads);
	}
	return ev;
}

} // namespace detail

// Evaluates the composite loss on a slice of the buffer without touching
// parameters; the finite-difference gradient checks drive this directly.
inline double evaluate_total_loss(
	const Controller& ctrl, const RolloutBuffer& buffer, std::size_t begin, std::size_t end,
	const TrainConfig& cfg, const BudgetConfig& budget, bool skip_budget = false)
{
	const double inv = 1.0 / static_cast<double>(end - begin);
	double pol = 0.0;
	double val = 0.0;
	double bud = 0.0;
	for (std::size_t k = begin; k < end; ++k)
	{
		const auto ev = detail::eval_and_backprop(
			ctrl, buffer.transitions[k], buffer.advantages[k], buffer.returns[k], cfg, budget, inv, skip_budget,
			nullptr, nullptr);
		pol += ev.policy_term;
		val += ev.value_sq;
		bud += ev.budget_soft;
	}
	return total_loss(-pol * inv, val * inv, bud * inv, cfg);
}

// Normalizes advantages in place over [begin, end).
inline void normalize_advantages(std::vector<double>& adv, std::size_t begin, std::size_t end)
{
	const double m = static_cast<double>(end - begin);
	double mean = 0.0;
	for (std::size_t k = begin; k < end; ++k) { mean += adv[k]; }
	mean /= m;
	double var = 0.0;
	for (std::size_t k = begin; k < end; ++k)
	{
		const double d = adv[k] - mean;
		var += d * d;
	}
	const double std_dev = std::max(std::sqrt(var / m), 1e-8);
	for (std::size_t k = begin; k < end; ++k) { adv[k] = (adv[k] - mean) / std_dev; }
}

// Momentum buffers carried across updates when cfg.momentum > 0.
struct SgdState {
	Mlp::Grads actor_vel;
	Mlp::Grads critic_vel;
	bool initialized = false;
};

// One PPO update over a filled buffer: advantages normalized across the
// rollout, then E epochs of contiguous minibatches with SGD steps. With
// momentum 0 this is a pure function of (buffer, params, config); aborts on
// non-finite loss.
inline UpdateStats update_step(
	RolloutBuffer& buffer, Controller& ctrl, const TrainConfig& cfg, const BudgetConfig& budget,
	bool skip_budget_loss = false, SgdState* opt = nullptr)
{
	if (buffer.size() == 0) { throw std::invalid_argument("update_step: empty buffer"); }
	compute_gae(buffer, cfg);
	normalize_advantages(buffer.advantages, 0, buffer.size());

	SgdState local;
	if (!opt) { opt = &local; }
	if (!opt->initialized)
	{
		opt->actor_vel = ctrl.actor().make_grads();
		opt->critic_vel = ctrl.critic().make_grads();
		opt->initialized = true;
	}

	UpdateStats stats;
	double reward_sum = 0.0;
	double link_sum = 0.0;
	double penalty_sum = 0.0;
	for (const auto& t : buffer.transitions)
	{
		reward_sum += t.reward;
		link_sum += t.active_link_count;
		penalty_sum += budget_penalty(t.active_link_count, budget);
	}
	stats.mean_reward = reward_sum / static_cast<double>(buffer.size());
	stats.mean_active_links = link_sum / static_cast<double>(buffer.size());
	stats.exact_budget_penalty = penalty_sum / static_cast<double>(buffer.size());

	int batches = 0;
	for (int epoch = 0; epoch < cfg.epochs_per_rollout; ++epoch)
	{
		for (std::size_t begin = 0; begin < buffer.size(); begin += static_cast<std::size_t>(cfg.batch_size))
		{
			const std::size_t end = std::min(buffer.size(), begin + static_cast<std::size_t>(cfg.batch_size));
			const double inv = 1.0 / static_cast<double>(end - begin);
			Mlp::Grads actor_grads = ctrl.actor().make_grads();
			Mlp::Grads critic_grads = ctrl.critic().make_grads();
			double pol = 0.0;
			double val = 0.0;
			double bud = 0.0;
			double ratio_sum = 0.0;
			for (std::size_t k = begin; k < end; ++k)
			{
				const auto ev = detail::eval_and_backprop(
					ctrl, buffer.transitions[k], buffer.advantages[k], buffer.returns[k], cfg, budget, inv,
					skip_budget_loss, &actor_grads, &critic_grads);
				pol += ev.policy_term;
				val += ev.value_sq;
				bud += ev.budget_soft;
				ratio_sum += ev.ratio;
			}
			const double loss = total_loss(-pol * inv, val * inv, bud * inv, cfg);
			if (!std::isfinite(loss))
			{
				throw std::runtime_error("update_step: non-finite loss, aborting update");
			}
			ctrl.actor().apply_gradients(actor_grads, cfg.learning_rate, cfg.momentum, &opt->actor_vel);
			ctrl.critic().apply_gradients(critic_grads, cfg.learning_rate, cfg.momentum, &opt->critic_vel);
			stats.policy_loss += -pol * inv;
			stats.value_loss += val * inv;
			stats.budget_loss += bud * inv;
			stats.total_loss += loss;
			stats.mean_ratio += ratio_sum * inv;
			++batches;
		}
	}
	if (batches > 0)
	{
		stats.policy_loss /= batches;
		stats.value_loss /= batches;
		stats.budget_loss /= batches;
		stats.total_loss /= batches;
		stats.mean_ratio /= batches;
	}
	ctrl.train_step += 1;
	return stats;
}

} // namespace madtopo
