#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "madtopo/observation.hpp"
#include "madtopo/topology.hpp"

namespace madtopo {

// Multi-objective reward coefficients. alpha weights the per-round reward,
// beta the terminal episode reward.
struct RewardWeights {
	double alpha_accuracy = 1.0;
	double alpha_consensus = 0.3;
	double alpha_progress = 0.1;
	double alpha_efficiency = 0.2;
	double alpha_improvement = 1.0;
	double alpha_sparsity = 0.1; // penalty

	double beta_accuracy = 2.0;
	double beta_consensus = 0.5;
	double beta_efficiency = 0.3;
	double beta_improvement = 0.2;
};

// Knobs the source formulas leave open; all surfaced in config and logged
// into transcripts so runs are self-describing.
struct RewardShapeConfig {
	double progress_decay = 0.5;		 // geometric per-round decay of the progress bonus
	double consensus_similarity_mix = 0.5; // weight on mean pairwise similarity vs majority fraction
	int expected_answer_tokens = 256;	 // per-agent answer-length budget for the efficiency baseline
	double tier_cost_critical = 1.0;
	double tier_cost_reference = 0.6;
	double tier_cost_background = 0.3;
};

// Everything the six round-reward factors consume for one round.
struct RoundOutcome {
	int round_index = 0; // 0 = initialization
	int n_agents = 0;
	std::string majority_answer;
	std::string previous_majority_answer;
	std::string ground_truth;
	std::vector<std::string> answers; // per-agent, canonical labels ("" = unparsed)
	double mean_pairwise_sim = 0.0;	  // from the round's SimilarityMatrix
	long tokens_generated = 0;
	std::vector<Tier> tiers; // n*n, empty when no controller acted (round 0)
};

struct RewardBreakdown {
	double accuracy = 0.0;
	double consensus = 0.0;
	double progress = 0.0;
	double efficiency = 0.0;
	double improvement = 0.0;
	double sparsity = 0.0;
	double total = 0.0;
};

inline double accuracy_term(const RoundOutcome& out)
{
	return (!out.majority_answer.empty() && out.majority_answer == out.ground_truth) ? 1.0 : 0.0;
}

// Majority-fraction and mean pairwise similarity blend.
inline double consensus_term(const RoundOutcome& out, const RewardShapeConfig& shape)
{
	if (out.n_agents < 2) { throw std::invalid_argument("consensus_term: n >= 2 required"); }
	int matching = 0;
	for (const auto& a : out.answers)
	{
		if (!a.empty() && a == out.majority_answer) { ++matching; }
	}
	const double fraction = static_cast<double>(matching) / out.n_agents;
	const double mix = shape.consensus_similarity_mix;
	return (1.0 - mix) * fraction + mix * out.mean_pairwise_sim;
}

// Decaying bonus for being correct early; in-progress rounds only (t >= 1).
inline double progress_term(const RoundOutcome& out, const RewardShapeConfig& shape)
{
	if (out.round_index < 1) { throw std::invalid_argument("progress_term: in-progress rounds only (t >= 1)"); }
	const double acc = accuracy_term(out);
	if (acc == 0.0) { return 0.0; }
	double decay = 1.0;
	for (int k = 1; k < out.round_index; ++k) { decay *= shape.progress_decay; }
	return acc * decay;
}

inline double efficiency_term(long tokens_generated, long baseline_tokens)
{
	if (baseline_tokens <= 0) { throw std::invalid_argument("efficiency_term: baseline must be positive"); }
	const double v = 1.0 - static_cast<double>(tokens_generated) / static_cast<double>(baseline_tokens);
	return std::clamp(v, 0.0, 1.0);
}

inline double improvement_term(const RoundOutcome& out)
{
	const bool was_wrong = out.previous_majority_answer != out.ground_truth;
	const bool now_right = !out.majority_answer.empty() && out.majority_answer == out.ground_truth;
	return (was_wrong && now_right) ? 1.0 : 0.0;
}

// Schedule expense: per-tier costs over off-diagonal edges, normalized by the
// n(n-1) ceiling so all-Critical maps to 1.
inline double sparsity_term(const RoundOutcome& out, const RewardShapeConfig& shape)
{
	const int n = out.n_agents;
	if (n < 2) { throw std::invalid_argument("sparsity_term: n >= 2 required"); }
	if (out.tiers.size() != static_cast<std::size_t>(n) * n)
	{
		throw std::invalid_argument("sparsity_term: tier matrix missing");
	}
	double cost = 0.0;
	for (int i = 0; i < n; ++i)
	{
		for (int j = 0; j < n; ++j)
		{
			if (i == j) { continue; }
			switch (out.tiers[static_cast<std::size_t>(i) * n + j])
			{
				case Tier::Critical: cost += shape.tier_cost_critical; break;
				case Tier::Reference: cost += shape.tier_cost_reference; break;
				case Tier::Background: cost += shape.tier_cost_background; break;
				case Tier::Invisible: break;
			}
		}
	}
	return cost / (static_cast<double>(n) * (n - 1));
}

inline double combine_round_total(const RewardBreakdown& r, const RewardWeights& w)
{
	return w.alpha_accuracy * r.accuracy + w.alpha_consensus * r.consensus + w.alpha_progress * r.progress +
		w.alpha_efficiency * r.efficiency + w.alpha_improvement * r.improvement - w.alpha_sparsity * r.sparsity;
}

inline double combine_episode_total(const RewardBreakdown& r, const RewardWeights& w)
{
	return w.beta_accuracy * r.accuracy + w.beta_consensus * r.consensus + w.beta_efficiency * r.efficiency +
		w.beta_improvement * r.improvement;
}

inline RewardBreakdown round_reward(const RoundOutcome& out, const RewardWeights& w, const RewardShapeConfig& shape)
{
	RewardBreakdown r;
	r.accuracy = accuracy_term(out);
	r.consensus = consensus_term(out, shape);
	r.progress = progress_term(out, shape);
	r.efficiency = efficiency_term(out.tokens_generated, static_cast<long>(out.n_agents) * shape.expected_answer_tokens);
	r.improvement = improvement_term(out);
	r.sparsity = sparsity_term(out, shape);
	r.total = combine_round_total(r, w);
	return r;
}

// Terminal reward: accuracy/consensus/efficiency/improvement only. Progress
// and sparsity are in-progress signals and never appear here. The
// improvement component compares the round-0 majority against the final one.
struct EpisodeSummary {
	int n_agents = 0;
	int rounds = 0;
	std::string final_majority;
	std::string round0_majority;
	std::string ground_truth;
	std::vector<std::string> final_answers;
	double final_mean_pairwise_sim = 0.0;
	long total_tokens = 0;
};

inline RewardBreakdown episode_reward(const EpisodeSummary& ep, const RewardWeights& w, const RewardShapeConfig& shape)
{
	RewardBreakdown r;
	r.accuracy = (!ep.final_majority.empty() && ep.final_majority == ep.ground_truth) ? 1.0 : 0.0;

	int matching = 0;
	for (const auto& a : ep.final_answers)
	{
		if (!a.empty() && a == ep.final_majority) { ++matching; }
	}
	const double fraction = ep.n_agents > 0 ? static_cast<double>(matching) / ep.n_agents : 0.0;
	const double mix = shape.consensus_similarity_mix;
	r.consensus = (1.0 - mix) * fraction + mix * ep.final_mean_pairwise_sim;

	const long baseline = static_cast<long>(ep.rounds) * ep.n_agents * shape.expected_answer_tokens;
	r.efficiency = efficiency_term(ep.total_tokens, baseline);

	const bool was_wrong = ep.round0_majority != ep.ground_truth;
	r.improvement = (was_wrong && r.accuracy == 1.0) ? 1.0 : 0.0;

	r.total = combine_episode_total(r, w);
	return r;
}

} // namespace madtopo
