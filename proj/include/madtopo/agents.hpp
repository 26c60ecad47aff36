#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "madtopo/observation.hpp"
#include "madtopo/rng.hpp"
#include "madtopo/topology.hpp"

namespace madtopo {

enum class BackendKind
{
	Simulated,
	Http
};

struct AgentSpec {
	int index = 0;
	BackendKind kind = BackendKind::Simulated;
	std::string model;
	std::uint64_t seed = 0;
	// http only
	std::string endpoint;
	std::string auth_env; // name of the env var holding the bearer token
	double temperature = 0.7;
	int max_tokens = 512;
};

// Desk-scale stand-in for an LLM agent: answers the true label with
// probability p, redraws uniformly over wrong labels otherwise, and is
// swayed toward the modal visible answer with susceptibility s weighted by
// tier score mass. Embeddings are noisy one-hots of the chosen answer so
// cosine similarity tracks agreement.
struct SimAgentModel {
	double base_accuracy = 0.7;	 // p
	double susceptibility = 0.8; // s
	std::vector<std::string> alphabet = {"A", "B", "C", "D"};
	int embedding_dim = 8;
	double noise_scale = 0.1;
	long tokens_per_generation = 200;

	void validate() const
	{
		if (!(base_accuracy >= 0 && base_accuracy <= 1) || !(susceptibility >= 0 && susceptibility <= 1))
		{
			throw std::invalid_argument("SimAgentModel: probability out of range");
		}
		if (embedding_dim < 2 || static_cast<std::size_t>(embedding_dim) < alphabet.size())
		{
			throw std::invalid_argument("SimAgentModel: embedding_dim too small");
		}
		if (alphabet.size() < 2) { throw std::invalid_argument("SimAgentModel: alphabet too small"); }
	}
};

struct SimResponse {
	std::string answer;
	std::string text;
	Embedding embedding;
	long tokens = 0;
};

// Tier influence scores; mirrors the sparsity cost triple so schedule
// expense and information value stay aligned in the toy environment.
inline double tier_influence(Tier t)
{
	switch (t)
	{
		case Tier::Critical: return 1.0;
		case Tier::Reference: return 0.6;
		case Tier::Background: return 0.3;
		case Tier::Invisible: return 0.0;
	}
	return 0.0;
}

namespace detail {

inline int alphabet_index(const SimAgentModel& model, const std::string& answer)
{
	for (std::size_t k = 0; k < model.alphabet.size(); ++k)
	{
		if (model.alphabet[k] == answer) { return static_cast<int>(k); }
	}
	return -1;
}

inline Embedding synth_embedding(const SimAgentModel& model, const std::string& answer, Rng& rng)
{
	std::vector<double> v(static_cast<std::size_t>(model.embedding_dim), 0.0);
	const int idx = alphabet_index(model, answer);
	if (idx >= 0) { v[static_cast<std::size_t>(idx)] = 1.0; }
	for (auto& x : v) { x += model.noise_scale * rng.normal(); }
	Embedding e(std::move(v));
	if (e.norm > 0.0)
	{
		for (auto& x : e.v) { x /= e.norm; }
		e.norm = 1.0;
	}
	return e;
}

inline SimResponse make_response(const SimAgentModel& model, const std::string& answer, Rng& rng)
{
	SimResponse r;
	r.answer = answer;
	r.text = "My answer is \\boxed{" + answer + "}";
	r.embedding = synth_embedding(model, answer, rng);
	r.tokens = model.tokens_per_generation;
	return r;
}

} // namespace detail

// Independent draw: truth with probability p, otherwise uniform over the
// wrong labels of the alphabet.
inline SimResponse sim_initial(const SimAgentModel& model, const std::string& truth, Rng& rng)
{
	model.validate();
	std::string answer;
	if (rng.uniform() < model.base_accuracy)
	{
		answer = truth;
	}
	else
	{
		std::vector<std::string> wrong;
		for (const auto& a : model.alphabet)
		{
			if (a != truth) { wrong.push_back(a); }
		}
		answer = wrong[rng.uniform_int(wrong.size())];
	}
	return detail::make_response(model, answer, rng);
}

struct VisibleNeighbor {
	int agent = 0;
	std::string answer;
	Tier tier = Tier::Invisible;
};

// Debate step: adopt the modal visible answer (by tier score mass, ties to
// the lowest contributing agent index) with probability s * modal_mass /
// total_mass; otherwise redraw independently.
inline SimResponse sim_debate_step(
	const SimAgentModel& model, const std::string& truth, const std::vector<VisibleNeighbor>& visible, Rng& rng)
{
	model.validate();
	double total_mass = 0.0;
	std::map<std::string, double> mass;		 // answer -> score mass
	std::map<std::string, int> first_agent; // answer -> lowest contributing index
	for (const auto& v : visible)
	{
		const double score = tier_influence(v.tier);
		if (score <= 0.0 || v.answer.empty()) { continue; }
		total_mass += score;
		mass[v.answer] += score;
		auto it = first_agent.find(v.answer);
		if (it == first_agent.end() || v.agent < it->second) { first_agent[v.answer] = v.agent; }
	}
	if (total_mass > 0.0)
	{
		std::string modal;
		double best = -1.0;
		for (const auto& [answer, m] : mass)
		{
			if (m > best || (m == best && first_agent[answer] < first_agent[modal]))
			{
				best = m;
				modal = answer;
			}
		}
		const double adopt_prob = model.susceptibility * (best / total_mass);
		if (rng.uniform() < adopt_prob) { return detail::make_response(model, modal, rng); }
	}
	return sim_initial(model, truth, rng);
}

// Content-hash embedding cache; concurrent readers, serialized insertion.
class EmbeddingCache {
public:
	std::optional<Embedding> lookup(const std::string& text) const
	{
		std::lock_guard<std::mutex> lock(mutex_);
		auto it = cache_.find(text);
		if (it == cache_.end()) { return std::nullopt; }
		return it->second;
	}

	void insert(const std::string& text, const Embedding& e)
	{
		std::lock_guard<std::mutex> lock(mutex_);
		cache_.emplace(text, e);
	}

private:
	mutable std::mutex mutex_;
	std::unordered_map<std::string, Embedding> cache_;
};

} // namespace madtopo
