#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "madtopo/baselines.hpp"
#include "madtopo/controller.hpp"
#include "madtopo/debate.hpp"
#include "madtopo/ppo.hpp"
#include "madtopo/reward.hpp"

namespace madtopo {

struct AblationFlags {
	bool no_episode_reward = false;
	bool no_round_reward = false;
	bool no_activation = false;
	bool no_budget_loss = false;

	void set(const std::string& name)
	{
		if (name == "no_episode_reward") { no_episode_reward = true; }
		else if (name == "no_round_reward") { no_round_reward = true; }
		else if (name == "no_activation") { no_activation = true; }
		else if (name == "no_budget_loss") { no_budget_loss = true; }
		else { throw std::invalid_argument("unknown ablation flag: " + name); }
	}
};

struct SwarmConfig {
	BackendKind backend = BackendKind::Simulated;
	std::vector<SimAgentModel> sim_agents;
	std::vector<AgentSpec> http_agents;
	AgentSpec embedding_spec;
	std::string embedding_model;
};

struct RunConfig {
	int n_agents = 6;
	int rounds = 6;
	std::uint64_t global_seed = 7;
	SimilarityConfig similarity;
	BudgetConfig budget;
	RewardWeights reward_weights;
	RewardShapeConfig reward_shape;
	TrainConfig train;
	SwarmConfig swarm;
	PromptTemplates templates;
	std::string dataset_path;
	std::string output_dir = "out";
	int train_updates = 1500;
	int eval_interval = 100;
	int checkpoint_interval = 200;
	int eval_tasks = 20;
	AblationFlags ablations;

	void validate() const
	{
		if (n_agents < 2) { throw std::invalid_argument("RunConfig: n_agents >= 2"); }
		if (rounds < 1) { throw std::invalid_argument("RunConfig: rounds >= 1"); }
		similarity.validate();
		budget.validate();
		train.validate();
		if (swarm.backend == BackendKind::Simulated)
		{
			if (static_cast<int>(swarm.sim_agents.size()) != n_agents)
			{
				throw std::invalid_argument("RunConfig: sim_agents size != n_agents");
			}
		}
		else if (static_cast<int>(swarm.http_agents.size()) != n_agents)
		{
			throw std::invalid_argument("RunConfig: http_agents size != n_agents");
		}
	}
};

// --- config file ------------------------------------------------------------

namespace detail {

template <typename T>
void read_if(const nlohmann::json& j, const char* key, T& out)
{
	if (j.contains(key)) { out = j.at(key).get<T>(); }
}

inline SimAgentModel sim_agent_from_json(const nlohmann::json& j, const SimAgentModel& base)
{
	SimAgentModel m = base;
	read_if(j, "base_accuracy", m.base_accuracy);
	read_if(j, "susceptibility", m.susceptibility);
	read_if(j, "alphabet", m.alphabet);
	read_if(j, "embedding_dim", m.embedding_dim);
	read_if(j, "noise_scale", m.noise_scale);
	read_if(j, "tokens_per_generation", m.tokens_per_generation);
	return m;
}

inline AgentSpec agent_spec_from_json(const nlohmann::json& j, int index)
{
	AgentSpec s;
	s.index = index;
	s.kind = BackendKind::Http;
	read_if(j, "model", s.model);
	read_if(j, "endpoint", s.endpoint);
	read_if(j, "auth_env", s.auth_env);
	read_if(j, "temperature", s.temperature);
	read_if(j, "max_tokens", s.max_tokens);
	std::uint64_t seed = 0;
	read_if(j, "seed", seed);
	s.seed = seed;
	return s;
}

} // namespace detail

inline RunConfig load_config(const std::string& path)
{
	std::ifstream in(path);
	if (!in) { throw std::runtime_error("load_config: cannot open " + path); }
	nlohmann::json j;
	in >> j;

	RunConfig c;
	detail::read_if(j, "n_agents", c.n_agents);
	detail::read_if(j, "rounds", c.rounds);
	detail::read_if(j, "global_seed", c.global_seed);
	detail::read_if(j, "dataset", c.dataset_path);
	detail::read_if(j, "output_dir", c.output_dir);
	detail::read_if(j, "train_updates", c.train_updates);
	detail::read_if(j, "eval_interval", c.eval_interval);
	detail::read_if(j, "checkpoint_interval", c.checkpoint_interval);
	detail::read_if(j, "eval_tasks", c.eval_tasks);

	if (j.contains("similarity")) { detail::read_if(j["similarity"], "lambda", c.similarity.lambda); }
	if (j.contains("budget"))
	{
		detail::read_if(j["budget"], "budget", c.budget.budget);
		detail::read_if(j["budget"], "delta", c.budget.delta);
	}
	if (j.contains("reward_weights"))
	{
		const auto& w = j["reward_weights"];
		detail::read_if(w, "alpha_accuracy", c.reward_weights.alpha_accuracy);
		detail::read_if(w, "alpha_consensus", c.reward_weights.alpha_consensus);
		detail::read_if(w, "alpha_progress", c.reward_weights.alpha_progress);
		detail::read_if(w, "alpha_efficiency", c.reward_weights.alpha_efficiency);
		detail::read_if(w, "alpha_improvement", c.reward_weights.alpha_improvement);
		detail::read_if(w, "alpha_sparsity", c.reward_weights.alpha_sparsity);
		detail::read_if(w, "beta_accuracy", c.reward_weights.beta_accuracy);
		detail::read_if(w, "beta_consensus", c.reward_weights.beta_consensus);
		detail::read_if(w, "beta_efficiency", c.reward_weights.beta_efficiency);
		detail::read_if(w, "beta_improvement", c.reward_weights.beta_improvement);
	}
	if (j.contains("reward_shape"))
	{
		const auto& s = j["reward_shape"];
		detail::read_if(s, "progress_decay", c.reward_shape.progress_decay);
		detail::read_if(s, "consensus_similarity_mix", c.reward_shape.consensus_similarity_mix);
		detail::read_if(s, "expected_answer_tokens", c.reward_shape.expected_answer_tokens);
		detail::read_if(s, "tier_cost_critical", c.reward_shape.tier_cost_critical);
		detail::read_if(s, "tier_cost_reference", c.reward_shape.tier_cost_reference);
		detail::read_if(s, "tier_cost_background", c.reward_shape.tier_cost_background);
	}
	if (j.contains("train"))
	{
		const auto& t = j["train"];
		detail::read_if(t, "learning_rate", c.train.learning_rate);
		detail::read_if(t, "gamma", c.train.gamma);
		detail::read_if(t, "gae_lambda", c.train.gae_lambda);
		detail::read_if(t, "clip_eps", c.train.clip_eps);
		detail::read_if(t, "value_coef", c.train.value_coef);
		detail::read_if(t, "budget_coef", c.train.budget_coef);
		detail::read_if(t, "epochs_per_rollout", c.train.epochs_per_rollout);
		detail::read_if(t, "batch_size", c.train.batch_size);
		detail::read_if(t, "rollout_length", c.train.rollout_length);
		detail::read_if(t, "hidden_dim", c.train.hidden_dim);
		detail::read_if(t, "momentum", c.train.momentum);
		detail::read_if(t, "budget_soft_temp", c.train.budget_soft_temp);
	}
	if (j.contains("swarm"))
	{
		const auto& s = j["swarm"];
		std::string backend = "simulated";
		detail::read_if(s, "backend", backend);
		if (backend == "simulated")
		{
			c.swarm.backend = BackendKind::Simulated;
			SimAgentModel base;
			if (s.contains("sim_default")) { base = detail::sim_agent_from_json(s["sim_default"], base); }
			if (s.contains("sim_agents"))
			{
				for (const auto& a : s["sim_agents"]) { c.swarm.sim_agents.push_back(detail::sim_agent_from_json(a, base)); }
			}
			else
			{
				c.swarm.sim_agents.assign(static_cast<std::size_t>(c.n_agents), base);
			}
		}
		else if (backend == "http")
		{
			c.swarm.backend = BackendKind::Http;
			int idx = 0;
			for (const auto& a : s.at("http_agents")) { c.swarm.http_agents.push_back(detail::agent_spec_from_json(a, idx++)); }
			if (s.contains("embedding"))
			{
				c.swarm.embedding_spec = detail::agent_spec_from_json(s["embedding"], -1);
				detail::read_if(s["embedding"], "model", c.swarm.embedding_model);
			}
		}
		else { throw std::runtime_error("load_config: unknown backend '" + backend + "'"); }
	}
	else
	{
		c.swarm.sim_agents.assign(static_cast<std::size_t>(c.n_agents), SimAgentModel{});
	}
	if (j.contains("prompts"))
	{
		const auto& p = j["prompts"];
		std::string system_path;
		std::string starting_path;
		std::string debate_path;
		detail::read_if(p, "system", system_path);
		detail::read_if(p, "starting", starting_path);
		detail::read_if(p, "debate", debate_path);
		if (!system_path.empty())
		{
			c.templates = PromptTemplates::from_files(system_path, starting_path, debate_path);
		}
	}
	if (j.contains("ablations"))
	{
		for (const auto& name : j["ablations"].get<std::vector<std::string>>()) { c.ablations.set(name); }
	}
	c.validate();
	return c;
}

inline EpisodeConfig episode_config(const RunConfig& c)
{
	EpisodeConfig e;
	e.rounds = c.rounds;
	e.similarity = c.similarity;
	e.budget = c.budget;
	e.weights = c.reward_weights;
	e.shape = c.reward_shape;
	e.templates = c.templates;
	e.no_activation = c.ablations.no_activation;
	e.no_episode_reward = c.ablations.no_episode_reward;
	e.no_round_reward = c.ablations.no_round_reward;
	return e;
}

inline std::unique_ptr<DebateBackend> make_backend(const RunConfig& c)
{
	if (c.swarm.backend == BackendKind::Simulated)
	{
		std::vector<std::uint64_t> seeds;
		for (std::size_t k = 0; k < c.swarm.sim_agents.size(); ++k) { seeds.push_back(c.global_seed * 1000003u + k); }
		return std::make_unique<SimBackend>(c.swarm.sim_agents, seeds);
	}
	return std::make_unique<HttpBackend>(c.swarm.http_agents, c.swarm.embedding_spec, c.swarm.embedding_model);
}

// Deterministic per-(seed, episode) agent seeds so simulated runs are a pure
// function of config + seed.
inline std::vector<std::uint64_t> episode_seeds(std::uint64_t global_seed, std::uint64_t episode_index, int n)
{
	std::vector<std::uint64_t> seeds;
	Rng mix(global_seed ^ (0x9e3779b97f4a7c15ull * (episode_index + 1)));
	for (int k = 0; k < n; ++k) { seeds.push_back(mix.next_u64()); }
	return seeds;
}

// --- metrics ------------------------------------------------------------------

struct Metrics {
	double accuracy = 0.0;
	double mean_tokens = 0.0;
	double mean_tokens_k = 0.0;
	int n_tasks = 0;
	std::string dataset;
	std::optional<double> cost_saving;

	static Metrics from_records(const std::vector<std::pair<bool, long>>& records, const std::string& dataset)
	{
		Metrics m;
		m.dataset = dataset;
		m.n_tasks = static_cast<int>(records.size());
		if (records.empty()) { return m; }
		long correct = 0;
		double tokens = 0.0;
		for (const auto& [ok, t] : records)
		{
			correct += ok ? 1 : 0;
			tokens += static_cast<double>(t);
		}
		m.accuracy = static_cast<double>(correct) / static_cast<double>(m.n_tasks);
		m.mean_tokens = tokens / static_cast<double>(m.n_tasks);
		m.mean_tokens_k = m.mean_tokens / 1000.0;
		return m;
	}

	nlohmann::json to_json() const
	{
		nlohmann::json j = {
			{"accuracy", accuracy},
			{"mean_tokens", mean_tokens},
			{"mean_tokens_k", mean_tokens_k},
			{"n_tasks", n_tasks},
			{"dataset", dataset}};
		if (cost_saving) { j["cost_saving"] = *cost_saving; }
		return j;
	}

	static Metrics from_json(const nlohmann::json& j)
	{
		Metrics m;
		m.accuracy = j.at("accuracy").get<double>();
		m.mean_tokens = j.at("mean_tokens").get<double>();
		m.mean_tokens_k = j.at("mean_tokens_k").get<double>();
		m.n_tasks = j.at("n_tasks").get<int>();
		m.dataset = j.at("dataset").get<std::string>();
		if (j.contains("cost_saving")) { m.cost_saving = j["cost_saving"].get<double>(); }
		return m;
	}
};

// Recomputes Metrics from a persisted transcript JSONL; must reproduce the
// reported metrics bit-exactly.
inline Metrics recompute_metrics(const std::string& transcripts_path, const std::string& dataset)
{
	std::ifstream in(transcripts_path);
	if (!in) { throw std::runtime_error("recompute_metrics: cannot open " + transcripts_path); }
	std::vector<std::pair<bool, long>> records;
	std::string line;
	while (std::getline(in, line))
	{
		if (line.empty()) { continue; }
		const nlohmann::json j = nlohmann::json::parse(line);
		long total = 0;
		for (const auto& round : j.at("round_records"))
		{
			for (const auto& resp : round.at("responses")) { total += resp.at("tokens").get<long>(); }
		}
		if (total != j.at("total_tokens").get<long>())
		{
			throw std::runtime_error("recompute_metrics: token conservation violated in " + j.at("task_id").get<std::string>());
		}
		records.emplace_back(j.at("correct").get<bool>(), total);
	}
	return Metrics::from_records(records, dataset);
}

// --- policies for eval ----------------------------------------------------------

inline std::unique_ptr<TopologyPolicy> make_policy(
	const std::string& topology, const Controller* ctrl, int n, bool deterministic)
{
	if (topology == "rumad" || topology == "learned")
	{
		if (!ctrl) { throw std::invalid_argument("learned topology requires a checkpoint"); }
		return std::make_unique<LearnedPolicy>(*ctrl, deterministic);
	}
	return std::make_unique<StaticPolicy>(static_weights(parse_topology(topology, n)));
}

// --- training loop ----------------------------------------------------------------

struct TrainResult {
	std::string checkpoint_path;
	std::string best_checkpoint_path;
	std::string log_path;
	double first_updates_mean_reward = 0.0;
	double last_updates_mean_reward = 0.0;
};

inline double quick_deterministic_eval(
	const RunConfig& cfg, const Controller& ctrl, DebateBackend& backend, const std::vector<DebateTask>& tasks)
{
	LearnedPolicy policy(ctrl, /*deterministic=*/true);
	EpisodeConfig ep_cfg = episode_config(cfg);
	Rng rng(cfg.global_seed + 17);
	const std::size_t count = std::min<std::size_t>(tasks.size(), static_cast<std::size_t>(cfg.eval_tasks));
	double reward = 0.0;
	auto* sim = dynamic_cast<SimBackend*>(&backend);
	for (std::size_t k = 0; k < count; ++k)
	{
		if (sim) { sim->reseed(episode_seeds(cfg.global_seed + 1, k, cfg.n_agents)); }
		const EpisodeResult r = run_episode(tasks[k], backend, policy, ep_cfg, rng);
		reward += r.transcript.episode_rewards.total;
		for (const auto& rec : r.transcript.round_records)
		{
			if (rec.controlled) { reward += rec.reward.total; }
		}
	}
	return count > 0 ? reward / static_cast<double>(count) : 0.0;
}

inline TrainResult train(const RunConfig& cfg, const std::vector<DebateTask>& tasks, Controller* resume = nullptr)
{
	cfg.validate();
	if (tasks.empty()) { throw std::runtime_error("train: dataset empty"); }
	std::filesystem::create_directories(cfg.output_dir);

	Controller ctrl = resume ? *resume
							 : Controller(cfg.n_agents, cfg.train.hidden_dim, cfg.global_seed);
	auto backend = make_backend(cfg);
	EpisodeConfig ep_cfg = episode_config(cfg);
	Rng rng(cfg.global_seed);
	auto* sim = dynamic_cast<SimBackend*>(backend.get());
	// Training never persists prompt text; skip materializing it for
	// simulated rollouts (simulated agents do not read prompts).
	if (sim) { ep_cfg.build_prompts = false; }

	TrainResult result;
	result.log_path = cfg.output_dir + "/training_log.jsonl";
	result.checkpoint_path = cfg.output_dir + "/checkpoint.json";
	result.best_checkpoint_path = cfg.output_dir + "/checkpoint_best.json";
	std::ofstream log(result.log_path, resume ? std::ios::app : std::ios::out);

	TrainConfig train_cfg = cfg.train;
	if (cfg.ablations.no_budget_loss) { train_cfg.budget_coef = 0.0; }

	RolloutBuffer buffer;
	SgdState opt;
	double best_eval = -1e30;
	std::uint64_t episode_counter = 0;
	std::vector<double> early;
	std::vector<double> late;
	LearnedPolicy policy(ctrl, /*deterministic=*/false);

	for (int update = 0; update < cfg.train_updates; ++update)
	{
		buffer.clear();
		while (buffer.size() < static_cast<std::size_t>(train_cfg.rollout_length))
		{
			const DebateTask& task = tasks[rng.uniform_int(tasks.size())];
			if (sim) { sim->reseed(episode_seeds(cfg.global_seed, episode_counter, cfg.n_agents)); }
			++episode_counter;
			EpisodeResult ep = run_episode(task, *backend, policy, ep_cfg, rng);
			for (auto& tx : ep.transitions) { buffer.transitions.push_back(std::move(tx)); }
		}
		const UpdateStats stats = update_step(buffer, ctrl, train_cfg, cfg.budget, cfg.ablations.no_budget_loss, &opt);

		if (update < 10) { early.push_back(stats.mean_reward); }
		late.push_back(stats.mean_reward);
		if (late.size() > 10) { late.erase(late.begin()); }

		nlohmann::json entry = {
			{"step", ctrl.train_step},
			{"mean_reward", stats.mean_reward},
			{"policy_loss", stats.policy_loss},
			{"value_loss", stats.value_loss},
			{"budget_loss", stats.budget_loss},
			{"total_loss", stats.total_loss},
			{"mean_ratio", stats.mean_ratio},
			{"mean_active_links", stats.mean_active_links},
			{"exact_budget_penalty", stats.exact_budget_penalty}};
		if (cfg.eval_interval > 0 && (update + 1) % cfg.eval_interval == 0)
		{
			const double eval_reward = quick_deterministic_eval(cfg, ctrl, *backend, tasks);
			entry["eval_reward"] = eval_reward;
			if (eval_reward > best_eval)
			{
				best_eval = eval_reward;
				ctrl.save(result.best_checkpoint_path);
			}
		}
		if (cfg.checkpoint_interval > 0 && (update + 1) % cfg.checkpoint_interval == 0)
		{
			ctrl.save(result.checkpoint_path);
		}
		log << entry.dump() << "\n";
	}
	ctrl.save(result.checkpoint_path);
	if (!std::filesystem::exists(result.best_checkpoint_path)) { ctrl.save(result.best_checkpoint_path); }

	double early_mean = 0.0;
	for (double v : early) { early_mean += v; }
	result.first_updates_mean_reward = early.empty() ? 0.0 : early_mean / static_cast<double>(early.size());
	double late_mean = 0.0;
	for (double v : late) { late_mean += v; }
	result.last_updates_mean_reward = late.empty() ? 0.0 : late_mean / static_cast<double>(late.size());
	return result;
}

// --- evaluation --------------------------------------------------------------------

struct EvalResult {
	Metrics metrics;
	std::string transcripts_path;
	std::string metrics_path;
};

inline EvalResult evaluate(
	const RunConfig& cfg, const std::vector<DebateTask>& tasks, const std::string& topology,
	const Controller* ctrl, const std::string& reference_metrics_path = "")
{
	cfg.validate();
	if (tasks.empty()) { throw std::runtime_error("evaluate: dataset empty"); }
	std::filesystem::create_directories(cfg.output_dir);
	auto backend = make_backend(cfg);
	auto policy = make_policy(topology, ctrl, cfg.n_agents, /*deterministic=*/true);
	EpisodeConfig ep_cfg = episode_config(cfg);
	auto* sim = dynamic_cast<SimBackend*>(backend.get());

	EvalResult out;
	out.transcripts_path = cfg.output_dir + "/transcripts.jsonl";
	out.metrics_path = cfg.output_dir + "/metrics.json";
	std::ofstream transcripts(out.transcripts_path);
	Rng rng(cfg.global_seed);
	std::vector<std::pair<bool, long>> records;
	for (std::size_t k = 0; k < tasks.size(); ++k)
	{
		if (sim) { sim->reseed(episode_seeds(cfg.global_seed, k, cfg.n_agents)); }
		const EpisodeResult ep = run_episode(tasks[k], *backend, *policy, ep_cfg, rng);
		transcripts << transcript_to_json(ep.transcript).dump() << "\n";
		records.emplace_back(ep.transcript.correct, ep.transcript.total_tokens);
	}
	out.metrics = Metrics::from_records(records, cfg.dataset_path);
	if (!reference_metrics_path.empty())
	{
		std::ifstream ref_in(reference_metrics_path);
		if (!ref_in) { throw std::runtime_error("evaluate: cannot open reference metrics " + reference_metrics_path); }
		nlohmann::json ref_j;
		ref_in >> ref_j;
		const Metrics ref = Metrics::from_json(ref_j);
		if (ref.mean_tokens > 0.0) { out.metrics.cost_saving = 1.0 - out.metrics.mean_tokens / ref.mean_tokens; }
	}
	std::ofstream mjson(out.metrics_path);
	mjson << out.metrics.to_json().dump(2) << "\n";
	return out;
}

} // namespace madtopo
