#pragma once

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "madtopo/agents.hpp"
#include "madtopo/controller.hpp"
#include "madtopo/http_client.hpp"
#include "madtopo/observation.hpp"
#include "madtopo/ppo.hpp"
#include "madtopo/reward.hpp"
#include "madtopo/rng.hpp"
#include "madtopo/topology.hpp"

namespace madtopo {

enum class AnswerFormat
{
	Choice,
	Numeric
};

struct DebateTask {
	std::string id;
	std::string question;
	AnswerFormat format = AnswerFormat::Choice;
	std::string ground_truth;
	std::vector<std::string> choices;
};

inline std::vector<DebateTask> load_tasks(const std::string& path)
{
	std::ifstream in(path);
	if (!in) { throw std::runtime_error("load_tasks: cannot open " + path); }
	std::vector<DebateTask> tasks;
	std::string line;
	while (std::getline(in, line))
	{
		if (line.empty()) { continue; }
		const nlohmann::json j = nlohmann::json::parse(line);
		DebateTask t;
		t.id = j.at("id").get<std::string>();
		t.question = j.at("question").get<std::string>();
		const std::string fmt = j.at("format").get<std::string>();
		if (fmt == "choice") { t.format = AnswerFormat::Choice; }
		else if (fmt == "numeric") { t.format = AnswerFormat::Numeric; }
		else { throw std::runtime_error("load_tasks: unknown format '" + fmt + "' in task " + t.id); }
		t.ground_truth = j.at("answer").get<std::string>();
		if (j.contains("choices")) { t.choices = j["choices"].get<std::vector<std::string>>(); }
		tasks.push_back(std::move(t));
	}
	return tasks;
}

// Stage prompts with angle-bracket slots. Defaults match the shipped
// template files byte for byte.
struct PromptTemplates {
	std::string system =
		"Welcome to the debate! You are a seasoned debater with expertise in succinctly and persuasively "
		"expressing your viewpoints. You will be assigned to debate groups, where you will engage in discussions "
		"with fellow participants. The outcomes of each group's deliberations will be shared among all members. "
		"It is crucial for you to leverage this information effectively in order to critically analyze the "
		"question at hand and ultimately arrive at the correct answer. Best of luck!";
	std::string starting =
		"Can you answer the following question as accurately as possible? <Question> Explain your answer. "
		"<Output Format>.";
	std::string debate =
		"These are the solutions from other agents: <other agent responses>. Based on the above responses with "
		"their indicated importance, can you provide an updated answer? Examine all solutions step by step. "
		"<Output Format>.";

	static PromptTemplates from_files(const std::string& system_path, const std::string& starting_path, const std::string& debate_path)
	{
		PromptTemplates t;
		t.system = read_file(system_path);
		t.starting = read_file(starting_path);
		t.debate = read_file(debate_path);
		return t;
	}

private:
	static std::string read_file(const std::string& path)
	{
		std::ifstream in(path);
		if (!in) { throw std::runtime_error("PromptTemplates: cannot open " + path); }
		std::stringstream ss;
		ss << in.rdbuf();
		std::string s = ss.str();
		while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) { s.pop_back(); }
		return s;
	}
};

inline std::string output_format_clause(AnswerFormat format)
{
	if (format == AnswerFormat::Choice)
	{
		return "Put your final choice in the form \\boxed{{answer}} at the end of your response";
	}
	return "Your final answer should be a single numerical number, in the Form \\boxed{{answer}}, at the end of "
		   "your response";
}

inline std::string replace_slot(std::string text, const std::string& slot, const std::string& value)
{
	const std::size_t pos = text.find(slot);
	if (pos != std::string::npos) { text.replace(pos, slot.size(), value); }
	return text;
}

inline std::string starting_prompt(const DebateTask& task, const PromptTemplates& templates)
{
	std::string p = replace_slot(templates.starting, "<Question>", task.question);
	return replace_slot(p, "<Output Format>", output_format_clause(task.format));
}

// --- answer extraction -----------------------------------------------------

namespace detail {

// Content of the last balanced \boxed{...}; empty when absent.
inline std::string last_boxed_content(const std::string& text)
{
	static const std::string kBox = "\\boxed{";
	std::size_t pos = std::string::npos;
	std::size_t search = 0;
	while (true)
	{
		const std::size_t hit = text.find(kBox, search);
		if (hit == std::string::npos) { break; }
		pos = hit;
		search = hit + 1;
	}
	if (pos == std::string::npos) { return ""; }
	std::size_t k = pos + kBox.size();
	int depth = 1;
	std::string content;
	while (k < text.size() && depth > 0)
	{
		const char c = text[k];
		if (c == '{') { ++depth; }
		else if (c == '}') { --depth; }
		if (depth > 0) { content.push_back(c); }
		++k;
	}
	if (depth != 0) { return ""; }
	return content;
}

inline std::string canonical_numeric(std::string s)
{
	std::string cleaned;
	for (char c : s)
	{
		if (c == ',' || c == ' ' || c == '$') { continue; }
		cleaned.push_back(c);
	}
	while (!cleaned.empty() && cleaned.back() == '.') { cleaned.pop_back(); }
	if (cleaned.empty()) { return ""; }
	char* end = nullptr;
	const double v = std::strtod(cleaned.c_str(), &end);
	if (end != cleaned.c_str() + cleaned.size()) { return ""; }
	if (v == static_cast<long long>(v)) { return std::to_string(static_cast<long long>(v)); }
	char buf[64];
	std::snprintf(buf, sizeof(buf), "%.10g", v);
	return buf;
}

} // namespace detail

// Canonical label from the last \boxed{...} occurrence; "" marks an
// unparseable response (excluded from that round's majority).
inline std::string extract_answer(const std::string& text, AnswerFormat format)
{
	const std::string content = detail::last_boxed_content(text);
	if (content.empty()) { return ""; }
	if (format == AnswerFormat::Choice)
	{
		for (char c : content)
		{
			if (std::isalpha(static_cast<unsigned char>(c)))
			{
				return std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
			}
		}
		return "";
	}
	return detail::canonical_numeric(content);
}

// Plurality winner; ties go to the label whose lowest-index holder comes
// first. Unparsed ("") answers are excluded.
inline std::string majority_vote(const std::vector<std::string>& answers)
{
	std::map<std::string, int> counts;
	std::map<std::string, int> first_holder;
	for (std::size_t i = 0; i < answers.size(); ++i)
	{
		if (answers[i].empty()) { continue; }
		counts[answers[i]] += 1;
		if (!first_holder.count(answers[i])) { first_holder[answers[i]] = static_cast<int>(i); }
	}
	if (counts.empty()) { throw std::runtime_error("majority_vote: no parsed answers"); }
	std::string winner;
	int best = -1;
	for (const auto& [label, count] : counts)
	{
		if (count > best || (count == best && first_holder[label] < first_holder[winner]))
		{
			best = count;
			winner = label;
		}
	}
	return winner;
}

inline std::string majority_or_empty(const std::vector<std::string>& answers)
{
	try
	{
		return majority_vote(answers);
	}
	catch (const std::runtime_error&)
	{
		return "";
	}
}

// --- prompt construction ----------------------------------------------------

struct NeighborBlock {
	int agent = 0;
	Tier tier = Tier::Invisible;
	std::string text;
};

// Visible neighbors tagged and ordered Critical, Reference, Background;
// ascending agent index within a tier; Invisible omitted entirely.
inline std::string build_prompt(
	int agent, const std::vector<std::string>& previous_texts, const std::vector<Tier>& tiers, int n,
	AnswerFormat format, const PromptTemplates& templates)
{
	std::vector<NeighborBlock> blocks;
	for (int j = 0; j < n; ++j)
	{
		if (j == agent) { continue; }
		const Tier t = tiers[static_cast<std::size_t>(agent) * n + j];
		if (t == Tier::Invisible) { continue; }
		blocks.push_back({j, t, previous_texts[static_cast<std::size_t>(j)]});
	}
	std::stable_sort(blocks.begin(), blocks.end(), [](const NeighborBlock& a, const NeighborBlock& b) {
		if (a.tier != b.tier) { return static_cast<int>(a.tier) < static_cast<int>(b.tier); }
		return a.agent < b.agent;
	});
	std::string joined;
	for (std::size_t k = 0; k < blocks.size(); ++k)
	{
		if (k > 0) { joined += "\n"; }
		joined += tier_tag(blocks[k].tier) + " Agent " + std::to_string(blocks[k].agent) + ": " + blocks[k].text;
	}
	std::string p = replace_slot(templates.debate, "<other agent responses>", joined);
	return replace_slot(p, "<Output Format>", output_format_clause(format));
}

// --- backends ---------------------------------------------------------------

struct AgentResponse {
	int agent = 0;
	int round = 0;
	std::string text;
	std::string answer; // canonical, "" = unparsed
	Embedding embedding;
	long tokens = 0;
	bool reused = false;
	bool token_count_estimated = false;
	bool failed = false; // backend gave up after retries this round
};

// One generation call. Simulated agents consume the structured neighbor view
// and attach their synthetic embedding; HTTP agents consume the prompt text.
class DebateBackend {
public:
	virtual ~DebateBackend() = default;
	virtual AgentResponse generate(
		const DebateTask& task, int agent, int round, const std::string& system_prompt,
		const std::string& user_prompt, const std::vector<VisibleNeighbor>& visible) = 0;
	virtual Embedding embed(int agent, const std::string& text) = 0;
	virtual int n_agents() const = 0;
};

class SimBackend : public DebateBackend {
public:
	SimBackend(std::vector<SimAgentModel> models, const std::vector<std::uint64_t>& seeds)
		: models_(std::move(models))
	{
		if (models_.size() != seeds.size() || models_.size() < 2)
		{
			throw std::invalid_argument("SimBackend: need matching models/seeds, n >= 2");
		}
		for (auto s : seeds) { rngs_.emplace_back(s); }
	}

	// Reseeds per-agent streams; call before each episode for reproducible
	// (specs, task, seeds) -> transcript behavior.
	void reseed(const std::vector<std::uint64_t>& seeds)
	{
		rngs_.clear();
		for (auto s : seeds) { rngs_.emplace_back(s); }
	}

	AgentResponse generate(
		const DebateTask& task, int agent, int round, const std::string&, const std::string&,
		const std::vector<VisibleNeighbor>& visible) override
	{
		const SimAgentModel& model = models_[static_cast<std::size_t>(agent)];
		Rng& rng = rngs_[static_cast<std::size_t>(agent)];
		const SimResponse sim =
			(round == 0) ? sim_initial(model, task.ground_truth, rng) : sim_debate_step(model, task.ground_truth, visible, rng);
		AgentResponse r;
		r.agent = agent;
		r.round = round;
		r.text = sim.text;
		r.answer = sim.answer;
		r.embedding = sim.embedding;
		r.tokens = sim.tokens;
		return r;
	}

	Embedding embed(int, const std::string&) override
	{
		throw std::logic_error("SimBackend: embeddings are attached at generation");
	}

	int n_agents() const override { return static_cast<int>(models_.size()); }

	const std::vector<SimAgentModel>& models() const { return models_; }

private:
	std::vector<SimAgentModel> models_;
	std::vector<Rng> rngs_;
};

class HttpBackend : public DebateBackend {
public:
	HttpBackend(std::vector<AgentSpec> specs, AgentSpec embed_spec, std::string embed_model, RetryPolicy retry = {})
		: specs_(std::move(specs)), embed_spec_(std::move(embed_spec)), embed_model_(std::move(embed_model)), client_(retry)
	{
	}

	AgentResponse generate(
		const DebateTask&, int agent, int round, const std::string& system_prompt, const std::string& user_prompt,
		const std::vector<VisibleNeighbor>&) override
	{
		const AgentSpec& spec = specs_[static_cast<std::size_t>(agent)];
		const GenerateResult g = client_.generate(spec, system_prompt, user_prompt);
		AgentResponse r;
		r.agent = agent;
		r.round = round;
		r.text = g.text;
		r.tokens = g.completion_tokens;
		r.token_count_estimated = g.token_count_estimated;
		return r;
	}

	Embedding embed(int, const std::string& text) override
	{
		if (auto cached = cache_.lookup(text)) { return *cached; }
		const Embedding e = client_.embed(embed_spec_, embed_model_, text);
		cache_.insert(text, e);
		return e;
	}

	int n_agents() const override { return static_cast<int>(specs_.size()); }

private:
	std::vector<AgentSpec> specs_;
	AgentSpec embed_spec_;
	std::string embed_model_;
	HttpAgentClient client_;
	EmbeddingCache cache_;
};

// --- topology policies -------------------------------------------------------

struct PolicyDecision {
	WeightMatrix weights;
	bool has_transition = false;
	Transition transition; // obs/z/eps/old_log_prob/value filled; reward filled by the env
};

class TopologyPolicy {
public:
	virtual ~TopologyPolicy() = default;
	virtual PolicyDecision decide(const Observation& obs, int round, Rng& rng) = 0;
};

class LearnedPolicy : public TopologyPolicy {
public:
	LearnedPolicy(const Controller& ctrl, bool deterministic) : ctrl_(ctrl), deterministic_(deterministic) {}

	PolicyDecision decide(const Observation& obs, int, Rng& rng) override
	{
		const GaussianEdgeParams gp = ctrl_.actor_forward(obs);
		PolicyDecision d;
		if (deterministic_)
		{
			d.weights = Controller::deterministic_weights(gp);
			return d;
		}
		const SampledAction a = Controller::sample_weights(gp, rng);
		d.weights = a.w;
		d.has_transition = true;
		d.transition.obs = obs;
		d.transition.z = a.z;
		d.transition.eps = a.eps;
		d.transition.old_log_prob = a.log_prob;
		d.transition.value_estimate = ctrl_.critic_forward(obs);
		return d;
	}

private:
	const Controller& ctrl_;
	bool deterministic_;
};

class StaticPolicy : public TopologyPolicy {
public:
	explicit StaticPolicy(WeightMatrix w) : w_(std::move(w)) {}
	PolicyDecision decide(const Observation&, int, Rng&) override { return {w_, false, {}}; }

private:
	WeightMatrix w_;
};

// Replays a fixed per-round weight schedule; rounds index from 1.
class ScriptedPolicy : public TopologyPolicy {
public:
	explicit ScriptedPolicy(std::vector<WeightMatrix> schedule) : schedule_(std::move(schedule)) {}
	PolicyDecision decide(const Observation&, int round, Rng&) override
	{
		const std::size_t idx = static_cast<std::size_t>(round - 1);
		if (idx >= schedule_.size()) { throw std::out_of_range("ScriptedPolicy: round beyond schedule"); }
		return {schedule_[idx], false, {}};
	}

private:
	std::vector<WeightMatrix> schedule_;
};

// --- episode runner -----------------------------------------------------------

struct EpisodeConfig {
	int rounds = 6; // total rounds including round 0; the controller acts rounds-1 times
	SimilarityConfig similarity;
	BudgetConfig budget;
	RewardWeights weights;
	RewardShapeConfig shape;
	PromptTemplates templates;
	int retries = 2;
	// Simulated agents never read prompt text, so rollout-heavy training can
	// skip prompt materialization; transcripts meant for persistence keep it.
	bool build_prompts = true;
	// ablation switches
	bool no_activation = false;
	bool no_episode_reward = false;
	bool no_round_reward = false;
};

struct RoundRecord {
	int round = 0;
	bool controlled = false; // false for round 0
	WeightMatrix weights;	 // empty when not controlled
	std::vector<Tier> tiers;
	std::vector<bool> active;
	std::vector<AgentResponse> responses;
	RewardBreakdown reward; // zero struct for round 0
	std::string majority;
	long tokens = 0;
	long prompt_tokens = 0;
	int active_links = 0;
};

struct EpisodeTranscript {
	std::string task_id;
	std::string ground_truth;
	int n_agents = 0;
	int rounds = 0;
	std::vector<RoundRecord> round_records;
	std::string final_answer;
	bool correct = false;
	long total_tokens = 0;
	RewardBreakdown episode_rewards;
};

struct EpisodeResult {
	EpisodeTranscript transcript;
	std::vector<Transition> transitions;
};

namespace detail {

inline AgentResponse generate_with_retries(
	DebateBackend& backend, const DebateTask& task, int agent, int round, const std::string& system_prompt,
	const std::string& user_prompt, const std::vector<VisibleNeighbor>& visible, int retries)
{
	for (int attempt = 0; attempt <= retries; ++attempt)
	{
		try
		{
			return backend.generate(task, agent, round, system_prompt, user_prompt, visible);
		}
		catch (const HttpError&)
		{
			if (attempt == retries)
			{
				AgentResponse r;
				r.agent = agent;
				r.round = round;
				r.failed = true;
				return r;
			}
		}
	}
	AgentResponse r;
	r.agent = agent;
	r.round = round;
	r.failed = true;
	return r;
}

inline void attach_answer_and_embedding(DebateBackend& backend, AgentResponse& r, AnswerFormat format)
{
	if (r.failed) { return; }
	r.answer = extract_answer(r.text, format);
	if (r.embedding.v.empty()) { r.embedding = backend.embed(r.agent, r.text); }
}

} // namespace detail

// Three-stage pipeline: independent initialization, rounds-1 topology
// controlled debate rounds, majority vote. Emits one Transition per
// controlled round when the policy samples stochastically.
inline EpisodeResult run_episode(
	const DebateTask& task, DebateBackend& backend, TopologyPolicy& policy, const EpisodeConfig& cfg, Rng& rng)
{
	const int n = backend.n_agents();
	if (n < 2) { throw std::invalid_argument("run_episode: need at least 2 agents"); }
	if (cfg.rounds < 1) { throw std::invalid_argument("run_episode: rounds >= 1"); }
	cfg.similarity.validate();
	cfg.budget.validate();

	EpisodeResult result;
	EpisodeTranscript& tr = result.transcript;
	tr.task_id = task.id;
	tr.ground_truth = task.ground_truth;
	tr.n_agents = n;
	tr.rounds = cfg.rounds;

	// Stage 1: independent initialization; no cross-agent content.
	std::vector<AgentResponse> state(static_cast<std::size_t>(n));
	{
		RoundRecord rec;
		rec.round = 0;
		const std::string prompt = cfg.build_prompts ? starting_prompt(task, cfg.templates) : std::string();
		const long prompt_estimate = cfg.build_prompts ? estimate_tokens(prompt) : 0;
		for (int i = 0; i < n; ++i)
		{
			AgentResponse r =
				detail::generate_with_retries(backend, task, i, 0, cfg.templates.system, prompt, {}, cfg.retries);
			detail::attach_answer_and_embedding(backend, r, task.format);
			rec.tokens += r.tokens;
			rec.prompt_tokens += prompt_estimate;
			state[static_cast<std::size_t>(i)] = r;
			rec.responses.push_back(r);
		}
		rec.active.assign(static_cast<std::size_t>(n), true);
		// Failed initializations keep a neutral unit embedding so the
		// similarity matrix stays well defined.
		std::size_t dim = 0;
		for (const auto& r : state)
		{
			if (!r.failed) { dim = r.embedding.v.size(); }
		}
		for (auto& r : state)
		{
			if (r.failed && dim > 0)
			{
				std::vector<double> v(dim, 1.0 / std::sqrt(static_cast<double>(dim)));
				r.embedding = Embedding(std::move(v));
			}
		}
		std::vector<std::string> answers;
		for (const auto& r : state) { answers.push_back(r.answer); }
		rec.majority = majority_or_empty(answers);
		tr.total_tokens += rec.tokens;
		tr.round_records.push_back(std::move(rec));
	}

	std::string previous_majority = tr.round_records[0].majority;
	const std::string round0_majority = previous_majority;

	// Stage 2: adaptive sparse debate.
	for (int t = 1; t < cfg.rounds; ++t)
	{
		std::vector<std::string> answers;
		std::vector<Embedding> embeddings;
		std::vector<std::string> texts;
		for (const auto& r : state)
		{
			answers.push_back(r.answer);
			embeddings.push_back(r.embedding);
			texts.push_back(r.text);
		}
		const SimilarityMatrix sim = pairwise_similarity(embeddings, answers, cfg.similarity);
		const Observation obs = build_observation(sim);

		PolicyDecision decision = policy.decide(obs, t, rng);
		decision.weights.validate();
		RoundRecord rec;
		rec.round = t;
		rec.controlled = true;
		rec.weights = decision.weights;
		rec.tiers = quantize_tiers(decision.weights);
		ActivationMask mask = compute_activation(decision.weights);
		if (cfg.no_activation) { mask.active.assign(static_cast<std::size_t>(n), true); }
		rec.active = mask.active;
		rec.active_links = count_active_links(decision.weights, cfg.budget);

		std::vector<bool> failed_this_round(static_cast<std::size_t>(n), false);
		for (int i = 0; i < n; ++i)
		{
			if (!mask.active[static_cast<std::size_t>(i)])
			{
				AgentResponse reused = state[static_cast<std::size_t>(i)];
				reused.round = t;
				reused.tokens = 0;
				reused.reused = true;
				rec.responses.push_back(reused);
				continue;
			}
			std::vector<VisibleNeighbor> visible;
			for (int j = 0; j < n; ++j)
			{
				if (j == i) { continue; }
				const Tier tier = rec.tiers[static_cast<std::size_t>(i) * n + j];
				if (tier == Tier::Invisible) { continue; }
				visible.push_back({j, state[static_cast<std::size_t>(j)].answer, tier});
			}
			const std::string prompt =
				cfg.build_prompts ? build_prompt(i, texts, rec.tiers, n, task.format, cfg.templates) : std::string();
			const long prompt_estimate = cfg.build_prompts ? estimate_tokens(prompt) : 0;
			AgentResponse r = detail::generate_with_retries(
				backend, task, i, t, cfg.templates.system, prompt, visible, cfg.retries);
			detail::attach_answer_and_embedding(backend, r, task.format);
			if (r.failed)
			{
				// State keeps the last good response for future rounds; this
				// round the agent counts as unparsed.
				failed_this_round[static_cast<std::size_t>(i)] = true;
				rec.responses.push_back(r);
				rec.prompt_tokens += prompt_estimate;
				continue;
			}
			rec.tokens += r.tokens;
			rec.prompt_tokens += prompt_estimate;
			state[static_cast<std::size_t>(i)] = r;
			rec.responses.push_back(r);
		}

		std::vector<std::string> new_answers;
		std::vector<Embedding> new_embeddings;
		for (int i = 0; i < n; ++i)
		{
			const auto& r = state[static_cast<std::size_t>(i)];
			new_answers.push_back(failed_this_round[static_cast<std::size_t>(i)] ? std::string() : r.answer);
			new_embeddings.push_back(r.embedding);
		}
		rec.majority = majority_or_empty(new_answers);

		RoundOutcome outcome;
		outcome.round_index = t;
		outcome.n_agents = n;
		outcome.majority_answer = rec.majority;
		outcome.previous_majority_answer = previous_majority;
		outcome.ground_truth = task.ground_truth;
		outcome.answers = new_answers;
		outcome.mean_pairwise_sim =
			mean_pairwise_similarity(pairwise_similarity(new_embeddings, new_answers, cfg.similarity));
		outcome.tokens_generated = rec.tokens;
		outcome.tiers = rec.tiers;
		rec.reward = round_reward(outcome, cfg.weights, cfg.shape);

		if (decision.has_transition)
		{
			Transition& tx = decision.transition;
			tx.reward = rec.reward.total;
			tx.done = (t == cfg.rounds - 1);
			tx.active_link_count = rec.active_links;
			result.transitions.push_back(std::move(tx));
		}

		previous_majority = rec.majority;
		tr.total_tokens += rec.tokens;
		tr.round_records.push_back(std::move(rec));
	}

	// Stage 3: consensus formation.
	std::vector<std::string> final_answers;
	std::vector<Embedding> final_embeddings;
	for (const auto& r : state)
	{
		final_answers.push_back(r.answer);
		final_embeddings.push_back(r.embedding);
	}
	// An all-unparsed electorate yields no consensus; record the episode as
	// incorrect rather than aborting it.
	tr.final_answer = majority_or_empty(final_answers);
	tr.correct = (!tr.final_answer.empty() && tr.final_answer == task.ground_truth);

	EpisodeSummary ep;
	ep.n_agents = n;
	ep.rounds = cfg.rounds;
	ep.final_majority = tr.final_answer;
	ep.round0_majority = round0_majority;
	ep.ground_truth = task.ground_truth;
	ep.final_answers = final_answers;
	ep.final_mean_pairwise_sim =
		mean_pairwise_similarity(pairwise_similarity(final_embeddings, final_answers, cfg.similarity));
	ep.total_tokens = tr.total_tokens;
	tr.episode_rewards = episode_reward(ep, cfg.weights, cfg.shape);

	if (!result.transitions.empty())
	{
		if (cfg.no_round_reward)
		{
			for (auto& tx : result.transitions) { tx.reward = tr.episode_rewards.total; }
		}
		else if (!cfg.no_episode_reward)
		{
			result.transitions.back().reward += tr.episode_rewards.total;
		}
	}
	return result;
}

// --- transcript (de)serialization --------------------------------------------

inline nlohmann::json reward_to_json(const RewardBreakdown& r)
{
	return {
		{"accuracy", r.accuracy}, {"consensus", r.consensus},	{"progress", r.progress},
		{"efficiency", r.efficiency}, {"improvement", r.improvement}, {"sparsity", r.sparsity},
		{"total", r.total}};
}

inline nlohmann::json transcript_to_json(const EpisodeTranscript& tr)
{
	nlohmann::json rounds = nlohmann::json::array();
	for (const auto& rec : tr.round_records)
	{
		nlohmann::json responses = nlohmann::json::array();
		for (const auto& r : rec.responses)
		{
			responses.push_back(
				{{"agent", r.agent},
				 {"answer", r.answer},
				 {"tokens", r.tokens},
				 {"reused", r.reused},
				 {"failed", r.failed},
				 {"token_count_estimated", r.token_count_estimated},
				 {"text", r.text}});
		}
		nlohmann::json jr = {
			{"round", rec.round},
			{"controlled", rec.controlled},
			{"active", rec.active},
			{"majority", rec.majority},
			{"tokens", rec.tokens},
			{"prompt_tokens", rec.prompt_tokens},
			{"active_links", rec.active_links},
			{"responses", responses}};
		if (rec.controlled)
		{
			jr["weights"] = rec.weights.w;
			std::vector<std::string> tier_names;
			for (Tier t : rec.tiers) { tier_names.emplace_back(tier_name(t)); }
			jr["tiers"] = tier_names;
			jr["reward"] = reward_to_json(rec.reward);
		}
		rounds.push_back(std::move(jr));
	}
	return {
		{"task_id", tr.task_id},
		{"ground_truth", tr.ground_truth},
		{"n_agents", tr.n_agents},
		{"rounds", tr.rounds},
		{"final_answer", tr.final_answer},
		{"correct", tr.correct},
		{"total_tokens", tr.total_tokens},
		{"episode_reward", reward_to_json(tr.episode_rewards)},
		{"round_records", rounds}};
}

} // namespace madtopo
