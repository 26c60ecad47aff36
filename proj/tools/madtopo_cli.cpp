// Command-line harness: train / eval / compare / debate / recompute.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "madtopo/harness.hpp"

namespace {

using namespace madtopo;

struct CommonArgs {
	std::string config_path;
	std::optional<std::uint64_t> seed;
	std::string checkpoint;
	std::string topology = "rumad";
	std::optional<int> budget;
	std::vector<std::string> ablate;
	std::string dataset;
	std::string out_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool need_config = true)
{
	auto* opt = cmd->add_option("--config", args.config_path, "run configuration JSON");
	if (need_config) { opt->required(); }
	cmd->add_option("--seed", args.seed, "override global seed");
	cmd->add_option("--checkpoint", args.checkpoint, "controller checkpoint JSON");
	cmd->add_option("--topology", args.topology, "rumad|full|ring|star|group:<k>");
	cmd->add_option("--budget", args.budget, "override soft communication budget B");
	cmd->add_option("--ablate", args.ablate, "ablation flag, repeatable")->take_all();
	cmd->add_option("--dataset", args.dataset, "override task JSONL path");
	cmd->add_option("--out", args.out_dir, "override output directory");
}

RunConfig resolve_config(const CommonArgs& args)
{
	RunConfig cfg = load_config(args.config_path);
	if (args.seed) { cfg.global_seed = *args.seed; }
	if (args.budget) { cfg.budget.budget = *args.budget; }
	if (!args.dataset.empty()) { cfg.dataset_path = args.dataset; }
	if (!args.out_dir.empty()) { cfg.output_dir = args.out_dir; }
	for (const auto& name : args.ablate) { cfg.ablations.set(name); }
	cfg.validate();
	return cfg;
}

int cmd_train(const CommonArgs& args)
{
	RunConfig cfg = resolve_config(args);
	const auto tasks = load_tasks(cfg.dataset_path);
	std::optional<Controller> resume;
	if (!args.checkpoint.empty()) { resume = Controller::load(args.checkpoint); }
	const TrainResult result = train(cfg, tasks, resume ? &*resume : nullptr);
	std::cout << "checkpoint: " << result.checkpoint_path << "\n"
			  << "best checkpoint: " << result.best_checkpoint_path << "\n"
			  << "training log: " << result.log_path << "\n"
			  << "mean reward (first 10 updates): " << result.first_updates_mean_reward << "\n"
			  << "mean reward (last 10 updates):  " << result.last_updates_mean_reward << "\n";
	return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& reference)
{
	RunConfig cfg = resolve_config(args);
	const auto tasks = load_tasks(cfg.dataset_path);
	std::optional<Controller> ctrl;
	if (!args.checkpoint.empty()) { ctrl = Controller::load(args.checkpoint); }
	const EvalResult result = evaluate(cfg, tasks, args.topology, ctrl ? &*ctrl : nullptr, reference);
	std::cout << "topology:  " << args.topology << "\n";
	std::printf("accuracy:  %.4f\n", result.metrics.accuracy);
	std::printf("tokens/task: %.1f (%.3fk)\n", result.metrics.mean_tokens, result.metrics.mean_tokens_k);
	if (result.metrics.cost_saving)
	{
		std::printf("cost saving: %.2f%%\n", *result.metrics.cost_saving * 100.0);
	}
	std::cout << "metrics:     " << result.metrics_path << "\n"
			  << "transcripts: " << result.transcripts_path << "\n";
	return 0;
}

int cmd_recompute(const std::string& transcripts, const std::string& metrics_path)
{
	nlohmann::json reported_j;
	{
		std::ifstream in(metrics_path);
		if (!in) { throw std::runtime_error("recompute: cannot open " + metrics_path); }
		in >> reported_j;
	}
	const Metrics reported = Metrics::from_json(reported_j);
	const Metrics recomputed = recompute_metrics(transcripts, reported.dataset);
	const bool match = recomputed.accuracy == reported.accuracy && recomputed.mean_tokens == reported.mean_tokens &&
		recomputed.n_tasks == reported.n_tasks;
	std::cout << "recomputed: " << recomputed.to_json().dump() << "\n";
	std::cout << (match ? "MATCH: metrics reproduce bit-exactly\n" : "MISMATCH: reported metrics diverge\n");
	return match ? 0 : 1;
}

int cmd_compare(const std::vector<std::string>& run_metrics)
{
	std::vector<Metrics> all;
	for (const auto& path : run_metrics)
	{
		std::ifstream in(path);
		if (!in) { throw std::runtime_error("compare: cannot open " + path); }
		nlohmann::json j;
		in >> j;
		all.push_back(Metrics::from_json(j));
	}
	for (const auto& m : all)
	{
		if (m.dataset != all.front().dataset)
		{
			throw std::runtime_error("compare: runs were evaluated on different datasets");
		}
	}
	std::printf("%-40s %8s %14s %12s\n", "run", "ACC", "tokens(k/task)", "saving");
	for (std::size_t k = 0; k < all.size(); ++k)
	{
		const Metrics& m = all[k];
		std::string saving = "N/A";
		if (k > 0 && all.front().mean_tokens > 0.0)
		{
			char buf[32];
			std::snprintf(buf, sizeof(buf), "%.2f%%", (1.0 - m.mean_tokens / all.front().mean_tokens) * 100.0);
			saving = buf;
		}
		std::printf("%-40s %7.1f%% %14.3f %12s\n", run_metrics[k].c_str(), m.accuracy * 100.0, m.mean_tokens_k, saving.c_str());
	}
	return 0;
}

int cmd_debate(const CommonArgs& args, const std::string& task_id, bool as_json)
{
	RunConfig cfg = resolve_config(args);
	const auto tasks = load_tasks(cfg.dataset_path);
	const DebateTask* task = nullptr;
	std::size_t task_index = 0;
	for (std::size_t k = 0; k < tasks.size(); ++k)
	{
		if (tasks[k].id == task_id)
		{
			task = &tasks[k];
			task_index = k;
			break;
		}
	}
	if (!task) { throw std::runtime_error("debate: unknown task id '" + task_id + "'"); }

	std::optional<Controller> ctrl;
	if (!args.checkpoint.empty()) { ctrl = Controller::load(args.checkpoint); }
	auto backend = make_backend(cfg);
	auto policy = make_policy(args.topology, ctrl ? &*ctrl : nullptr, cfg.n_agents, /*deterministic=*/true);
	if (auto* sim = dynamic_cast<SimBackend*>(backend.get()))
	{
		sim->reseed(episode_seeds(cfg.global_seed, task_index, cfg.n_agents));
	}
	Rng rng(cfg.global_seed);
	const EpisodeResult ep = run_episode(*task, *backend, *policy, episode_config(cfg), rng);

	if (as_json)
	{
		std::cout << transcript_to_json(ep.transcript).dump(2) << "\n";
		return 0;
	}
	std::cout << "Task " << task->id << ": " << task->question << "\n";
	for (const auto& rec : ep.transcript.round_records)
	{
		std::cout << "Round " << rec.round << ": ";
		std::string active;
		std::string reused;
		for (const auto& r : rec.responses)
		{
			std::string& bucket = r.reused ? reused : active;
			if (!bucket.empty()) { bucket += ", "; }
			bucket += std::to_string(r.agent);
		}
		std::cout << "generated {" << active << "} reused {" << reused << "}"
				  << " majority=" << (rec.majority.empty() ? "-" : rec.majority) << " tokens=" << rec.tokens;
		if (rec.controlled) { std::cout << " links=" << rec.active_links; }
		std::cout << "\n";
	}
	std::cout << "Final answer: " << ep.transcript.final_answer
			  << (ep.transcript.correct ? " (correct)" : " (incorrect)") << ", total tokens "
			  << ep.transcript.total_tokens << "\n";
	return 0;
}

} // namespace

int main(int argc, char** argv)
{
	CLI::App app{"Budget-aware multi-agent debate with a learned communication topology"};
	app.require_subcommand(1);

	CommonArgs train_args;
	auto* train_cmd = app.add_subcommand("train", "train the topology controller");
	add_common(train_cmd, train_args);

	CommonArgs eval_args;
	std::string reference;
	auto* eval_cmd = app.add_subcommand("eval", "evaluate a topology over a dataset");
	add_common(eval_cmd, eval_args);
	eval_cmd->add_option("--reference", reference, "reference metrics JSON for cost-saving");

	std::string rc_transcripts;
	std::string rc_metrics;
	auto* recompute_cmd = app.add_subcommand("recompute", "recompute metrics from persisted transcripts");
	recompute_cmd->add_option("--transcripts", rc_transcripts, "transcript JSONL")->required();
	recompute_cmd->add_option("--metrics", rc_metrics, "reported metrics JSON")->required();

	std::vector<std::string> compare_runs;
	auto* compare_cmd = app.add_subcommand("compare", "tabulate metrics across runs");
	compare_cmd->add_option("runs", compare_runs, "metrics JSON files; savings relative to the first")->required();

	CommonArgs debate_args;
	std::string task_id;
	bool debate_json = false;
	auto* debate_cmd = app.add_subcommand("debate", "pretty-print a single episode");
	add_common(debate_cmd, debate_args);
	debate_cmd->add_option("--task", task_id, "task id")->required();
	debate_cmd->add_flag("--json", debate_json, "emit the raw transcript JSON");

	CLI11_PARSE(app, argc, argv);

	try
	{
		if (train_cmd->parsed()) { return cmd_train(train_args); }
		if (eval_cmd->parsed()) { return cmd_eval(eval_args, reference); }
		if (recompute_cmd->parsed()) { return cmd_recompute(rc_transcripts, rc_metrics); }
		if (compare_cmd->parsed()) { return cmd_compare(compare_runs); }
		if (debate_cmd->parsed()) { return cmd_debate(debate_args, task_id, debate_json); }
	}
	catch (const std::exception& e)
	{
		std::cerr << "error: " << e.what() << "\n";
		return 1;
	}
	return 0;
}
