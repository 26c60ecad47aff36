#pragma once

#include <chrono>
#include <cstdlib>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "madtopo/agents.hpp"
#include "madtopo/observation.hpp"

namespace madtopo {

enum class HttpErrorKind
{
	Transport,	 // connection/timeout
	RateLimited, // 429
	Status,		 // other >= 400
	Malformed	 // JSON shape
};

class HttpError : public std::runtime_error {
public:
	HttpError(HttpErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
	HttpErrorKind kind() const { return kind_; }

private:
	HttpErrorKind kind_;
};

struct GenerateResult {
	std::string text;
	long completion_tokens = 0;
	bool token_count_estimated = false; // usage field missing, whitespace fallback used
};

struct RetryPolicy {
	int max_retries = 2;
	std::chrono::milliseconds base_backoff{200};
};

// Whitespace token estimate used when the server omits usage.
inline long estimate_tokens(const std::string& text)
{
	std::istringstream ss(text);
	long count = 0;
	std::string tok;
	while (ss >> tok) { ++count; }
	return count;
}

// Synchronous client for OpenAI-compatible /chat/completions and
// /embeddings endpoints. Fan-out concurrency is the caller's concern.
class HttpAgentClient {
public:
	explicit HttpAgentClient(RetryPolicy retry = {}) : retry_(retry) {}

	GenerateResult generate(const AgentSpec& spec, const std::string& system_prompt, const std::string& user_prompt) const
	{
		nlohmann::json body = {
			{"model", spec.model},
			{"messages",
			 {{{"role", "system"}, {"content", system_prompt}}, {{"role", "user"}, {"content", user_prompt}}}},
			{"temperature", spec.temperature},
			{"max_tokens", spec.max_tokens}};
		const nlohmann::json resp = post_json(spec, "/chat/completions", body);
		GenerateResult result;
		try
		{
			result.text = resp.at("choices").at(0).at("message").at("content").get<std::string>();
		}
		catch (const nlohmann::json::exception& e)
		{
			throw HttpError(HttpErrorKind::Malformed, std::string("chat response shape: ") + e.what());
		}
		if (resp.contains("usage") && resp["usage"].contains("completion_tokens"))
		{
			result.completion_tokens = resp["usage"]["completion_tokens"].get<long>();
		}
		else
		{
			result.completion_tokens = estimate_tokens(result.text);
			result.token_count_estimated = true;
		}
		return result;
	}

	Embedding embed(const AgentSpec& spec, const std::string& model, const std::string& text) const
	{
		const nlohmann::json body = {{"model", model}, {"input", text}};
		const nlohmann::json resp = post_json(spec, "/embeddings", body);
		try
		{
			return Embedding(resp.at("data").at(0).at("embedding").get<std::vector<double>>());
		}
		catch (const nlohmann::json::exception& e)
		{
			throw HttpError(HttpErrorKind::Malformed, std::string("embedding response shape: ") + e.what());
		}
	}

private:
	nlohmann::json post_json(const AgentSpec& spec, const std::string& path, const nlohmann::json& body) const
	{
		httplib::Client client(spec.endpoint);
		client.set_connection_timeout(10);
		client.set_read_timeout(120);
		httplib::Headers headers;
		if (!spec.auth_env.empty())
		{
			if (const char* token = std::getenv(spec.auth_env.c_str()))
			{
				headers.emplace("Authorization", std::string("Bearer ") + token);
			}
		}
		const std::string payload = body.dump();

		HttpErrorKind last_kind = HttpErrorKind::Transport;
		std::string last_what = "no attempt made";
		for (int attempt = 0; attempt <= retry_.max_retries; ++attempt)
		{
			if (attempt > 0)
			{
				std::this_thread::sleep_for(retry_.base_backoff * (1 << (attempt - 1)));
			}
			auto res = client.Post(path, headers, payload, "application/json");
			if (!res)
			{
				last_kind = HttpErrorKind::Transport;
				last_what = "transport failure: " + httplib::to_string(res.error());
				continue;
			}
			if (res->status == 429)
			{
				last_kind = HttpErrorKind::RateLimited;
				last_what = "rate limited (429)";
				continue;
			}
			if (res->status >= 400)
			{
				last_kind = HttpErrorKind::Status;
				last_what = "http status " + std::to_string(res->status);
				continue;
			}
			try
			{
				return nlohmann::json::parse(res->body);
			}
			catch (const nlohmann::json::exception& e)
			{
				last_kind = HttpErrorKind::Malformed;
				last_what = std::string("malformed JSON body: ") + e.what();
				continue;
			}
		}
		throw HttpError(last_kind, last_what + " after " + std::to_string(retry_.max_retries + 1) + " attempts");
	}

	RetryPolicy retry_;
};

} // namespace madtopo
