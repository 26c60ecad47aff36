#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace madtopo {

// Reasoning embedding with cached Euclidean norm. Dimension is set by the
// embedding backend and must be identical across agents within an episode.
struct Embedding {
	std::vector<double> v;
	double norm = 0.0;

	Embedding() = default;
	explicit Embedding(std::vector<double> values) : v(std::move(values))
	{
		double s = 0.0;
		for (double x : v) { s += x * x; }
		norm = std::sqrt(s);
	}
};

struct SimilarityConfig {
	double lambda = 0.5; // blend between cosine and answer agreement

	void validate() const
	{
		if (!(lambda >= 0.0 && lambda <= 1.0))
		{
			throw std::invalid_argument("SimilarityConfig: lambda outside [0,1]");
		}
	}
};

struct SimilarityMatrix {
	int n = 0;
	std::vector<double> s; // row-major

	double at(int i, int j) const { return s[static_cast<std::size_t>(i) * n + j]; }
	double& at(int i, int j) { return s[static_cast<std::size_t>(i) * n + j]; }
};

// Raw cosine clamped into [0,1] so every similarity entry lands in the
// controller's contracted range.
inline double cosine_similarity(const Embedding& a, const Embedding& b)
{
	if (a.v.size() != b.v.size())
	{
		throw std::invalid_argument("cosine_similarity: dimension mismatch");
	}
	if (a.norm <= 0.0 || b.norm <= 0.0)
	{
		throw std::domain_error("cosine_similarity: degenerate zero-norm embedding");
	}
	double dot = 0.0;
	for (std::size_t k = 0; k < a.v.size(); ++k) { dot += a.v[k] * b.v[k]; }
	const double raw = dot / (a.norm * b.norm);
	if (raw < 0.0) { return 0.0; }
	if (raw > 1.0) { return 1.0; }
	return raw;
}

// s(i,j) = lambda * cos(r_i, r_j) + (1 - lambda) * [answer_i == answer_j],
// diagonal forced to 1.
inline SimilarityMatrix pairwise_similarity(
	const std::vector<Embedding>& embeddings, const std::vector<std::string>& answers, const SimilarityConfig& cfg)
{
	cfg.validate();
	const int n = static_cast<int>(embeddings.size());
	if (n < 2 || answers.size() != embeddings.size())
	{
		throw std::invalid_argument("pairwise_similarity: need equal-length lists, n >= 2");
	}
	SimilarityMatrix m;
	m.n = n;
	m.s.assign(static_cast<std::size_t>(n) * n, 0.0);
	for (int i = 0; i < n; ++i)
	{
		m.at(i, i) = 1.0;
		for (int j = i + 1; j < n; ++j)
		{
			const double cos_ij = cosine_similarity(embeddings[i], embeddings[j]);
			const double agree = (answers[i] == answers[j]) ? 1.0 : 0.0;
			const double sim = cfg.lambda * cos_ij + (1.0 - cfg.lambda) * agree;
			m.at(i, j) = sim;
			m.at(j, i) = sim;
		}
	}
	return m;
}

// Mean over all unordered off-diagonal pairs; used by the consensus reward.
inline double mean_pairwise_similarity(const SimilarityMatrix& m)
{
	if (m.n < 2) { throw std::invalid_argument("mean_pairwise_similarity: n >= 2 required"); }
	double sum = 0.0;
	int pairs = 0;
	for (int i = 0; i < m.n; ++i)
	{
		for (int j = i + 1; j < m.n; ++j)
		{
			sum += m.at(i, j);
			++pairs;
		}
	}
	return sum / pairs;
}

using Observation = std::vector<double>;

// Row-major flattening; values untouched. The controller's input type.
inline Observation build_observation(const SimilarityMatrix& m)
{
	if (m.n <= 0 || m.s.size() != static_cast<std::size_t>(m.n) * m.n)
	{
		throw std::invalid_argument("build_observation: invalid similarity matrix");
	}
	return m.s;
}

} // namespace madtopo
