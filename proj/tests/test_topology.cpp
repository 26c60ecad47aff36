#include <catch2/catch_amalgamated.hpp>

#include "madtopo/rng.hpp"
#include "madtopo/topology.hpp"

using namespace madtopo;

TEST_CASE("weight matrix validates shape and open-interval entries")
{
	WeightMatrix w(3, 0.5);
	REQUIRE_NOTHROW(w.validate());

	w.at(1, 2) = 0.0;
	REQUIRE_THROWS_AS(w.validate(), std::invalid_argument);
	w.at(1, 2) = 1.0;
	REQUIRE_THROWS_AS(w.validate(), std::invalid_argument);
	w.at(1, 2) = 0.999999;
	REQUIRE_NOTHROW(w.validate());

	WeightMatrix bad;
	bad.n = 2;
	bad.w = {0.5, 0.5, 0.5}; // wrong length
	REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("tier quantization boundaries are strict and ties fall downward")
{
	REQUIRE(quantize_weight(0.41) == Tier::Critical);
	REQUIRE(quantize_weight(0.40) == Tier::Reference);
	REQUIRE(quantize_weight(0.26) == Tier::Reference);
	REQUIRE(quantize_weight(0.25) == Tier::Background);
	REQUIRE(quantize_weight(0.11) == Tier::Background);
	REQUIRE(quantize_weight(0.10) == Tier::Invisible);
	REQUIRE(quantize_weight(0.001) == Tier::Invisible);
	REQUIRE(quantize_weight(0.999) == Tier::Critical);
}

TEST_CASE("tier tags match prompt syntax and invisible is omitted")
{
	REQUIRE(tier_tag(Tier::Critical) == "[Critical]");
	REQUIRE(tier_tag(Tier::Reference) == "[Reference]");
	REQUIRE(tier_tag(Tier::Background) == "[Background]");
	REQUIRE(tier_tag(Tier::Invisible).empty());
}

TEST_CASE("diagonal entries are invisible regardless of weight")
{
	WeightMatrix w(3, 0.2);
	w.at(0, 0) = 0.9;
	w.at(1, 1) = 0.5;
	w.at(2, 2) = 0.15;
	const auto tiers = quantize_tiers(w);
	for (int i = 0; i < 3; ++i) { REQUIRE(tiers[static_cast<std::size_t>(i) * 3 + i] == Tier::Invisible); }
	REQUIRE(tiers[1] == Tier::Background); // (0,1) = 0.2
}

TEST_CASE("mean external influence excludes the diagonal")
{
	WeightMatrix w(3, 0.5);
	w.at(1, 0) = 0.2;
	w.at(1, 1) = 0.9; // must not enter the mean
	w.at(1, 2) = 0.6;
	REQUIRE(mean_external_influence(w, 1) == Catch::Approx(0.4).margin(1e-15));

	WeightMatrix single(1, 0.5);
	REQUIRE_THROWS_AS(mean_external_influence(single, 0), std::domain_error);
	REQUIRE_THROWS_AS(mean_external_influence(w, 3), std::out_of_range);
}

TEST_CASE("activation: equality activates, strictly-below prunes")
{
	WeightMatrix w(2, 0.5);
	// mean external influence on agent 0 is w(0,1) = 0.5, threshold w(0,0)
	w.at(0, 0) = 0.5;
	REQUIRE(compute_activation(w).active[0]);
	w.at(0, 0) = 0.5 + 1e-12;
	REQUIRE_FALSE(compute_activation(w).active[0]);
	w.at(0, 0) = 0.5 - 1e-12;
	REQUIRE(compute_activation(w).active[0]);
}

TEST_CASE("active link count ignores self-edges and uses a strict threshold")
{
	BudgetConfig cfg;
	cfg.delta = 0.10;
	WeightMatrix w(3, 0.10); // exactly at delta: not active
	REQUIRE(count_active_links(w, cfg) == 0);
	w.at(0, 1) = 0.10 + 1e-12;
	REQUIRE(count_active_links(w, cfg) == 1);
	w.at(2, 2) = 0.99; // diagonal never counts
	REQUIRE(count_active_links(w, cfg) == 1);
}

TEST_CASE("budget penalty is a hinge at B")
{
	BudgetConfig cfg;
	cfg.budget = 12;
	REQUIRE(budget_penalty(0, cfg) == 0.0);
	REQUIRE(budget_penalty(12, cfg) == 0.0);
	REQUIRE(budget_penalty(13, cfg) == 1.0);
	REQUIRE(budget_penalty(30, cfg) == 18.0);
	REQUIRE_THROWS_AS(budget_penalty(-1, cfg), std::invalid_argument);
}

TEST_CASE("random sweep: quantization, counts, and activation agree with direct definitions")
{
	Rng rng(123);
	BudgetConfig cfg;
	for (int trial = 0; trial < 200; ++trial)
	{
		const int n = 2 + static_cast<int>(rng.uniform_int(5));
		WeightMatrix w(n, 0.5);
		for (double& v : w.w) { v = rng.uniform(); }
		w.validate();

		int links = 0;
		for (int i = 0; i < n; ++i)
		{
			for (int j = 0; j < n; ++j)
			{
				if (i != j && w.at(i, j) > cfg.delta) { ++links; }
			}
		}
		REQUIRE(count_active_links(w, cfg) == links);

		const auto mask = compute_activation(w);
		for (int i = 0; i < n; ++i)
		{
			double sum = 0.0;
			for (int j = 0; j < n; ++j)
			{
				if (j != i) { sum += w.at(i, j); }
			}
			REQUIRE(mask.active[i] == (sum / (n - 1) >= w.at(i, i)));
		}
	}
}
