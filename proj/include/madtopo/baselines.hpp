#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "madtopo/topology.hpp"

namespace madtopo {

// Fixed comparison topologies expressed as constant weight matrices: visible
// edges sit in the Critical tier (0.5), everything else below the visibility
// threshold (0.05). The low diagonal keeps every agent active every round.
enum class TopologyKind
{
	Full,
	Ring,
	Star,
	Group
};

struct StaticTopology {
	TopologyKind kind = TopologyKind::Full;
	int n = 0;
	int hub = 0;		// star only
	int group_size = 0; // group only

	void validate() const
	{
		if (n < 2) { throw std::invalid_argument("StaticTopology: n >= 2 required"); }
		if (kind == TopologyKind::Star && (hub < 0 || hub >= n))
		{
			throw std::invalid_argument("StaticTopology: hub out of range");
		}
		if (kind == TopologyKind::Group && group_size < 1)
		{
			throw std::invalid_argument("StaticTopology: group size >= 1 required");
		}
	}
};

inline WeightMatrix static_weights(const StaticTopology& topo)
{
	topo.validate();
	constexpr double kVisible = 0.5;
	constexpr double kHidden = 0.05;
	WeightMatrix w(topo.n, kHidden);
	auto visible = [&](int i, int j) -> bool {
		switch (topo.kind)
		{
			case TopologyKind::Full: return true;
			case TopologyKind::Ring:
			{
				const int d = std::abs(i - j);
				return d == 1 || d == topo.n - 1;
			}
			case TopologyKind::Star: return i == topo.hub || j == topo.hub;
			case TopologyKind::Group: return i / topo.group_size == j / topo.group_size;
		}
		return false;
	};
	for (int i = 0; i < topo.n; ++i)
	{
		for (int j = 0; j < topo.n; ++j)
		{
			if (i != j && visible(i, j)) { w.at(i, j) = kVisible; }
		}
	}
	return w;
}

inline StaticTopology parse_topology(const std::string& name, int n)
{
	StaticTopology t;
	t.n = n;
	if (name == "full") { t.kind = TopologyKind::Full; }
	else if (name == "ring") { t.kind = TopologyKind::Ring; }
	else if (name == "star") { t.kind = TopologyKind::Star; }
	else if (name.rfind("group:", 0) == 0)
	{
		t.kind = TopologyKind::Group;
		t.group_size = std::stoi(name.substr(6));
	}
	else { throw std::invalid_argument("parse_topology: unknown topology '" + name + "'"); }
	t.validate();
	return t;
}

} // namespace madtopo
