#pragma once

#include "library.hpp"

#include <algorithm>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace tromux {

// Reserved prefix for cells/nets inserted by the locking passes. Anything
// carrying this prefix is locking infrastructure and must never be locked
// again or used to train attack statistics.
inline constexpr const char *kTmxPrefix = "__tmx_";

inline bool is_tmx_name(const std::string &name)
{
	return name.rfind(kTmxPrefix, 0) == 0;
}

// Gate-level netlist. A cell is identified by its first output net; nets are
// identified by name and have exactly one driver (a PI or a cell output).
// Instances are immutable from the analyses' point of view; transformation
// passes copy and rewire.
class Netlist {
      public:
	struct Cell {
		std::string type;
		std::vector<std::string> ins;
		std::vector<std::string> outs;

		const std::string &name() const { return outs.front(); }
	};

	std::vector<Cell> cells;
	std::vector<std::string> pis;
	std::vector<std::string> pos;
	std::string clock = "clk"; // single implicit clock domain

	size_t n_cells() const { return cells.size(); }

	const Cell *find_cell(const std::string &name) const
	{
		for (const auto &c : cells)
			if (c.name() == name)
				return &c;
		return nullptr;
	}

	Cell *find_cell(const std::string &name)
	{
		for (auto &c : cells)
			if (c.name() == name)
				return &c;
		return nullptr;
	}
};

struct NetRef {
	int cell = -1; // -1: primary input
	int pin = 0;
};

// Derived adjacency for one netlist snapshot. Rebuild after any rewiring.
class NetlistIndex {
      public:
	NetlistIndex(const Netlist &n, const CellLibrary &lib) : n_(&n), lib_(&lib) { build(); }

	const std::vector<std::string> &nets() const { return nets_; }

	bool has_net(const std::string &net) const { return driver_.count(net) != 0; }

	void require_net(const std::string &net) const
	{
		if (!has_net(net))
			fail(errc::validation, "UnknownNet", "no such net '" + net + "'");
	}

	// driver.cell == -1 means the net is a primary input
	NetRef driver(const std::string &net) const
	{
		require_net(net);
		return driver_.at(net);
	}

	const std::vector<NetRef> &sinks(const std::string &net) const
	{
		require_net(net);
		static const std::vector<NetRef> empty;
		auto it = sinks_.find(net);
		return it == sinks_.end() ? empty : it->second;
	}

	bool is_po(const std::string &net) const { return pos_.count(net) != 0; }

	bool cell_is_ff(int cell) const { return ff_.at(cell); }

	// combinational cells in evaluation order (FFs excluded)
	const std::vector<int> &topo_order() const { return topo_; }

	const std::vector<int> &ff_cells() const { return ff_cells_; }

	// Transitive fan-in or fan-out net cone of `net`, excluding the net
	// itself. `through_ff` controls whether the walk crosses FF boundaries
	// (timing cones stop, structural reachability crosses).
	enum class Dir { fanin, fanout };

	std::set<std::string> cone(const std::string &net, Dir dir, bool through_ff) const
	{
		require_net(net);
		std::set<std::string> out;
		std::vector<std::string> work{net};
		std::unordered_set<std::string> seen{net};
		while (!work.empty()) {
			std::string cur = work.back();
			work.pop_back();
			std::vector<std::string> next;
			if (dir == Dir::fanout) {
				for (const NetRef &s : sinks(cur)) {
					const auto &c = n_->cells[s.cell];
					if (!through_ff && ff_[s.cell])
						continue;
					for (const auto &o : c.outs)
						next.push_back(o);
				}
			} else {
				NetRef d = driver_.at(cur);
				if (d.cell >= 0 && (through_ff || !ff_[d.cell]))
					for (const auto &i : n_->cells[d.cell].ins)
						next.push_back(i);
			}
			for (auto &m : next) {
				if (seen.insert(m).second) {
					out.insert(m);
					work.push_back(m);
				}
			}
		}
		return out;
	}

      private:
	void build()
	{
		const Netlist &n = *n_;
		for (const auto &pi : n.pis) {
			if (!driver_.emplace(pi, NetRef{-1, 0}).second)
				fail(errc::validation, "MultipleDrivers", "net '" + pi + "' declared more than once");
			nets_.push_back(pi);
		}
		ff_.resize(n.cells.size());
		for (int ci = 0; ci < (int)n.cells.size(); ++ci) {
			const auto &c = n.cells[ci];
			const CellType &t = lib_->at(c.type);
			ff_[ci] = t.kind == CellKind::Ff;
			if ((int)c.ins.size() != t.arity)
				fail(errc::validation, "ArityMismatch",
				     "cell '" + c.name() + "' has " + std::to_string(c.ins.size()) +
					 " inputs, type '" + c.type + "' expects " + std::to_string(t.arity));
			if ((int)c.outs.size() != t.outputs)
				fail(errc::validation, "ArityMismatch",
				     "cell '" + c.name() + "' output count does not match type '" + c.type + "'");
			for (int pin = 0; pin < (int)c.outs.size(); ++pin) {
				if (!driver_.emplace(c.outs[pin], NetRef{ci, pin}).second)
					fail(errc::validation, "MultipleDrivers",
					     "net '" + c.outs[pin] + "' has more than one driver");
				nets_.push_back(c.outs[pin]);
			}
			if (ff_[ci])
				ff_cells_.push_back(ci);
		}
		for (int ci = 0; ci < (int)n.cells.size(); ++ci) {
			const auto &c = n.cells[ci];
			for (int pin = 0; pin < (int)c.ins.size(); ++pin) {
				if (!driver_.count(c.ins[pin]))
					fail(errc::validation, "UndefinedNet",
					     "cell '" + c.name() + "' reads undriven net '" + c.ins[pin] + "'");
				sinks_[c.ins[pin]].push_back(NetRef{ci, pin});
			}
		}
		for (const auto &po : n.pos) {
			if (!driver_.count(po))
				fail(errc::validation, "UndefinedNet", "output '" + po + "' is never driven");
			pos_.insert(po);
		}
		topo_sort();
	}

	// Kahn order over combinational cells; FF outputs act as sources.
	void topo_sort()
	{
		const Netlist &n = *n_;
		std::vector<int> pending(n.cells.size(), 0);
		for (int ci = 0; ci < (int)n.cells.size(); ++ci) {
			if (ff_[ci])
				continue;
			for (const auto &in : n.cells[ci].ins) {
				NetRef d = driver_.at(in);
				if (d.cell >= 0 && !ff_[d.cell])
					++pending[ci];
			}
		}
		std::vector<int> ready;
		for (int ci = 0; ci < (int)n.cells.size(); ++ci)
			if (!ff_[ci] && pending[ci] == 0)
				ready.push_back(ci);
		size_t head = 0;
		while (head < ready.size()) {
			int ci = ready[head++];
			topo_.push_back(ci);
			for (const auto &out : n.cells[ci].outs) {
				auto it = sinks_.find(out);
				if (it == sinks_.end())
					continue;
				for (const NetRef &s : it->second)
					if (!ff_[s.cell] && --pending[s.cell] == 0)
						ready.push_back(s.cell);
			}
		}
		size_t comb = 0;
		for (int ci = 0; ci < (int)n.cells.size(); ++ci)
			if (!ff_[ci])
				++comb;
		if (topo_.size() != comb)
			fail(errc::validation, "CombinationalCycle",
			     "netlist contains a combinational cycle (a cycle not broken by an FF)");
	}

	const Netlist *n_;
	const CellLibrary *lib_;
	std::unordered_map<std::string, NetRef> driver_;
	std::unordered_map<std::string, std::vector<NetRef>> sinks_;
	std::unordered_set<std::string> pos_;
	std::vector<std::string> nets_;
	std::vector<bool> ff_;
	std::vector<int> ff_cells_;
	std::vector<int> topo_;
};

// Full invariant check; throws on the first violation.
inline void validate(const Netlist &n, const CellLibrary &lib)
{
	NetlistIndex idx(n, lib); // driver/undefined/cycle/arity checks happen here
	(void)idx;
}

inline std::set<std::string> cone(const Netlist &n, const CellLibrary &lib, const std::string &net,
				  NetlistIndex::Dir dir, bool through_ff = false)
{
	return NetlistIndex(n, lib).cone(net, dir, through_ff);
}

} // namespace tromux
