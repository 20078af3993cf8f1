#pragma once

#include "netlist.hpp"
#include "sim.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>

namespace tromux {

// Per-net worst slack from single-corner STA. Startpoints are PIs and FF
// outputs (FF clock-to-output delay applies), endpoints are POs and FF data
// inputs, required time is the clock period everywhere. worst_slack(n) is the
// minimum, over all endpoints reachable through n, of required - arrival,
// which equals the min over enumerated paths through n. Nets reaching no
// endpoint are uncovered.
struct TimingReport {
	double clock_period = 0;
	std::map<std::string, std::optional<double>> worst_slack; // nullopt: uncovered
	double wns = 0; // min over covered nets
	double tns = 0; // sum of negative endpoint slacks

	bool covered(const std::string &net) const { return slack_of(net).has_value(); }

	std::optional<double> slack_of(const std::string &net) const
	{
		auto it = worst_slack.find(net);
		if (it == worst_slack.end())
			fail(errc::validation, "UnknownNet", "no such net in timing report: '" + net + "'");
		return it->second;
	}
};

inline TimingReport run_sta(const Netlist &n, const CellLibrary &lib, double clock_period,
			    const std::map<std::string, double> &extra_delay = {})
{
	NetlistIndex idx(n, lib);
	TimingReport rep;
	rep.clock_period = clock_period;

	auto extra = [&](const std::string &net) {
		auto it = extra_delay.find(net);
		return it == extra_delay.end() ? 0.0 : it->second;
	};

	std::map<std::string, double> arrival;
	for (const auto &pi : n.pis)
		arrival[pi] = extra(pi);
	for (int ci : idx.ff_cells())
		for (const auto &out : n.cells[ci].outs)
			arrival[out] = lib.at(n.cells[ci].type).delay + extra(out);
	for (int ci : idx.topo_order()) {
		const auto &c = n.cells[ci];
		double in_max = 0;
		for (const auto &in : c.ins)
			in_max = std::max(in_max, arrival.at(in));
		for (const auto &out : c.outs)
			arrival[out] = in_max + lib.at(c.type).delay + extra(out);
	}

	constexpr double inf = std::numeric_limits<double>::infinity();
	std::map<std::string, double> required;
	for (const auto &net : idx.nets())
		required[net] = inf;
	auto relax = [&](const std::string &net, double req) {
		required[net] = std::min(required[net], req);
	};
	for (const auto &po : n.pos)
		relax(po, clock_period);
	for (int ci : idx.ff_cells())
		for (const auto &in : n.cells[ci].ins)
			relax(in, clock_period);
	const auto &topo = idx.topo_order();
	for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
		const auto &c = n.cells[*it];
		double out_min = inf;
		for (const auto &out : c.outs)
			out_min = std::min(out_min, required.at(out) - extra(out));
		double req = out_min - lib.at(c.type).delay;
		for (const auto &in : c.ins)
			relax(in, req);
	}

	bool any_covered = false;
	for (const auto &net : idx.nets()) {
		if (required.at(net) == inf) {
			rep.worst_slack[net] = std::nullopt;
			continue;
		}
		rep.worst_slack[net] = required.at(net) - arrival.at(net);
		rep.wns = any_covered ? std::min(rep.wns, *rep.worst_slack[net]) : *rep.worst_slack[net];
		any_covered = true;
	}
	if (!any_covered)
		rep.wns = 0;

	// TNS over endpoint instances: each PO once, each FF data pin once
	for (const auto &po : n.pos)
		rep.tns += std::min(0.0, clock_period - arrival.at(po));
	for (int ci : idx.ff_cells())
		for (const auto &in : n.cells[ci].ins)
			rep.tns += std::min(0.0, clock_period - arrival.at(in));
	return rep;
}

// Fall-back slack for nets no timing path covers; kept close to the average
// negative slack seen in practice and exposed as a knob.
inline constexpr double kUncoveredSlackFallback = -0.5;

inline double min_slack(const std::string &net, const TimingReport &rep,
			double fallback = kUncoveredSlackFallback)
{
	auto s = rep.slack_of(net);
	return s.has_value() ? *s : fallback;
}

// netScore(n) = sigmoid(2 * MS(n)) / (TPC(n) + 1e-3): prefers cells with
// timing headroom driving low-toggle nets. The 1e-3 margin keeps the score
// finite for constant nets and bounds the controllability term.
inline double net_score(const std::string &net, const TimingReport &rep, const ToggleProfile &profile,
			double fallback = kUncoveredSlackFallback)
{
	double ms = min_slack(net, rep, fallback);
	double tpc = profile.at(net);
	return 1.0 / (1.0 + std::exp(-2.0 * ms)) * (1.0 / (tpc + 1e-3));
}

// Sum over the cell's output nets, so multi-output cells (FFs with Q and QN)
// aggregate both.
inline double cell_score(const Netlist::Cell &cell, const TimingReport &rep, const ToggleProfile &profile,
			 double fallback = kUncoveredSlackFallback)
{
	double score = 0;
	for (const auto &out : cell.outs)
		score += net_score(out, rep, profile, fallback);
	return score;
}

struct ScoreTable {
	std::map<std::string, double> net_scores;
	std::map<std::string, double> cell_scores;
};

inline ScoreTable score_all(const Netlist &n, const CellLibrary &lib, const TimingReport &rep,
			    const ToggleProfile &profile)
{
	ScoreTable t;
	NetlistIndex idx(n, lib);
	for (const auto &net : idx.nets())
		t.net_scores[net] = net_score(net, rep, profile);
	for (const auto &c : n.cells)
		t.cell_scores[c.name()] = cell_score(c, rep, profile);
	return t;
}

} // namespace tromux
