#pragma once

#include "layout.hpp"
#include "netlist.hpp"
#include "sim.hpp"
#include "timing.hpp"

#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace tromux {

// tromux: configuration and key bit drawn uniformly at random per instance.
// naive: deliberately weak calibration baseline -- configuration 1 always,
// so key bits are all 0 and the true path always sits on MUX input 0.
enum class Scheme { tromux, naive };

inline const char *to_string(Scheme s)
{
	return s == Scheme::tromux ? "tromux" : "naive";
}

// One key-gate instance: the locked gate (kept or swapped with its
// complement), an inverter on its output unless the FF provides Q and QN
// directly, and a 2:1 MUX whose select is one key bit. The MUX output takes
// over the original net, so every sink and PO is untouched.
//
// Simple gates and single-output FFs draw from four configurations,
// two-output FFs from two (Q/QN order); the key bit is the one that makes the
// MUX reproduce the original function:
//   1: keep type,  MUX(raw, inv),  key 0      3: swap type, MUX(inv, raw), key 0
//   2: keep type,  MUX(inv, raw),  key 1      4: swap type, MUX(raw, inv), key 1
struct TroMuxRecord {
	std::string locked_cell; // original cell name == the net the MUX now drives
	std::string original_type;
	std::string implemented_type;
	std::string mux_cell;
	std::optional<std::string> inv_cell; // absent for Q/QN FFs
	int key_index = -1;
	int key_bit = 0;
	int config = 0;
};

struct LockingConfig {
	int alpha = 3;				// Eq-style timing budget, in sites
	std::optional<double> sigma;		// locking delay; default delay(INV) + delay(MUX2)
	std::uint64_t key_seed = 1;
	double clock_period = 1.0;
	double tpc_threshold = 0.1;
	int cycles = 10000;
	std::uint64_t sim_seed = 1;
	Scheme scheme = Scheme::tromux;
	bool self_check = true;
	std::uint64_t eq_budget = 10000;

	double sigma_or_default(const CellLibrary &lib) const
	{
		return sigma ? *sigma : lib.inv().delay + lib.mux2().delay;
	}
};

// Key length that fills the given number of open sites: every key bit costs
// one INV, one MUX, one keychain FF, plus alpha sites of timing budget.
inline int key_length(long long open_sites, const CellLibrary &lib, int alpha)
{
	if (open_sites < 0)
		fail(errc::semantic, "BadSiteCount", "open site count must be >= 0");
	if (alpha < 0)
		fail(errc::semantic, "BadAlpha", "alpha must be >= 0");
	long long denom = lib.inv().width + lib.mux2().width + lib.ff().width + alpha;
	return (int)(open_sites / denom);
}

inline bool is_locking_infrastructure(const Netlist::Cell &c)
{
	for (const auto &net : c.outs)
		if (is_tmx_name(net))
			return true;
	for (const auto &net : c.ins)
		if (is_tmx_name(net))
			return true;
	return false;
}

namespace detail {

// Verifies the invariant that makes the scheme work: with the recorded key
// bit the MUX output equals the original function on every input pattern,
// and the flipped bit complements it.
inline void check_instance_function(const CellType &orig, const CellType &impl, bool inv_on_in0, int key_bit)
{
	std::vector<std::uint64_t> t_orig, t_impl;
	int arity;
	if (orig.kind == CellKind::Ff) {
		arity = 1;
		t_orig = {2}; // Q over state {0,1}
		t_impl = {2};
	} else {
		arity = orig.arity;
		t_orig = truth_table(orig.function, arity);
		t_impl = truth_table(impl.function, arity);
	}
	size_t patterns = size_t(1) << arity;
	for (size_t w = 0; w < t_orig.size(); ++w) {
		std::uint64_t mask = ~0ull;
		if ((w + 1) * 64 > patterns)
			mask = (1ull << (patterns % 64)) - 1;
		std::uint64_t raw = t_impl[w], inv = ~t_impl[w];
		std::uint64_t in0 = inv_on_in0 ? inv : raw;
		std::uint64_t in1 = inv_on_in0 ? raw : inv;
		std::uint64_t with_key = key_bit ? in1 : in0;
		std::uint64_t with_flip = key_bit ? in0 : in1;
		if ((with_key & mask) != (t_orig[w] & mask) || (with_flip & mask) != (~t_orig[w] & mask))
			fail(errc::internal, "LockSelfCheck",
			     "key-gate instance does not reproduce '" + orig.name + "'");
	}
}

inline TroMuxRecord lock_cell_inplace(Netlist &n, const std::string &cell_name, const CellLibrary &lib,
				      std::mt19937_64 &rng, int key_index, Scheme scheme)
{
	Netlist::Cell *cell = n.find_cell(cell_name);
	if (!cell)
		fail(errc::semantic, "UnknownCell", "no cell named '" + cell_name + "'");
	if (is_tmx_name(cell_name))
		fail(errc::semantic, "UnsupportedType", "'" + cell_name + "' is locking infrastructure");
	if (is_locking_infrastructure(*cell))
		fail(errc::semantic, "AlreadyLocked", "'" + cell_name + "' is already locked");
	const CellType &orig = lib.at(cell->type);
	if (!lib.lockable(cell->type))
		fail(errc::semantic, "UnsupportedType",
		     "'" + cell_name + "' has type '" + cell->type + "' which is not directly lockable");

	const std::string select = std::string(kTmxPrefix) + "key_" + std::to_string(key_index);
	const std::string raw = std::string(kTmxPrefix) + "raw_" + cell_name;

	TroMuxRecord rec;
	rec.locked_cell = cell_name;
	rec.original_type = orig.name;
	rec.key_index = key_index;
	rec.mux_cell = cell_name;

	if (orig.kind == CellKind::Ff && orig.outputs == 2) {
		// Q/QN form: MUX picks between the two FF outputs directly
		int config = (scheme == Scheme::naive) ? 1 : 1 + (int)(rng() & 1);
		const std::string qn = cell->outs[1];
		cell->outs[0] = raw;
		Netlist::Cell mux;
		mux.type = lib.mux2().name;
		mux.outs = {cell_name};
		mux.ins = config == 1 ? std::vector<std::string>{raw, qn, select}
				      : std::vector<std::string>{qn, raw, select};
		n.cells.push_back(std::move(mux));
		rec.implemented_type = orig.name;
		rec.config = config;
		rec.key_bit = config == 1 ? 0 : 1;
		check_instance_function(orig, orig, config == 2, rec.key_bit);
	} else {
		int config = (scheme == Scheme::naive) ? 1 : 1 + (int)(rng() & 3);
		bool is_ff = orig.kind == CellKind::Ff;
		// FFs have no complement counterpart: draws 3/4 keep the type
		// and collapse onto the two MUX input orders, preserving the
		// uniform key distribution.
		bool swap = config >= 3 && !is_ff;
		const CellType &impl = swap ? lib.at(*orig.complement) : orig;
		bool inv_on_in0 = is_ff ? (config % 2 == 0) : (config == 2 || config == 3);
		const std::string invn = std::string(kTmxPrefix) + "inv_" + cell_name;

		cell->type = impl.name;
		cell->outs[0] = raw;
		Netlist::Cell invc;
		invc.type = lib.inv().name;
		invc.outs = {invn};
		invc.ins = {raw};
		Netlist::Cell mux;
		mux.type = lib.mux2().name;
		mux.outs = {cell_name};
		mux.ins = inv_on_in0 ? std::vector<std::string>{invn, raw, select}
				     : std::vector<std::string>{raw, invn, select};
		n.cells.push_back(std::move(invc));
		n.cells.push_back(std::move(mux));
		rec.implemented_type = impl.name;
		rec.inv_cell = invn;
		rec.config = config;
		rec.key_bit = (config == 2 || config == 4) ? 1 : 0;
		check_instance_function(orig, impl, inv_on_in0, rec.key_bit);
	}

	n.pis.push_back(select); // exposed until the keychain is built
	return rec;
}

} // namespace detail

inline std::pair<Netlist, TroMuxRecord> lock_cell(const Netlist &n, const std::string &cell_name,
						  const CellLibrary &lib, std::mt19937_64 &rng,
						  int key_index = 0, Scheme scheme = Scheme::tromux)
{
	Netlist out = n;
	TroMuxRecord rec = detail::lock_cell_inplace(out, cell_name, lib, rng, key_index, scheme);
	validate(out, lib);
	return {std::move(out), std::move(rec)};
}

struct DeferredTargets {
	std::vector<std::string> targets;	 // first lockable cell on every fan-out path
	std::vector<std::string> already_locked; // terminals that needed no new record
	std::vector<std::string> unprotected_pos; // fan-out paths ending at a PO unprotected
};

// Complement counterparts of complex gates rarely exist, so a selected
// complex gate is not locked itself: its fan-out is searched depth-first,
// through further complex gates, and the first simple gate or FF on every
// path is locked instead.
inline DeferredTargets find_deferred_targets(const Netlist &n, const CellLibrary &lib,
					     const std::string &cell_name)
{
	const Netlist::Cell *cell = n.find_cell(cell_name);
	if (!cell)
		fail(errc::semantic, "UnknownCell", "no cell named '" + cell_name + "'");
	if (lib.lockable(cell->type))
		fail(errc::semantic, "UnsupportedType",
		     "'" + cell_name + "' is directly lockable, deferral does not apply");

	NetlistIndex idx(n, lib);
	std::map<std::string, int> cell_index;
	for (int i = 0; i < (int)n.cells.size(); ++i)
		cell_index[n.cells[i].name()] = i;

	DeferredTargets out;
	std::set<std::string> seen_targets;
	std::set<int> visited;
	std::set<std::string> flagged_pos;

	std::vector<std::string> work;
	for (const auto &o : cell->outs)
		work.push_back(o);
	while (!work.empty()) {
		std::string net = work.back();
		work.pop_back();
		if (idx.is_po(net) && flagged_pos.insert(net).second)
			out.unprotected_pos.push_back(net);
		for (const NetRef &s : idx.sinks(net)) {
			if (!visited.insert(s.cell).second)
				continue;
			const auto &sc = n.cells[s.cell];
			if (is_tmx_name(sc.name()) || is_locking_infrastructure(sc))
				continue;
			if (lib.lockable(sc.type)) {
				if (seen_targets.insert(sc.name()).second)
					out.targets.push_back(sc.name());
				continue;
			}
			for (const auto &o : sc.outs)
				work.push_back(o);
		}
	}
	return out;
}

inline std::pair<Netlist, std::vector<TroMuxRecord>>
lock_complex_deferred(const Netlist &n, const std::string &cell_name, const CellLibrary &lib,
		      std::mt19937_64 &rng, int first_key_index = 0, Scheme scheme = Scheme::tromux)
{
	DeferredTargets t = find_deferred_targets(n, lib, cell_name);
	Netlist out = n;
	std::vector<TroMuxRecord> recs;
	for (const auto &target : t.targets)
		recs.push_back(detail::lock_cell_inplace(out, target, lib, rng,
							 first_key_index + (int)recs.size(), scheme));
	validate(out, lib);
	return {std::move(out), std::move(recs)};
}

// Iterative greedy selection: rescore every candidate, take the best one,
// then pessimistically age the slack of every net sharing a cone with the
// winner's output nets by sigma. Ties break on the lexicographically
// smallest cell name.
inline std::vector<std::string> select_cells(const Netlist &n, const CellLibrary &lib,
					     const TimingReport &rep, const ToggleProfile &profile,
					     int K, double sigma,
					     const std::set<std::string> &exclude = {})
{
	if (K < 0)
		fail(errc::semantic, "BadKeyLength", "K must be >= 0");
	NetlistIndex idx(n, lib);

	std::map<std::string, std::optional<double>> slack = rep.worst_slack;
	std::vector<const Netlist::Cell *> candidates;
	for (const auto &c : n.cells) {
		if (exclude.count(c.name()) || is_tmx_name(c.name()) || is_locking_infrastructure(c))
			continue;
		candidates.push_back(&c);
	}

	auto working_net_score = [&](const std::string &net) {
		auto it = slack.find(net);
		double ms = (it != slack.end() && it->second) ? *it->second : kUncoveredSlackFallback;
		return 1.0 / (1.0 + std::exp(-2.0 * ms)) * (1.0 / (profile.at(net) + 1e-3));
	};

	std::vector<std::string> selected;
	while ((int)selected.size() < K && !candidates.empty()) {
		size_t best = 0;
		double best_score = -1;
		for (size_t i = 0; i < candidates.size(); ++i) {
			double s = 0;
			for (const auto &out : candidates[i]->outs)
				s += working_net_score(out);
			if (s > best_score ||
			    (s == best_score && candidates[i]->name() < candidates[best]->name())) {
				best = i;
				best_score = s;
			}
		}
		const Netlist::Cell *winner = candidates[best];
		selected.push_back(winner->name());
		candidates.erase(candidates.begin() + best);

		for (const auto &out : winner->outs) {
			std::set<std::string> affected = idx.cone(out, NetlistIndex::Dir::fanin, false);
			std::set<std::string> fo = idx.cone(out, NetlistIndex::Dir::fanout, false);
			affected.insert(fo.begin(), fo.end());
			affected.insert(out);
			for (const auto &net : affected) {
				auto it = slack.find(net);
				if (it != slack.end() && it->second)
					it->second = *it->second - sigma;
			}
		}
	}
	return selected;
}

// Serial shift register storing all key bits: two added primary inputs (data
// in, load) regardless of key length. Each stage shifts from its predecessor
// while load is high and recirculates through its own MUX while load is low,
// so the key stays put after boot. Loading streams the key MSB (index 0)
// first; stage wiring runs din -> key k-1 -> ... -> key 0.
inline Netlist build_keychain(const Netlist &n, const std::string &key, const CellLibrary &lib)
{
	Netlist out = n;
	std::vector<std::string> selects = find_key_selects(n, lib);
	if (selects.size() != key.size())
		fail(errc::semantic, "SelectCountMismatch",
		     "design exposes " + std::to_string(selects.size()) + " key selects, key has " +
			 std::to_string(key.size()) + " bits");
	if (key.empty())
		return out;
	for (const auto &sel : selects) {
		auto it = std::find(out.pis.begin(), out.pis.end(), sel);
		if (it == out.pis.end())
			fail(errc::semantic, "SelectCountMismatch",
			     "key select '" + sel + "' is already driven");
		out.pis.erase(it);
	}

	const std::string din = std::string(kTmxPrefix) + "din";
	const std::string load = std::string(kTmxPrefix) + "load";
	out.pis.push_back(din);
	out.pis.push_back(load);

	size_t k = key.size();
	for (size_t i = 0; i < k; ++i) {
		std::string d_net = std::string(kTmxPrefix) + "kd_" + std::to_string(i);
		std::string from = (i + 1 < k) ? selects[i + 1] : din;
		Netlist::Cell mux;
		mux.type = lib.mux2().name;
		mux.outs = {d_net};
		mux.ins = {selects[i], from, load};
		out.cells.push_back(std::move(mux));
		Netlist::Cell ff;
		ff.type = lib.ff().name;
		ff.outs = {selects[i]};
		if (lib.ff().outputs == 2)
			ff.outs.push_back(std::string(kTmxPrefix) + "kqn_" + std::to_string(i));
		ff.ins = {d_net};
		out.cells.push_back(std::move(ff));
	}
	validate(out, lib);
	return out;
}

struct HardenReport {
	SiteUsage usage_before, usage_after;
	int assets_total = 0, assets_locked = 0;
	int lcc_total = 0, lcc_locked = 0;
	int key_length = 0;
	int shortfall = 0; // requested bits minus locked bits in the last round, if the pool ran dry
	bool pool_exhausted = false;
	std::vector<std::string> unprotected_pos;
	std::optional<EquivalenceVerdict> equivalence;
};

struct HardenedDesign {
	Netlist locked;
	std::string key;
	std::vector<TroMuxRecord> records;
	HardenReport report;
};

// Two-stage flow: (1) lock every security asset FF, (2) repeatedly size the
// remaining key budget from the open-site count, select cells by
// timing/controllability score on the partially protected design, and lock
// them (deferring complex gates) until the budget saturates; then build the
// keychain over all key bits and self-check equivalence.
inline HardenedDesign harden(const Netlist &n, const std::vector<std::string> &assets, const Floorplan &fp,
			     const CellLibrary &lib, const LockingConfig &cfg)
{
	for (const auto &a : assets) {
		const Netlist::Cell *c = n.find_cell(a);
		if (!c)
			fail(errc::semantic, "UnknownAsset", "asset '" + a + "' is not a cell of this design");
		if (!lib.is_ff(c->type))
			fail(errc::semantic, "AssetNotFF", "asset '" + a + "' is not an FF");
	}

	HardenedDesign hd;
	hd.report.usage_before = site_usage(n, fp, lib);
	hd.report.assets_total = (int)assets.size();

	std::set<std::string> lcc_baseline;
	{
		ToggleProfile p0 = toggle_profile(n, lib, cfg.cycles, cfg.sim_seed);
		lcc_baseline = classify_lcn(n, lib, p0, cfg.tpc_threshold).lccs;
		hd.report.lcc_total = (int)lcc_baseline.size();
	}

	std::mt19937_64 rng(cfg.key_seed);
	Netlist work = n;
	std::vector<TroMuxRecord> &records = hd.records;

	// stage 1: security assets
	for (const auto &a : assets)
		records.push_back(detail::lock_cell_inplace(work, a, lib, rng, (int)records.size(), cfg.scheme));
	hd.report.assets_locked = (int)records.size();
	validate(work, lib);

	// stage 2: fill the layout; keychain FF + hold MUX sites are reserved
	// per key bit so Eq-style budgeting sees them as already spent
	const long long reserve_per_bit = lib.ff().width + lib.mux2().width;
	const double sigma = cfg.sigma_or_default(lib);
	for (;;) {
		long long occupied = total_width(work, lib) + (long long)records.size() * reserve_per_bit;
		long long open = fp.total_sites() - occupied;
		if (open < 0)
			fail(errc::semantic, "FloorplanOverflow",
			     "locked design no longer fits the floorplan; lower utilization or alpha");
		int K = key_length(open, lib, cfg.alpha);
		if (K == 0)
			break;

		TimingReport rep = run_sta(work, lib, cfg.clock_period);
		ToggleProfile prof = toggle_profile(work, lib, cfg.cycles, cfg.sim_seed);
		std::vector<std::string> selected = select_cells(work, lib, rep, prof, K, sigma);
		if (selected.empty()) {
			hd.report.pool_exhausted = true;
			hd.report.shortfall = K;
			break;
		}

		int newly = 0;
		bool out_of_sites = false;
		for (const auto &name : selected) {
			Netlist::Cell *c = work.find_cell(name);
			if (!c || is_locking_infrastructure(*c))
				continue; // got locked via deferral earlier this round
			std::vector<std::string> targets;
			if (lib.lockable(c->type)) {
				targets.push_back(name);
			} else {
				DeferredTargets dt = find_deferred_targets(work, lib, name);
				targets = dt.targets;
				for (const auto &po : dt.unprotected_pos)
					hd.report.unprotected_pos.push_back(po);
			}
			for (const auto &t : targets) {
				const Netlist::Cell *tc = work.find_cell(t);
				if (!tc || is_locking_infrastructure(*tc))
					continue;
				const CellType &tt = lib.at(tc->type);
				long long cost = reserve_per_bit + lib.mux2().width;
				if (!(tt.kind == CellKind::Ff && tt.outputs == 2)) {
					cost += lib.inv().width;
					if (tt.complement)
						cost += std::max(0, lib.at(*tt.complement).width - tt.width);
				}
				if (open < cost) {
					out_of_sites = true;
					break;
				}
				records.push_back(detail::lock_cell_inplace(work, t, lib, rng,
									    (int)records.size(), cfg.scheme));
				open -= cost;
				++newly;
			}
			if (out_of_sites)
				break;
		}
		if (out_of_sites)
			break;
		if (newly == 0) {
			hd.report.pool_exhausted = true;
			hd.report.shortfall = K;
			break;
		}
	}
	validate(work, lib);
	std::sort(hd.report.unprotected_pos.begin(), hd.report.unprotected_pos.end());
	hd.report.unprotected_pos.erase(
	    std::unique(hd.report.unprotected_pos.begin(), hd.report.unprotected_pos.end()),
	    hd.report.unprotected_pos.end());

	for (const auto &r : records)
		hd.key += r.key_bit ? '1' : '0';
	work = build_keychain(work, hd.key, lib);

	hd.report.key_length = (int)records.size();
	hd.report.usage_after = site_usage(work, fp, lib);
	for (const auto &r : records)
		if (lcc_baseline.count(r.locked_cell))
			++hd.report.lcc_locked;

	if (cfg.self_check) {
		EqMode mode = n.pis.size() <= 16 ? EqMode::exhaustive : EqMode::random;
		EquivalenceVerdict v = check_equivalence(n, work, lib, hd.key, mode, cfg.eq_budget);
		if (!v.ok())
			fail(errc::internal, "EquivalenceSelfCheck",
			     "locked design mismatches the original under its own key at PO '" +
				 v.mismatch->po + "'");
		hd.report.equivalence = std::move(v);
	}

	hd.locked = std::move(work);
	return hd;
}

} // namespace tromux
