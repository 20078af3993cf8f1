#pragma once

#include "netlist.hpp"

#include <bit>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace tromux {

// Cycle-based zero-delay simulator, 64 Monte-Carlo lanes wide. Each cycle has
// two sampling points: right after the FF edge (primary inputs still hold
// their previous values) and after the mid-cycle PI change. A net can
// therefore toggle at most twice per cycle. FFs are posedge, single clock,
// and initialize to 0 unless forced.
class Simulator {
      public:
	Simulator(const Netlist &n, const CellLibrary &lib) : n_(&n), lib_(&lib), idx_(n, lib)
	{
		for (const auto &net : idx_.nets())
			net_id_.emplace(net, (int)net_id_.size());
		values_.assign(net_id_.size(), 0);
		for (int ci : idx_.ff_cells()) {
			ff_slot_.emplace(ci, (int)state_.size());
			state_.push_back(0);
			d_latch_.push_back(0);
		}
		for (const auto &pi : n.pis)
			pi_id_.push_back(net_id_.at(pi));
	}

	int net(const std::string &name) const
	{
		auto it = net_id_.find(name);
		if (it == net_id_.end())
			fail(errc::validation, "UnknownNet", "no such net '" + name + "'");
		return it->second;
	}

	size_t n_pis() const { return pi_id_.size(); }

	std::uint64_t value(int net) const { return values_[net]; }
	std::uint64_t value(const std::string &name) const { return values_[net(name)]; }

	void force_ff(int cell, std::uint64_t q) { state_[ff_slot_.at(cell)] = q; }

	std::uint64_t ff_state(int cell) const { return state_.at(ff_slot_.at(cell)); }

	// Settle at cycle 0: place PI words, evaluate, capture FF inputs.
	void begin(const std::vector<std::uint64_t> &pi_words)
	{
		place_pis(pi_words);
		eval();
		latch();
	}

	// Advance one cycle: FF edge, post-edge settle (old PI values), then
	// the mid-cycle PI change and end-of-cycle settle.
	void step(const std::vector<std::uint64_t> &pi_words)
	{
		for (size_t i = 0; i < state_.size(); ++i)
			state_[i] = d_latch_[i];
		eval();
		after_edge_ = values_;
		place_pis(pi_words);
		eval();
		latch();
	}

	// Re-settle in place after force_ff / PI changes without an edge.
	void settle(const std::vector<std::uint64_t> &pi_words)
	{
		place_pis(pi_words);
		eval();
		latch();
	}

	const std::vector<std::uint64_t> &after_edge() const { return after_edge_; }
	const std::vector<std::uint64_t> &end_of_cycle() const { return values_; }

	const NetlistIndex &index() const { return idx_; }

      private:
	void place_pis(const std::vector<std::uint64_t> &pi_words)
	{
		if (pi_words.size() != pi_id_.size())
			fail(errc::semantic, "VectorWidthMismatch",
			     "stimulus has " + std::to_string(pi_words.size()) + " entries, netlist has " +
				 std::to_string(pi_id_.size()) + " primary inputs");
		for (size_t i = 0; i < pi_id_.size(); ++i)
			values_[pi_id_[i]] = pi_words[i];
	}

	void eval()
	{
		for (int ci : idx_.ff_cells()) {
			const auto &c = n_->cells[ci];
			std::uint64_t q = state_[ff_slot_.at(ci)];
			values_[net_id_.at(c.outs[0])] = q;
			if (c.outs.size() > 1)
				values_[net_id_.at(c.outs[1])] = ~q;
		}
		std::vector<std::uint64_t> in;
		for (int ci : idx_.topo_order()) {
			const auto &c = n_->cells[ci];
			in.clear();
			for (const auto &net : c.ins)
				in.push_back(values_[net_id_.at(net)]);
			values_[net_id_.at(c.outs[0])] = eval_function(lib_->at(c.type).function, in);
		}
	}

	void latch()
	{
		for (int ci : idx_.ff_cells())
			d_latch_[ff_slot_.at(ci)] = values_[net_id_.at(n_->cells[ci].ins[0])];
	}

	const Netlist *n_;
	const CellLibrary *lib_;
	NetlistIndex idx_;
	std::map<std::string, int> net_id_;
	std::map<int, int> ff_slot_;
	std::vector<int> pi_id_;
	std::vector<std::uint64_t> values_, state_, d_latch_, after_edge_;
};

struct SimTrace {
	std::vector<std::string> nets;
	std::map<std::string, int> id;
	// [cycle][net], lane 0 of the simulator
	std::vector<std::vector<std::uint8_t>> after_edge;
	std::vector<std::vector<std::uint8_t>> end_of_cycle;

	bool at(size_t cycle, const std::string &net, bool end = true) const
	{
		const auto &frame = end ? end_of_cycle.at(cycle) : after_edge.at(cycle);
		return frame.at(id.at(net)) != 0;
	}
};

// Single-stream convenience wrapper: one bool vector per cycle, in PI order.
inline SimTrace simulate(const Netlist &n, const CellLibrary &lib,
			 const std::vector<std::vector<bool>> &stimulus,
			 const std::map<std::string, bool> &initial_state = {})
{
	Simulator sim(n, lib);
	NetlistIndex idx(n, lib);
	for (const auto &[ff, v] : initial_state) {
		const Netlist::Cell *c = n.find_cell(ff);
		if (!c || !lib.is_ff(c->type))
			fail(errc::semantic, "UnknownNet", "'" + ff + "' is not an FF of this netlist");
		for (int ci : idx.ff_cells())
			if (&n.cells[ci] == c)
				sim.force_ff(ci, v ? ~0ull : 0);
	}

	SimTrace trace;
	trace.nets = idx.nets();
	for (const auto &net : trace.nets)
		trace.id.emplace(net, (int)trace.id.size());

	auto words = [&](const std::vector<bool> &v) {
		if (v.size() != n.pis.size())
			fail(errc::semantic, "VectorWidthMismatch", "stimulus vector width does not match PI count");
		std::vector<std::uint64_t> w(v.size());
		for (size_t i = 0; i < v.size(); ++i)
			w[i] = v[i] ? ~0ull : 0;
		return w;
	};
	auto snapshot = [&](const std::vector<std::uint64_t> &vals) {
		std::vector<std::uint8_t> out(trace.nets.size());
		for (size_t i = 0; i < trace.nets.size(); ++i)
			out[i] = (vals[sim.net(trace.nets[i])] & 1) ? 1 : 0;
		return out;
	};

	if (stimulus.empty())
		return trace;
	sim.begin(words(stimulus[0]));
	trace.after_edge.push_back(snapshot(sim.end_of_cycle()));
	trace.end_of_cycle.push_back(snapshot(sim.end_of_cycle()));
	for (size_t t = 1; t < stimulus.size(); ++t) {
		sim.step(words(stimulus[t]));
		trace.after_edge.push_back(snapshot(sim.after_edge()));
		trace.end_of_cycle.push_back(snapshot(sim.end_of_cycle()));
	}
	return trace;
}

struct ToggleProfile {
	std::map<std::string, double> tpc;
	int cycles = 0;
	std::uint64_t seed = 0;

	double at(const std::string &net) const
	{
		auto it = tpc.find(net);
		if (it == tpc.end())
			fail(errc::validation, "UnknownNet", "no TPC for net '" + net + "'");
		return it->second;
	}
};

// Toggles per clock cycle under uniform random stimulus, averaged over the
// simulator's 64 lanes. Transitions are counted at both per-cycle sampling
// points, so TPC(n) is in [0, 2] by construction. One warm-up cycle runs
// uncounted so edge-driven nets measure exactly.
inline ToggleProfile toggle_profile(const Netlist &n, const CellLibrary &lib, int cycles, std::uint64_t seed)
{
	if (cycles < 1)
		fail(errc::semantic, "BadCycleCount", "cycles must be >= 1");
	Simulator sim(n, lib);
	std::mt19937_64 rng(seed);
	auto draw = [&] {
		std::vector<std::uint64_t> w(sim.n_pis());
		for (auto &x : w)
			x = rng();
		return w;
	};

	const auto &nets = sim.index().nets();
	std::vector<int> ids;
	for (const auto &net : nets)
		ids.push_back(sim.net(net));

	sim.begin(draw());
	std::vector<std::uint64_t> last_end(ids.size());
	sim.step(draw()); // warm-up, uncounted
	for (size_t i = 0; i < ids.size(); ++i)
		last_end[i] = sim.end_of_cycle()[ids[i]];

	std::vector<std::uint64_t> count(ids.size(), 0);
	for (int t = 0; t < cycles; ++t) {
		sim.step(draw());
		for (size_t i = 0; i < ids.size(); ++i) {
			std::uint64_t a = sim.after_edge()[ids[i]];
			std::uint64_t b = sim.end_of_cycle()[ids[i]];
			count[i] += std::popcount(a ^ last_end[i]) + std::popcount(b ^ a);
			last_end[i] = b;
		}
	}

	ToggleProfile p;
	p.cycles = cycles;
	p.seed = seed;
	for (size_t i = 0; i < ids.size(); ++i)
		p.tpc[nets[i]] = double(count[i]) / (double(cycles) * 64.0);
	return p;
}

struct LcnReport {
	std::set<std::string> lcns; // nets with TPC <= threshold
	std::set<std::string> lccs; // cells driving LCNs
};

inline LcnReport classify_lcn(const Netlist &n, const CellLibrary &lib, const ToggleProfile &p,
			      double threshold = 0.1)
{
	NetlistIndex idx(n, lib);
	LcnReport r;
	for (const auto &[net, tpc] : p.tpc) {
		if (tpc > threshold)
			continue;
		r.lcns.insert(net);
		NetRef d = idx.driver(net);
		if (d.cell >= 0 && !is_tmx_name(n.cells[d.cell].name()))
			r.lccs.insert(n.cells[d.cell].name());
	}
	return r;
}

// Key-select nets of a locked design, ordered by key index. They are either
// exposed as primary inputs or driven by the key shift register.
inline std::vector<std::string> find_key_selects(const Netlist &n, const CellLibrary &lib)
{
	NetlistIndex idx(n, lib);
	std::map<int, std::string> found;
	const std::string prefix = std::string(kTmxPrefix) + "key_";
	for (const auto &net : idx.nets()) {
		if (net.rfind(prefix, 0) != 0)
			continue;
		std::string tail = net.substr(prefix.size());
		if (tail.empty() || tail.find_first_not_of("0123456789") != std::string::npos)
			continue;
		found[std::stoi(tail)] = net;
	}
	std::vector<std::string> out;
	for (const auto &[i, net] : found) {
		if (i != (int)out.size())
			fail(errc::validation, "KeyIndexGap", "key select indices are not dense at " + net);
		out.push_back(net);
	}
	return out;
}

enum class EqMode { exhaustive, random };

struct EquivalenceVerdict {
	EqMode mode = EqMode::random;
	std::uint64_t vectors_tested = 0;
	struct Mismatch {
		std::vector<std::string> inputs; // one bitstring per cycle, PI order of the original
		std::uint64_t cycle = 0;
		std::string po;
		bool expected = false;
		bool got = false;
	};
	std::optional<Mismatch> mismatch;

	bool ok() const { return !mismatch.has_value(); }
};

// Compares all POs of the original and the locked design on shared stimulus,
// every cycle. The key is first shifted in through the keychain (load high
// for k cycles) with the functional FFs held in reset, matching boot-time
// loading; exposed key inputs are driven statically instead.
inline EquivalenceVerdict check_equivalence(const Netlist &orig, const Netlist &locked, const CellLibrary &lib,
					    const std::string &key, EqMode mode, std::uint64_t budget,
					    std::uint64_t seed = 1)
{
	std::vector<std::string> selects = find_key_selects(locked, lib);
	if (selects.size() != key.size())
		fail(errc::semantic, "KeyLengthMismatch",
		     "key has " + std::to_string(key.size()) + " bits, design has " +
			 std::to_string(selects.size()) + " key selects");
	for (char c : key)
		if (c != '0' && c != '1')
			fail(errc::semantic, "BadKey", "key must be a 0/1 bitstring");

	NetlistIndex lidx(locked, lib);
	const std::string din = std::string(kTmxPrefix) + "din";
	const std::string load = std::string(kTmxPrefix) + "load";
	bool has_chain = std::find(locked.pis.begin(), locked.pis.end(), load) != locked.pis.end();

	// positions of the functional PIs within the locked design
	std::vector<int> fpi_pos;
	std::vector<bool> is_select_pi(locked.pis.size(), false);
	{
		std::set<std::string> sel_set(selects.begin(), selects.end());
		std::map<std::string, int> locked_pi_pos;
		for (size_t i = 0; i < locked.pis.size(); ++i) {
			locked_pi_pos[locked.pis[i]] = (int)i;
			if (sel_set.count(locked.pis[i]))
				is_select_pi[i] = true;
		}
		for (const auto &pi : orig.pis) {
			auto it = locked_pi_pos.find(pi);
			if (it == locked_pi_pos.end())
				fail(errc::semantic, "PiMismatch",
				     "locked design is missing primary input '" + pi + "'");
			fpi_pos.push_back(it->second);
		}
	}

	size_t p = orig.pis.size();
	std::uint64_t total_vectors;
	std::uint64_t enum_words = 0;
	std::uint64_t n_words;
	if (mode == EqMode::exhaustive) {
		if (p > 20)
			fail(errc::semantic, "TooWideExhaustive",
			     "exhaustive mode supports at most 20 primary inputs, design has " + std::to_string(p));
		total_vectors = 1ull << p;
		enum_words = (total_vectors + 63) / 64;
		// sequential designs additionally get random cycles up to the
		// budget so the enumeration also runs against evolved state
		n_words = NetlistIndex(orig, lib).ff_cells().empty()
			      ? enum_words
			      : std::max(enum_words, (budget + 63) / 64);
	} else {
		total_vectors = budget;
		n_words = (budget + 63) / 64;
	}
	if (n_words == 0)
		n_words = 1;

	// stimulus stream: [cycle][orig-PI] words; exhaustive enumerates
	// vector (64*t + lane), random draws lane-independent words
	std::mt19937_64 rng(seed);
	std::vector<std::vector<std::uint64_t>> stream(n_words, std::vector<std::uint64_t>(p, 0));
	for (std::uint64_t t = 0; t < n_words; ++t) {
		if (mode == EqMode::exhaustive && t < enum_words) {
			for (size_t i = 0; i < p; ++i) {
				std::uint64_t w = 0;
				for (int lane = 0; lane < 64; ++lane) {
					std::uint64_t v = std::min<std::uint64_t>(64 * t + lane, total_vectors - 1);
					if ((v >> i) & 1)
						w |= 1ull << lane;
				}
				stream[t][i] = w;
			}
		} else {
			for (size_t i = 0; i < p; ++i)
				stream[t][i] = rng();
		}
	}

	Simulator so(orig, lib), sl(locked, lib);

	auto locked_words = [&](const std::vector<std::uint64_t> &func, std::uint64_t din_w,
				std::uint64_t load_w) {
		std::vector<std::uint64_t> w(locked.pis.size(), 0);
		for (size_t i = 0; i < fpi_pos.size(); ++i)
			w[fpi_pos[i]] = func[i];
		for (size_t i = 0; i < locked.pis.size(); ++i) {
			if (is_select_pi[i]) {
				size_t k = std::find(selects.begin(), selects.end(), locked.pis[i]) -
					   selects.begin();
				w[i] = key[k] == '1' ? ~0ull : 0;
			}
			if (locked.pis[i] == din)
				w[i] = din_w;
			if (locked.pis[i] == load)
				w[i] = load_w;
		}
		return w;
	};

	const std::vector<std::uint64_t> zeros(p, 0);
	if (has_chain && !key.empty()) {
		// serial load, MSB (index 0) first
		sl.begin(locked_words(zeros, key[0] == '1' ? ~0ull : 0, ~0ull));
		for (size_t t = 1; t < key.size(); ++t)
			sl.step(locked_words(zeros, key[t] == '1' ? ~0ull : 0, ~0ull));
		sl.step(locked_words(zeros, 0, 0)); // final shift lands, load drops
		// boot reset: functional FFs to 0, keychain keeps the key
		for (int ci : sl.index().ff_cells())
			if (!is_tmx_name(locked.cells[ci].name()))
				sl.force_ff(ci, 0);
		sl.settle(locked_words(stream[0], 0, 0));
	} else {
		sl.begin(locked_words(stream[0], 0, 0));
	}
	so.begin(stream[0]);

	EquivalenceVerdict verdict;
	verdict.mode = mode;
	verdict.vectors_tested = total_vectors;

	auto compare = [&](std::uint64_t cycle) -> bool {
		for (const auto &po : orig.pos) {
			std::uint64_t a = so.value(po);
			std::uint64_t b = sl.value(po);
			if (a == b)
				continue;
			int lane = std::countr_zero(a ^ b);
			EquivalenceVerdict::Mismatch m;
			m.cycle = cycle;
			m.po = po;
			m.expected = (a >> lane) & 1;
			m.got = (b >> lane) & 1;
			for (std::uint64_t t = 0; t <= cycle; ++t) {
				std::string bits;
				for (size_t i = 0; i < p; ++i)
					bits += ((stream[t][i] >> lane) & 1) ? '1' : '0';
				m.inputs.push_back(bits);
			}
			verdict.mismatch = m;
			return false;
		}
		return true;
	};

	if (!compare(0))
		return verdict;
	for (std::uint64_t t = 1; t < n_words; ++t) {
		so.step(stream[t]);
		sl.step(locked_words(stream[t], 0, 0));
		if (!compare(t))
			return verdict;
	}
	return verdict;
}

} // namespace tromux
