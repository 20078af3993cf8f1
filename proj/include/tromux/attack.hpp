#pragma once

#include "locking.hpp"
#include "netlist.hpp"
#include "sim.hpp"

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace tromux {

// ---------------------------------------------------------------------------
// BENCH export for external attack tooling: every cell is decomposed into the
// restricted set {AND, OR, NAND, NOR, INV, BUF, DFF, XOR, XNOR} (2-input
// forms), MUXes become (a & !s) | (b & s).

struct ExportOptions {
	bool keys_as_inputs = false;	// strip the keychain, expose selects as PIs
	bool ffs_as_pseudo_ports = false; // FF outputs become PIs, FF inputs POs
};

namespace detail {

struct BenchWriter {
	std::ostringstream body;
	int tmp = 0;

	std::string fresh(const std::string &base)
	{
		return base + "_e" + std::to_string(tmp++);
	}

	std::string emit(const FuncExpr &e, const std::vector<std::string> &in, const std::string &base)
	{
		auto gate = [&](const char *type, const std::vector<std::string> &args,
				std::string out = "") {
			if (out.empty())
				out = fresh(base);
			body << out << " = " << type << "(";
			for (size_t i = 0; i < args.size(); ++i)
				body << (i ? ", " : "") << args[i];
			body << ")\n";
			return out;
		};
		auto fold = [&](const char *inner, const char *last) {
			std::string acc = emit(e.args[0], in, base);
			for (size_t i = 1; i < e.args.size(); ++i) {
				std::string next = emit(e.args[i], in, base);
				acc = gate(i + 1 == e.args.size() ? last : inner, {acc, next});
			}
			return acc;
		};
		switch (e.op) {
		case FuncExpr::Op::Var:
			return in[e.var];
		case FuncExpr::Op::Not:
			return gate("INV", {emit(e.args[0], in, base)});
		case FuncExpr::Op::Buf:
			return gate("BUF", {emit(e.args[0], in, base)});
		case FuncExpr::Op::And:
			return fold("AND", "AND");
		case FuncExpr::Op::Nand:
			return fold("AND", "NAND");
		case FuncExpr::Op::Or:
			return fold("OR", "OR");
		case FuncExpr::Op::Nor:
			return fold("OR", "NOR");
		case FuncExpr::Op::Xor:
			return fold("XOR", "XOR");
		case FuncExpr::Op::Xnor:
			return fold("XOR", "XNOR");
		case FuncExpr::Op::Mux: {
			std::string a = emit(e.args[0], in, base);
			std::string b = emit(e.args[1], in, base);
			std::string s = emit(e.args[2], in, base);
			std::string ns = gate("INV", {s});
			return gate("OR", {gate("AND", {a, ns}), gate("AND", {b, s})});
		}
		default:
			fail(errc::semantic, "NoDecomposition",
			     "no export decomposition for this cell function");
		}
	}
};

inline Netlist strip_keychain(const Netlist &n, const CellLibrary &lib)
{
	Netlist out;
	out.clock = n.clock;
	const std::string kd = std::string(kTmxPrefix) + "kd_";
	const std::string key = std::string(kTmxPrefix) + "key_";
	const std::string kqn = std::string(kTmxPrefix) + "kqn_";
	auto chain_cell = [&](const Netlist::Cell &c) {
		const std::string &o = c.outs[0];
		return o.rfind(kd, 0) == 0 || o.rfind(key, 0) == 0 || o.rfind(kqn, 0) == 0;
	};
	for (const auto &pi : n.pis)
		if (pi != std::string(kTmxPrefix) + "din" && pi != std::string(kTmxPrefix) + "load")
			out.pis.push_back(pi);
	out.pos = n.pos;
	for (const auto &c : n.cells)
		if (!chain_cell(c))
			out.cells.push_back(c);
	for (const auto &sel : find_key_selects(n, lib))
		if (std::find(out.pis.begin(), out.pis.end(), sel) == out.pis.end())
			out.pis.push_back(sel);
	return out;
}

inline Netlist ffs_to_ports(const Netlist &n, const CellLibrary &lib)
{
	Netlist out;
	out.clock = n.clock;
	out.pis = n.pis;
	out.pos = n.pos;
	std::set<std::string> po_set(out.pos.begin(), out.pos.end());
	for (const auto &c : n.cells) {
		if (lib.at(c.type).kind != CellKind::Ff) {
			out.cells.push_back(c);
			continue;
		}
		out.pis.push_back(c.outs[0]);
		if (c.outs.size() > 1) {
			Netlist::Cell inv;
			inv.type = lib.inv().name;
			inv.outs = {c.outs[1]};
			inv.ins = {c.outs[0]};
			out.cells.push_back(std::move(inv));
		}
		if (po_set.insert(c.ins[0]).second)
			out.pos.push_back(c.ins[0]);
	}
	return out;
}

} // namespace detail

inline std::string export_bench(const Netlist &n, const CellLibrary &lib, ExportOptions opts = {})
{
	Netlist work = n;
	if (opts.keys_as_inputs)
		work = detail::strip_keychain(work, lib);
	if (opts.ffs_as_pseudo_ports)
		work = detail::ffs_to_ports(work, lib);

	detail::BenchWriter w;
	std::ostringstream head;
	for (const auto &pi : work.pis)
		head << "INPUT(" << pi << ")\n";
	for (const auto &po : work.pos)
		head << "OUTPUT(" << po << ")\n";
	for (const auto &c : work.cells) {
		const CellType &t = lib.at(c.type);
		if (t.function.op == FuncExpr::Op::Dff || t.function.op == FuncExpr::Op::Dffqn) {
			w.body << c.outs[0] << " = DFF(" << c.ins[0] << ")\n";
			if (c.outs.size() > 1)
				w.body << c.outs[1] << " = INV(" << c.outs[0] << ")\n";
			continue;
		}
		// top-level gate writes straight to the cell's output net
		const FuncExpr &f = t.function;
		std::string result = w.emit(f, c.ins, c.outs[0]);
		if (result != c.outs[0])
			w.body << c.outs[0] << " = BUF(" << result << ")\n";
	}
	return head.str() + w.body.str();
}

// ---------------------------------------------------------------------------
// Attack metrics

struct AttackResult {
	std::map<int, char> predictions; // '0' / '1' / 'X'
	int x_count = 0;
	double ac = 0;		  // percent correct over all bits
	double pc = 0;		  // percent, X counted as correct
	std::optional<double> kpa; // percent correct over non-X bits; absent if all X
};

inline AttackResult score_attack(const std::map<int, char> &predictions, const std::string &true_key)
{
	AttackResult r;
	r.predictions = predictions;
	if (predictions.size() != true_key.size())
		fail(errc::semantic, "LengthMismatch",
		     "prediction set has " + std::to_string(predictions.size()) + " entries, key has " +
			 std::to_string(true_key.size()) + " bits");
	int correct = 0;
	for (const auto &[idx, p] : predictions) {
		if (idx < 0 || idx >= (int)true_key.size())
			fail(errc::semantic, "LengthMismatch", "prediction index out of range");
		if (p == 'X')
			++r.x_count;
		else if (p == true_key[idx])
			++correct;
	}
	int total = (int)true_key.size();
	if (total == 0)
		return r;
	r.ac = 100.0 * correct / total;
	r.pc = 100.0 * (correct + r.x_count) / total;
	if (r.x_count < total)
		r.kpa = 100.0 * correct / (total - r.x_count);
	return r;
}

// ---------------------------------------------------------------------------
// Local-structure attack: Kerckhoffs-style, the key MUXes are known, the key
// bits are not. Frequency tables of (driver type/pin -> sink type/pin) edges
// are built over the regular portion of the design; each key MUX input is
// then bypassed in turn and the resulting local structure scored by
// log-likelihood. Prediction is the likelier bypass, X when the gap is small.

struct StructureAttackOptions {
	double x_threshold = 0.1; // log-likelihood gap below which a bit is X
};

namespace detail {

struct EdgeModel {
	using Ctx = std::pair<std::string, int>; // (type or PI/PO, pin)
	std::map<Ctx, std::map<Ctx, double>> rows;
	std::map<Ctx, double> row_total;
	std::set<Ctx> contexts;

	void add(const Ctx &d, const Ctx &s)
	{
		rows[d][s] += 1;
		row_total[d] += 1;
		contexts.insert(s);
	}

	double logp(const Ctx &d, const Ctx &s) const
	{
		double v = (double)std::max<size_t>(contexts.size(), 1);
		double count = 0, total = 0;
		auto it = rows.find(d);
		if (it != rows.end()) {
			total = row_total.at(d);
			auto jt = it->second.find(s);
			if (jt != it->second.end())
				count = jt->second;
		}
		return std::log((count + 0.5) / (total + 0.5 * v));
	}
};

} // namespace detail

inline AttackResult local_structure_attack(const Netlist &locked, const CellLibrary &lib,
					   const std::vector<std::string> &key_selects,
					   StructureAttackOptions opts = {})
{
	NetlistIndex idx(locked, lib);
	using Ctx = detail::EdgeModel::Ctx;

	// locate the key MUX of every select net
	std::vector<int> key_mux(key_selects.size(), -1);
	std::set<int> key_mux_set;
	for (size_t k = 0; k < key_selects.size(); ++k) {
		for (const NetRef &s : idx.sinks(key_selects[k])) {
			const auto &c = locked.cells[s.cell];
			if (lib.at(c.type).kind == CellKind::Mux && s.pin == 2 && !is_tmx_name(c.name())) {
				key_mux[k] = s.cell;
				key_mux_set.insert(s.cell);
				break;
			}
		}
	}
	if (key_selects.empty() || std::all_of(key_mux.begin(), key_mux.end(), [](int m) { return m < 0; }))
		fail(errc::semantic, "NoKeyMux", "no key MUXes found in this design");

	auto driver_ctx = [&](const std::string &net) -> Ctx {
		NetRef d = idx.driver(net);
		if (d.cell < 0)
			return {"PI", 0};
		return {locked.cells[d.cell].type, d.pin};
	};

	// training set: all edges not internal to key-gate instances or the
	// keychain (those nets carry the reserved prefix) and not driven by a
	// key MUX (the key MUX fan-out is the prediction target)
	detail::EdgeModel model;
	for (const auto &net : idx.nets()) {
		if (is_tmx_name(net))
			continue;
		NetRef d = idx.driver(net);
		if (d.cell >= 0 && key_mux_set.count(d.cell))
			continue;
		Ctx dc = driver_ctx(net);
		for (const NetRef &s : idx.sinks(net))
			model.add(dc, {locked.cells[s.cell].type, s.pin});
		if (idx.is_po(net))
			model.add(dc, {"PO", 0});
	}

	const Ctx inv_ctx{lib.inv().name, 0};
	AttackResult result;
	for (size_t k = 0; k < key_selects.size(); ++k) {
		if (key_mux[k] < 0) {
			result.predictions[(int)k] = 'X';
			continue;
		}
		const auto &mux = locked.cells[key_mux[k]];
		const std::string &a = mux.ins[0], &b = mux.ins[1];
		std::vector<Ctx> fanout;
		for (const NetRef &s : idx.sinks(mux.outs[0]))
			fanout.push_back({locked.cells[s.cell].type, s.pin});
		if (idx.is_po(mux.outs[0]))
			fanout.push_back({"PO", 0});

		NetRef da = idx.driver(a), db = idx.driver(b);
		auto is_instance_inv = [&](NetRef dn, const std::string &other) {
			if (dn.cell < 0)
				return false;
			const auto &c = locked.cells[dn.cell];
			return lib.at(c.type).kind == CellKind::Inv && c.ins.size() == 1 &&
			       c.ins[0] == other;
		};

		double score_a, score_b;
		if (is_instance_inv(db, a) || is_instance_inv(da, b)) {
			// key-gate shape: one input is the gate, the other its
			// inversion. Contrast the two reconstructions: the gate
			// driving the fan-out directly versus through a real
			// inverter.
			bool inv_is_b = is_instance_inv(db, a);
			const std::string &raw = inv_is_b ? a : b;
			Ctx gate = driver_ctx(raw);
			double direct = 0, inverted = model.logp(gate, inv_ctx);
			for (const Ctx &s : fanout) {
				direct += model.logp(gate, s);
				inverted += model.logp(inv_ctx, s);
			}
			score_a = inv_is_b ? direct : inverted;
			score_b = inv_is_b ? inverted : direct;
		} else {
			score_a = score_b = 0;
			for (const Ctx &s : fanout) {
				score_a += model.logp(driver_ctx(a), s);
				score_b += model.logp(driver_ctx(b), s);
			}
		}

		if (std::abs(score_a - score_b) < opts.x_threshold)
			result.predictions[(int)k] = 'X';
		else
			result.predictions[(int)k] = score_a > score_b ? '0' : '1';
	}
	for (const auto &[i, p] : result.predictions)
		if (p == 'X')
			++result.x_count;
	return result;
}

// ---------------------------------------------------------------------------
// Constant-propagation probe: ties one key select to 0 and to 1, runs
// constant propagation, dead-gate elimination and inverter absorption on the
// combinational frame (never across FFs), and reports how many cells each
// hypothesis removes. A nonzero difference leaks the key bit; the key-gate
// structure is built so both branches are symmetric and the signal is 0.

struct ProbeResult {
	int signal0 = 0;
	int signal1 = 0;

	int signal() const { return std::abs(signal0 - signal1); }
};

namespace detail {

enum class Tri { f, t, u };

inline Tri tri_not(Tri x)
{
	return x == Tri::u ? Tri::u : (x == Tri::t ? Tri::f : Tri::t);
}

struct PartialEval {
	// determined constant, wire-through to one input pin, or neither
	std::optional<bool> value;
	std::optional<int> wire;
};

inline Tri tri_eval(const FuncExpr &e, const std::vector<Tri> &in)
{
	auto bin = [&](bool and_like, bool invert) {
		bool any_u = false;
		bool acc = and_like;
		for (const auto &a : e.args) {
			Tri v = tri_eval(a, in);
			if (v == Tri::u) {
				any_u = true;
				continue;
			}
			bool b = v == Tri::t;
			acc = and_like ? (acc && b) : (acc || b);
		}
		if (and_like && !acc)
			return invert ? Tri::t : Tri::f;
		if (!and_like && acc)
			return invert ? Tri::f : Tri::t;
		if (any_u)
			return Tri::u;
		return (acc != invert) ? Tri::t : Tri::f;
	};
	switch (e.op) {
	case FuncExpr::Op::Var:
		return in[e.var];
	case FuncExpr::Op::Const0:
		return Tri::f;
	case FuncExpr::Op::Const1:
		return Tri::t;
	case FuncExpr::Op::Not:
		return tri_not(tri_eval(e.args[0], in));
	case FuncExpr::Op::Buf:
		return tri_eval(e.args[0], in);
	case FuncExpr::Op::And:
		return bin(true, false);
	case FuncExpr::Op::Nand:
		return bin(true, true);
	case FuncExpr::Op::Or:
		return bin(false, false);
	case FuncExpr::Op::Nor:
		return bin(false, true);
	case FuncExpr::Op::Xor:
	case FuncExpr::Op::Xnor: {
		bool parity = e.op == FuncExpr::Op::Xnor;
		for (const auto &a : e.args) {
			Tri v = tri_eval(a, in);
			if (v == Tri::u)
				return Tri::u;
			parity ^= (v == Tri::t);
		}
		return parity ? Tri::t : Tri::f;
	}
	case FuncExpr::Op::Mux: {
		Tri s = tri_eval(e.args[2], in);
		if (s != Tri::u)
			return tri_eval(e.args[s == Tri::t ? 1 : 0], in);
		Tri a = tri_eval(e.args[0], in);
		Tri b = tri_eval(e.args[1], in);
		return (a != Tri::u && a == b) ? a : Tri::u;
	}
	default:
		return Tri::u;
	}
}

// wire-through detection for flat gates and MUXes, driven by constant inputs
inline PartialEval partial_eval(const CellType &t, const std::vector<Tri> &in)
{
	PartialEval r;
	Tri v = tri_eval(t.function, in);
	if (v != Tri::u) {
		r.value = v == Tri::t;
		return r;
	}
	auto flat = [&] {
		for (const auto &a : t.function.args)
			if (a.op != FuncExpr::Op::Var)
				return false;
		return true;
	};
	if (!flat())
		return r;
	const FuncExpr &f = t.function;
	int unknown = -1;
	int unknowns = 0;
	for (const auto &a : f.args)
		if (in[a.var] == Tri::u) {
			unknown = a.var;
			++unknowns;
		}
	switch (f.op) {
	case FuncExpr::Op::And:
		if (unknowns == 1) // the rest must be 1 or the value would be known
			r.wire = unknown;
		break;
	case FuncExpr::Op::Or:
		if (unknowns == 1)
			r.wire = unknown;
		break;
	case FuncExpr::Op::Xor: {
		if (unknowns != 1)
			break;
		bool parity = false;
		for (const auto &a : f.args)
			if (in[a.var] != Tri::u)
				parity ^= in[a.var] == Tri::t;
		if (!parity)
			r.wire = unknown;
		break;
	}
	case FuncExpr::Op::Xnor: {
		if (unknowns != 1)
			break;
		bool parity = true;
		for (const auto &a : f.args)
			if (in[a.var] != Tri::u)
				parity ^= in[a.var] == Tri::t;
		if (!parity)
			r.wire = unknown;
		break;
	}
	case FuncExpr::Op::Buf:
		break; // unknown input, keep
	case FuncExpr::Op::Mux:
		if (in[2] != Tri::u)
			r.wire = in[2] == Tri::t ? 1 : 0;
		break;
	default:
		break;
	}
	return r;
}

inline int run_probe(const Netlist &n, const CellLibrary &lib, const std::string &select, bool bit)
{
	NetlistIndex idx(n, lib);
	size_t nc = n.cells.size();
	std::vector<bool> alive(nc, true), is_ff(nc, false);
	std::vector<std::string> type(nc);
	std::map<std::string, std::string> alias;
	std::map<std::string, Tri> consts;
	std::set<std::string> po_set(n.pos.begin(), n.pos.end());

	for (size_t i = 0; i < nc; ++i) {
		type[i] = n.cells[i].type;
		is_ff[i] = lib.at(n.cells[i].type).kind == CellKind::Ff;
	}

	auto resolve = [&](std::string net) {
		while (true) {
			auto it = alias.find(net);
			if (it == alias.end())
				return net;
			net = it->second;
		}
	};
	auto net_const = [&](const std::string &net) {
		auto it = consts.find(resolve(net));
		return it == consts.end() ? Tri::u : it->second;
	};

	consts[select] = bit ? Tri::t : Tri::f;
	int eliminated = 0;

	bool changed = true;
	while (changed) {
		changed = false;

		// live sink sets per resolved net
		std::map<std::string, std::vector<size_t>> sinks;
		for (size_t i = 0; i < nc; ++i) {
			if (!alive[i])
				continue;
			for (const auto &in : n.cells[i].ins)
				sinks[resolve(in)].push_back(i);
		}
		auto observed = [&](const std::string &raw_net) {
			// a net is observed if a PO resolves onto it
			for (const auto &po : n.pos)
				if (resolve(po) == resolve(raw_net))
					return true;
			return false;
		};

		for (size_t i = 0; i < nc; ++i) {
			if (!alive[i] || is_ff[i])
				continue;
			const auto &c = n.cells[i];
			const CellType &t = lib.at(type[i]);

			// constant propagation / wire-through
			std::vector<Tri> in;
			for (const auto &net : c.ins)
				in.push_back(net_const(net));
			PartialEval pe = partial_eval(t, in);
			if (pe.value) {
				consts[resolve(c.outs[0])] = *pe.value ? Tri::t : Tri::f;
				alive[i] = false;
				++eliminated;
				changed = true;
				continue;
			}
			if (pe.wire) {
				alias[resolve(c.outs[0])] = resolve(c.ins[*pe.wire]);
				alive[i] = false;
				++eliminated;
				changed = true;
				continue;
			}

			// dead-gate elimination
			bool used = false;
			for (const auto &out : c.outs) {
				if (!sinks[resolve(out)].empty() || observed(out))
					used = true;
			}
			if (!used) {
				alive[i] = false;
				++eliminated;
				changed = true;
				continue;
			}

			// inverter absorption: a single-fanout driver with a
			// complement (or an FF output) swallows the inversion
			if (t.kind == CellKind::Inv) {
				std::string src = resolve(c.ins[0]);
				NetRef d = idx.driver(src);
				if (d.cell >= 0 && alive[d.cell] && sinks[src].size() == 1 &&
				    sinks[src][0] == i && !observed(src)) {
					const CellType &dt = lib.at(type[d.cell]);
					if (dt.complement || dt.kind == CellKind::Ff) {
						if (dt.complement)
							type[d.cell] = *dt.complement;
						alias[resolve(c.outs[0])] = src;
						alive[i] = false;
						++eliminated;
						changed = true;
					}
				}
			}
		}
	}
	return eliminated;
}

} // namespace detail

inline ProbeResult constant_prop_probe(const Netlist &locked, const CellLibrary &lib, int key_index)
{
	std::vector<std::string> selects = find_key_selects(locked, lib);
	if (key_index < 0 || key_index >= (int)selects.size())
		fail(errc::semantic, "InvalidKeyIndex",
		     "key index " + std::to_string(key_index) + " out of range (design has " +
			 std::to_string(selects.size()) + " key bits)");
	ProbeResult r;
	r.signal0 = detail::run_probe(locked, lib, selects[key_index], false);
	r.signal1 = detail::run_probe(locked, lib, selects[key_index], true);
	return r;
}

} // namespace tromux
