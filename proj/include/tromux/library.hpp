#pragma once

#include "error.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace tromux {

// Boolean function of a gate, given as an expression over positional inputs
// a..z (a = pin 0). Operators: and/or/nand/nor/xor/xnor (n-ary, n >= 2),
// not/buf (unary), mux(in0, in1, sel) = sel ? in1 : in0, const0/const1
// (nullary), dff(d) / dffqn(d) (sequential, top level only; dffqn has
// outputs Q, QN).
struct FuncExpr {
	enum class Op { Var, And, Or, Nand, Nor, Xor, Xnor, Not, Buf, Mux, Const0, Const1, Dff, Dffqn };

	Op op = Op::Var;
	int var = -1; // for Op::Var
	std::vector<FuncExpr> args;

	bool is_sequential() const { return op == Op::Dff || op == Op::Dffqn; }
};

namespace detail {

struct FuncParser {
	const std::string &s;
	size_t pos = 0;

	explicit FuncParser(const std::string &text) : s(text) {}

	void skip_ws()
	{
		while (pos < s.size() && std::isspace((unsigned char)s[pos]))
			++pos;
	}

	std::string ident()
	{
		skip_ws();
		size_t start = pos;
		while (pos < s.size() && (std::isalnum((unsigned char)s[pos]) || s[pos] == '_'))
			++pos;
		if (pos == start)
			fail(errc::parse, "BadFunction", "expected identifier in '" + s + "'");
		std::string id = s.substr(start, pos - start);
		std::transform(id.begin(), id.end(), id.begin(), [](unsigned char c) { return std::tolower(c); });
		return id;
	}

	bool eat(char c)
	{
		skip_ws();
		if (pos < s.size() && s[pos] == c) {
			++pos;
			return true;
		}
		return false;
	}

	FuncExpr parse_expr()
	{
		std::string id = ident();
		static const std::map<std::string, FuncExpr::Op> ops = {
		    {"and", FuncExpr::Op::And},   {"or", FuncExpr::Op::Or},	    {"nand", FuncExpr::Op::Nand},
		    {"nor", FuncExpr::Op::Nor},   {"xor", FuncExpr::Op::Xor},	    {"xnor", FuncExpr::Op::Xnor},
		    {"not", FuncExpr::Op::Not},   {"buf", FuncExpr::Op::Buf},	    {"mux", FuncExpr::Op::Mux},
		    {"dff", FuncExpr::Op::Dff},   {"dffqn", FuncExpr::Op::Dffqn},  {"const0", FuncExpr::Op::Const0},
		    {"const1", FuncExpr::Op::Const1},
		};
		auto it = ops.find(id);
		if (it == ops.end()) {
			// positional input: single letter a..z
			if (id.size() != 1 || id[0] < 'a' || id[0] > 'z')
				fail(errc::parse, "BadFunction", "unknown operator or input '" + id + "' in '" + s + "'");
			FuncExpr e;
			e.op = FuncExpr::Op::Var;
			e.var = id[0] - 'a';
			return e;
		}
		FuncExpr e;
		e.op = it->second;
		if (!eat('('))
			fail(errc::parse, "BadFunction", "expected '(' after '" + id + "'");
		if (!eat(')')) {
			do {
				e.args.push_back(parse_expr());
			} while (eat(','));
			if (!eat(')'))
				fail(errc::parse, "BadFunction", "expected ')' in '" + s + "'");
		}
		check_arity(e, id);
		return e;
	}

	static void check_arity(const FuncExpr &e, const std::string &id)
	{
		size_t n = e.args.size();
		switch (e.op) {
		case FuncExpr::Op::And:
		case FuncExpr::Op::Or:
		case FuncExpr::Op::Nand:
		case FuncExpr::Op::Nor:
		case FuncExpr::Op::Xor:
		case FuncExpr::Op::Xnor:
			if (n < 2)
				fail(errc::parse, "BadFunction", "'" + id + "' needs at least 2 arguments");
			break;
		case FuncExpr::Op::Not:
		case FuncExpr::Op::Buf:
		case FuncExpr::Op::Dff:
		case FuncExpr::Op::Dffqn:
			if (n != 1)
				fail(errc::parse, "BadFunction", "'" + id + "' needs exactly 1 argument");
			break;
		case FuncExpr::Op::Mux:
			if (n != 3)
				fail(errc::parse, "BadFunction", "mux needs exactly 3 arguments (in0, in1, sel)");
			break;
		case FuncExpr::Op::Const0:
		case FuncExpr::Op::Const1:
			if (n != 0)
				fail(errc::parse, "BadFunction", "'" + id + "' takes no arguments");
			break;
		case FuncExpr::Op::Var:
			break;
		}
	}
};

inline void collect_vars(const FuncExpr &e, std::vector<bool> &seen)
{
	if (e.op == FuncExpr::Op::Var) {
		if ((size_t)e.var >= seen.size())
			seen.resize(e.var + 1, false);
		seen[e.var] = true;
	}
	for (const auto &a : e.args)
		collect_vars(a, seen);
}

} // namespace detail

inline FuncExpr parse_function(const std::string &text)
{
	detail::FuncParser p(text);
	FuncExpr e = p.parse_expr();
	p.skip_ws();
	if (p.pos != text.size())
		fail(errc::parse, "BadFunction", "trailing characters in '" + text + "'");
	if (e.op == FuncExpr::Op::Dff || e.op == FuncExpr::Op::Dffqn) {
		if (e.args[0].op != FuncExpr::Op::Var)
			fail(errc::parse, "BadFunction", "dff argument must be a plain input");
	} else {
		// no nested sequential elements
		std::vector<const FuncExpr *> stack{&e};
		while (!stack.empty()) {
			const FuncExpr *cur = stack.back();
			stack.pop_back();
			for (const auto &a : cur->args) {
				if (a.is_sequential())
					fail(errc::parse, "BadFunction", "dff may only appear at top level");
				stack.push_back(&a);
			}
		}
	}
	return e;
}

// Number of input pins implied by the expression (inputs must be contiguous).
inline int function_arity(const FuncExpr &e)
{
	std::vector<bool> seen;
	detail::collect_vars(e, seen);
	for (size_t i = 0; i < seen.size(); ++i)
		if (!seen[i])
			fail(errc::parse, "BadFunction", "input pins must be contiguous from 'a'");
	return (int)seen.size();
}

// Combinational evaluation, 64 lanes wide.
inline std::uint64_t eval_function(const FuncExpr &e, const std::vector<std::uint64_t> &in)
{
	switch (e.op) {
	case FuncExpr::Op::Var:
		return in[e.var];
	case FuncExpr::Op::Const0:
		return 0;
	case FuncExpr::Op::Const1:
		return ~0ull;
	case FuncExpr::Op::Not:
		return ~eval_function(e.args[0], in);
	case FuncExpr::Op::Buf:
		return eval_function(e.args[0], in);
	case FuncExpr::Op::Mux: {
		std::uint64_t a = eval_function(e.args[0], in);
		std::uint64_t b = eval_function(e.args[1], in);
		std::uint64_t s = eval_function(e.args[2], in);
		return (a & ~s) | (b & s);
	}
	case FuncExpr::Op::And:
	case FuncExpr::Op::Nand: {
		std::uint64_t v = ~0ull;
		for (const auto &a : e.args)
			v &= eval_function(a, in);
		return e.op == FuncExpr::Op::And ? v : ~v;
	}
	case FuncExpr::Op::Or:
	case FuncExpr::Op::Nor: {
		std::uint64_t v = 0;
		for (const auto &a : e.args)
			v |= eval_function(a, in);
		return e.op == FuncExpr::Op::Or ? v : ~v;
	}
	case FuncExpr::Op::Xor:
	case FuncExpr::Op::Xnor: {
		std::uint64_t v = 0;
		for (const auto &a : e.args)
			v ^= eval_function(a, in);
		return e.op == FuncExpr::Op::Xor ? v : ~v;
	}
	case FuncExpr::Op::Dff:
	case FuncExpr::Op::Dffqn:
		fail(errc::internal, "SequentialEval", "sequential cell evaluated combinationally");
	}
	return 0;
}

// Truth table over all 2^arity patterns, bit-packed; arity <= 16.
inline std::vector<std::uint64_t> truth_table(const FuncExpr &e, int arity)
{
	if (arity > 16)
		fail(errc::validation, "BadFunction", "truth table limited to 16 inputs");
	size_t patterns = size_t(1) << arity;
	size_t words = (patterns + 63) / 64;
	std::vector<std::uint64_t> tt(words, 0);
	std::vector<std::uint64_t> in(std::max(arity, 1), 0);
	for (size_t base = 0; base < patterns; base += 64) {
		size_t lanes = std::min<size_t>(64, patterns - base);
		for (int i = 0; i < arity; ++i) {
			std::uint64_t w = 0;
			for (size_t l = 0; l < lanes; ++l)
				if (((base + l) >> i) & 1)
					w |= (1ull << l);
			in[i] = w;
		}
		std::uint64_t out = eval_function(e, in);
		if (lanes < 64)
			out &= (1ull << lanes) - 1;
		tt[base / 64] = out;
	}
	return tt;
}

enum class CellKind { Simple, Complex, Ff, Mux, Inv, Buf };

inline const char *to_string(CellKind k)
{
	switch (k) {
	case CellKind::Simple:
		return "simple";
	case CellKind::Complex:
		return "complex";
	case CellKind::Ff:
		return "ff";
	case CellKind::Mux:
		return "mux";
	case CellKind::Inv:
		return "inv";
	case CellKind::Buf:
		return "buf";
	}
	return "?";
}

struct CellType {
	std::string name;
	FuncExpr function;
	int arity = 0;    // input pins
	int outputs = 1;  // 2 for dffqn (Q, QN)
	int width = 1;    // placement sites
	double delay = 0; // worst-case pin-to-pin, ns
	std::optional<std::string> complement;
	CellKind kind = CellKind::Complex;
};

class CellLibrary {
      public:
	const CellType &at(const std::string &name) const
	{
		auto it = index_.find(name);
		if (it == index_.end())
			fail(errc::validation, "UnknownGateType", "no such gate type '" + name + "'");
		return entries_[it->second];
	}

	const CellType *find(const std::string &name) const
	{
		auto it = index_.find(name);
		return it == index_.end() ? nullptr : &entries_[it->second];
	}

	const std::vector<CellType> &entries() const { return entries_; }

	// The default cells used to build key-gate instances and the keychain.
	const CellType &inv() const { return entries_[inv_]; }
	const CellType &mux2() const { return entries_[mux_]; }
	const CellType &ff() const { return entries_[ff_]; }

	bool is_ff(const std::string &type) const { return at(type).kind == CellKind::Ff; }

	// Directly lockable: complement-paired combinational gate or any FF.
	bool lockable(const std::string &type) const
	{
		const CellType &t = at(type);
		if (t.kind == CellKind::Ff)
			return true;
		return t.complement.has_value() &&
		       (t.kind == CellKind::Simple || t.kind == CellKind::Inv || t.kind == CellKind::Buf);
	}

	// Resolve a netlist gate-type token, allowing standard BENCH aliases:
	// an exact match first, then NAME + arity (NAND/3 -> NAND3), then NOT -> INV.
	const CellType &resolve(const std::string &token, size_t n_inputs) const
	{
		if (const CellType *t = find(token))
			return *t;
		if (const CellType *t = find(token + std::to_string(n_inputs)))
			return *t;
		std::string up = token;
		std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return std::toupper(c); });
		if (up == "NOT")
			if (const CellType *t = find("INV"))
				return *t;
		fail(errc::parse, "UnknownGateType", "gate type '" + token + "' with " + std::to_string(n_inputs) +
							 " inputs not in library");
	}

	void add(CellType t)
	{
		if (index_.count(t.name))
			fail(errc::validation, "DuplicateGateType", "gate type '" + t.name + "' defined twice");
		index_[t.name] = entries_.size();
		entries_.push_back(std::move(t));
	}

	// Validates complement symmetry/involution, truth-table complementarity,
	// and the presence of exactly one INV, MUX2 and FF entry.
	void finalize()
	{
		for (const auto &t : entries_) {
			if (!t.complement)
				continue;
			if (t.kind == CellKind::Ff || t.kind == CellKind::Mux)
				fail(errc::validation, "BadComplement",
				     "'" + t.name + "': FF/MUX entries cannot declare complements");
			const CellType *c = find(*t.complement);
			if (!c)
				fail(errc::validation, "UnknownGateType",
				     "complement '" + *t.complement + "' of '" + t.name + "' not defined");
			if (!c->complement || *c->complement != t.name)
				fail(errc::validation, "AsymmetricComplement",
				     "'" + t.name + "' -> '" + c->name + "' is not paired back");
			if (c->arity != t.arity)
				fail(errc::validation, "NotComplementary",
				     "'" + t.name + "' and '" + c->name + "' differ in arity");
			auto ta = truth_table(t.function, t.arity);
			auto tb = truth_table(c->function, c->arity);
			size_t patterns = size_t(1) << t.arity;
			for (size_t w = 0; w < ta.size(); ++w) {
				std::uint64_t mask = ~0ull;
				if ((w + 1) * 64 > patterns)
					mask = (1ull << (patterns % 64)) - 1;
				if ((ta[w] & mask) != (~tb[w] & mask))
					fail(errc::validation, "NotComplementary",
					     "'" + t.name + "' is not the complement of '" + c->name + "'");
			}
		}
		for (auto &t : entries_) {
			if (t.kind == CellKind::Simple && !t.complement)
				t.kind = CellKind::Complex;
		}
		inv_ = find_unique(CellKind::Inv, "INV");
		mux_ = find_unique(CellKind::Mux, "MUX2");
		ff_ = find_unique(CellKind::Ff, "FF");
	}

      private:
	size_t find_unique(CellKind kind, const char *what) const
	{
		size_t found = entries_.size();
		for (size_t i = 0; i < entries_.size(); ++i) {
			if (entries_[i].kind != kind)
				continue;
			if (found != entries_.size())
				fail(errc::validation, "DuplicateDefaultCell",
				     std::string("library must designate exactly one ") + what + " type");
			found = i;
		}
		if (found == entries_.size())
			fail(errc::validation, "MissingDefaultCell",
			     std::string("library is missing a ") + what + " type");
		return found;
	}

	std::vector<CellType> entries_;
	std::map<std::string, size_t> index_;
	size_t inv_ = 0, mux_ = 0, ff_ = 0;
};

namespace detail {

inline CellKind classify(const FuncExpr &f)
{
	auto flat = [&](FuncExpr::Op op) {
		if (f.op != op)
			return false;
		for (const auto &a : f.args)
			if (a.op != FuncExpr::Op::Var)
				return false;
		return true;
	};
	if (f.op == FuncExpr::Op::Dff || f.op == FuncExpr::Op::Dffqn)
		return CellKind::Ff;
	if (flat(FuncExpr::Op::Mux))
		return CellKind::Mux;
	if (flat(FuncExpr::Op::Not))
		return CellKind::Inv;
	if (flat(FuncExpr::Op::Buf))
		return CellKind::Buf;
	for (FuncExpr::Op op : {FuncExpr::Op::And, FuncExpr::Op::Or, FuncExpr::Op::Nand, FuncExpr::Op::Nor,
				FuncExpr::Op::Xor, FuncExpr::Op::Xnor})
		if (flat(op))
			return CellKind::Simple; // demoted to Complex if unpaired
	return CellKind::Complex;
}

} // namespace detail

// Library file: one entry per line, `NAME,FUNCTION,WIDTH,DELAY,COMPLEMENT`,
// `#` comments. COMPLEMENT is `-` for unpaired entries.
inline CellLibrary load_library(const std::string &text)
{
	CellLibrary lib;
	std::istringstream in(text);
	std::string line;
	int lineno = 0;
	while (std::getline(in, line)) {
		++lineno;
		size_t hash = line.find('#');
		if (hash != std::string::npos)
			line = line.substr(0, hash);
		auto notspace = [](unsigned char c) { return !std::isspace(c); };
		if (std::find_if(line.begin(), line.end(), notspace) == line.end())
			continue;
		std::vector<std::string> fields;
		std::stringstream ls(line);
		std::string field;
		while (std::getline(ls, field, ','))
			fields.push_back(field);
		auto trim = [](std::string s) {
			while (!s.empty() && std::isspace((unsigned char)s.front()))
				s.erase(s.begin());
			while (!s.empty() && std::isspace((unsigned char)s.back()))
				s.pop_back();
			return s;
		};
		// FUNCTION itself contains commas; split from both ends instead.
		if (fields.size() < 5)
			fail(errc::parse, "BadLibraryLine",
			     "line " + std::to_string(lineno) + ": expected NAME,FUNCTION,WIDTH,DELAY,COMPLEMENT");
		std::string comp = trim(fields.back());
		std::string delay_s = trim(fields[fields.size() - 2]);
		std::string width_s = trim(fields[fields.size() - 3]);
		std::string fn;
		for (size_t i = 1; i + 3 < fields.size(); ++i) {
			if (i > 1)
				fn += ",";
			fn += fields[i];
		}
		CellType t;
		t.name = trim(fields[0]);
		t.function = parse_function(fn);
		t.arity = function_arity(t.function);
		t.outputs = t.function.op == FuncExpr::Op::Dffqn ? 2 : 1;
		try {
			t.width = std::stoi(width_s);
			t.delay = std::stod(delay_s);
		} catch (const std::exception &) {
			fail(errc::parse, "BadLibraryLine", "line " + std::to_string(lineno) + ": bad width/delay");
		}
		if (t.width < 1)
			fail(errc::validation, "BadWidth", "'" + t.name + "': width must be >= 1");
		if (t.delay < 0)
			fail(errc::validation, "BadDelay", "'" + t.name + "': delay must be >= 0");
		if (comp != "-" && !comp.empty())
			t.complement = comp;
		t.kind = detail::classify(t.function);
		lib.add(std::move(t));
	}
	lib.finalize();
	return lib;
}

// The restricted cell set used for attack-tool exports: 2-input gates plus
// INV/BUF/DFF. Widths/delays are placeholders; exports are functional only.
inline const CellLibrary &primitive_library()
{
	static const CellLibrary lib = [] {
		return load_library("INV,not(a),1,0.02,BUF\n"
				    "BUF,buf(a),1,0.03,INV\n"
				    "AND,and(a,b),3,0.05,NAND\n"
				    "NAND,nand(a,b),3,0.04,AND\n"
				    "OR,or(a,b),3,0.05,NOR\n"
				    "NOR,nor(a,b),3,0.04,OR\n"
				    "XOR,xor(a,b),4,0.07,XNOR\n"
				    "XNOR,xnor(a,b),4,0.06,XOR\n"
				    "MUX2,mux(a,b,c),2,0.06,-\n"
				    "DFF,dff(a),4,0.10,-\n");
	}();
	return lib;
}

} // namespace tromux
