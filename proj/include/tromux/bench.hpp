#pragma once

#include "netlist.hpp"

#include <sstream>
#include <string>

namespace tromux {

// BENCH dialect:
//   INPUT(x) / OUTPUT(x)
//   y = TYPE(a, b, ...)
//   q = DFF(d)
//   q, qn = DFFQN(d)          (two-output FFs)
// One statement per line, `#` comments. TYPE tokens resolve against the
// library with standard aliases (NAND + 3 inputs -> NAND3, NOT -> INV), so
// plain ISCAS files parse as-is.
inline Netlist parse_netlist(const std::string &text, const CellLibrary &lib)
{
	Netlist n;
	std::istringstream in(text);
	std::string line;
	int lineno = 0;

	auto trim = [](std::string s) {
		while (!s.empty() && std::isspace((unsigned char)s.front()))
			s.erase(s.begin());
		while (!s.empty() && std::isspace((unsigned char)s.back()))
			s.pop_back();
		return s;
	};
	auto split = [&](const std::string &s, char sep) {
		std::vector<std::string> out;
		std::stringstream ss(s);
		std::string item;
		while (std::getline(ss, item, sep))
			out.push_back(trim(item));
		return out;
	};
	auto bad = [&](const std::string &msg) {
		fail(errc::parse, "BadBenchLine", "line " + std::to_string(lineno) + ": " + msg);
	};

	while (std::getline(in, line)) {
		++lineno;
		size_t hash = line.find('#');
		if (hash != std::string::npos)
			line = line.substr(0, hash);
		line = trim(line);
		if (line.empty())
			continue;

		size_t open = line.find('(');
		size_t eq = line.find('=');
		if (eq == std::string::npos || (open != std::string::npos && open < eq)) {
			// INPUT(x) / OUTPUT(x)
			size_t close = line.rfind(')');
			if (open == std::string::npos || close == std::string::npos || close < open)
				bad("expected INPUT(...), OUTPUT(...) or an assignment");
			std::string kw = trim(line.substr(0, open));
			std::string net = trim(line.substr(open + 1, close - open - 1));
			if (net.empty())
				bad("empty net name");
			std::transform(kw.begin(), kw.end(), kw.begin(),
				       [](unsigned char c) { return std::toupper(c); });
			if (kw == "INPUT")
				n.pis.push_back(net);
			else if (kw == "OUTPUT")
				n.pos.push_back(net);
			else
				bad("unknown directive '" + kw + "'");
			continue;
		}

		std::string lhs = trim(line.substr(0, eq));
		std::string rhs = trim(line.substr(eq + 1));
		size_t ropen = rhs.find('(');
		size_t rclose = rhs.rfind(')');
		if (ropen == std::string::npos || rclose == std::string::npos || rclose < ropen)
			bad("expected TYPE(args)");
		std::string type_token = trim(rhs.substr(0, ropen));
		std::string args = trim(rhs.substr(ropen + 1, rclose - ropen - 1));

		Netlist::Cell cell;
		cell.outs = split(lhs, ',');
		if (!args.empty())
			cell.ins = split(args, ',');
		for (const auto &o : cell.outs)
			if (o.empty())
				bad("empty output net name");
		for (const auto &i : cell.ins)
			if (i.empty())
				bad("empty input net name");
		cell.type = lib.resolve(type_token, cell.ins.size()).name;
		n.cells.push_back(std::move(cell));
	}

	validate(n, lib);
	return n;
}

inline std::string write_netlist(const Netlist &n)
{
	std::ostringstream out;
	for (const auto &pi : n.pis)
		out << "INPUT(" << pi << ")\n";
	for (const auto &po : n.pos)
		out << "OUTPUT(" << po << ")\n";
	for (const auto &c : n.cells) {
		for (size_t i = 0; i < c.outs.size(); ++i)
			out << (i ? ", " : "") << c.outs[i];
		out << " = " << c.type << "(";
		for (size_t i = 0; i < c.ins.size(); ++i)
			out << (i ? ", " : "") << c.ins[i];
		out << ")\n";
	}
	return out.str();
}

// Structural equality. Cell names are derived from output nets, so a
// write/parse round trip preserves names and plain comparison suffices;
// cell order is not significant.
inline bool same_structure(const Netlist &a, const Netlist &b)
{
	if (a.pis != b.pis || a.pos != b.pos)
		return false;
	if (a.cells.size() != b.cells.size())
		return false;
	auto key = [](const Netlist::Cell &c) { return std::make_tuple(c.name(), c.type, c.ins, c.outs); };
	std::vector<std::tuple<std::string, std::string, std::vector<std::string>, std::vector<std::string>>> ka, kb;
	for (const auto &c : a.cells)
		ka.push_back(key(c));
	for (const auto &c : b.cells)
		kb.push_back(key(c));
	std::sort(ka.begin(), ka.end());
	std::sort(kb.begin(), kb.end());
	return ka == kb;
}

} // namespace tromux
