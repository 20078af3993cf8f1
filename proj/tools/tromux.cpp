//
// tromux -- netlist hardening against post-design Trojan insertion:
// MUX-based logic locking with timing/controllability-aware cell selection,
// plus verification and oracle-less attack evaluation.
//

#include <tromux/attack.hpp>
#include <tromux/bench.hpp>
#include <tromux/layout.hpp>
#include <tromux/library.hpp>
#include <tromux/locking.hpp>
#include <tromux/netlist.hpp>
#include <tromux/report.hpp>
#include <tromux/sim.hpp>
#include <tromux/timing.hpp>

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace tromux;

namespace {

std::string slurp(const std::string &path)
{
	std::ifstream in(path, std::ios::binary);
	if (!in)
		fail(errc::io, "FileReadError", "cannot open '" + path + "'");
	std::ostringstream ss;
	ss << in.rdbuf();
	return ss.str();
}

void spit(const std::string &path, const std::string &content)
{
	std::ofstream out(path, std::ios::binary);
	if (!out)
		fail(errc::io, "FileWriteError", "cannot write '" + path + "'");
	out << content;
}

struct StageClock {
	std::chrono::steady_clock::time_point last = std::chrono::steady_clock::now();
	json timings = json::object();

	void mark(const std::string &stage)
	{
		auto now = std::chrono::steady_clock::now();
		timings[stage] = std::chrono::duration<double, std::milli>(now - last).count();
		last = now;
	}
};

std::vector<std::string> read_assets(const std::string &path)
{
	std::vector<std::string> assets;
	std::istringstream in(slurp(path));
	std::string line;
	while (std::getline(in, line)) {
		size_t hash = line.find('#');
		if (hash != std::string::npos)
			line = line.substr(0, hash);
		while (!line.empty() && std::isspace((unsigned char)line.back()))
			line.pop_back();
		while (!line.empty() && std::isspace((unsigned char)line.front()))
			line.erase(line.begin());
		if (!line.empty())
			assets.push_back(line);
	}
	return assets;
}

std::string read_key(const std::string &path)
{
	std::istringstream in(slurp(path));
	std::string header, bits;
	if (!std::getline(in, header) || header.rfind("k=", 0) != 0)
		fail(errc::parse, "BadKeyFile", "'" + path + "': expected 'k=<int>' header");
	std::getline(in, bits);
	while (!bits.empty() && std::isspace((unsigned char)bits.back()))
		bits.pop_back();
	size_t k = std::stoul(header.substr(2));
	if (bits.size() != k)
		fail(errc::parse, "BadKeyFile", "'" + path + "': header says " + std::to_string(k) +
						    " bits, body has " + std::to_string(bits.size()));
	for (char c : bits)
		if (c != '0' && c != '1')
			fail(errc::parse, "BadKeyFile", "'" + path + "': key must be 0/1 only");
	return bits;
}

struct FloorplanFlags {
	int rows = 0, sites_per_row = 0;
	double target_util = 0.5;

	Floorplan resolve(const Netlist &n, const CellLibrary &lib) const
	{
		if (rows > 0 && sites_per_row > 0)
			return Floorplan{rows, sites_per_row};
		return make_floorplan(n, lib, target_util);
	}
};

void add_floorplan_flags(CLI::App *cmd, FloorplanFlags &fp)
{
	cmd->add_option("--rows", fp.rows, "floorplan rows");
	cmd->add_option("--sites-per-row", fp.sites_per_row, "sites per row");
	cmd->add_option("--target-util", fp.target_util,
			"derive a near-square floorplan at this utilization (default 0.5)");
}

json base_report(std::uint64_t seed, const json &inputs)
{
	return json{{"tool_version", kToolVersion}, {"seed", seed}, {"inputs", inputs}};
}

void emit(const json &report, const std::string &out_path)
{
	std::string text = report.dump(2) + "\n";
	if (out_path.empty())
		std::cout << text;
	else
		spit(out_path, text);
}

int cmd_analyze(const std::string &netlist_path, const std::string &lib_path, const FloorplanFlags &fp,
		double clock_period, int cycles, std::uint64_t seed, double tpc_threshold,
		const std::string &out_path)
{
	StageClock clock;
	std::string lib_text = slurp(lib_path);
	std::string net_text = slurp(netlist_path);
	CellLibrary lib = load_library(lib_text);
	Netlist n = parse_netlist(net_text, lib);
	clock.mark("parse");

	Floorplan plan = fp.resolve(n, lib);
	SiteUsage usage = site_usage(n, plan, lib);
	TimingReport sta = run_sta(n, lib, clock_period);
	clock.mark("sta");
	ToggleProfile prof = toggle_profile(n, lib, cycles, seed);
	LcnReport lcn = classify_lcn(n, lib, prof, tpc_threshold);
	clock.mark("toggle");

	int ffs = 0, covered = 0, uncovered = 0;
	for (const auto &c : n.cells)
		if (lib.is_ff(c.type))
			++ffs;
	for (const auto &[net, s] : sta.worst_slack)
		(s ? covered : uncovered)++;

	json report = base_report(seed, json{{"netlist", json{{"path", netlist_path}, {"digest", digest(net_text)}}},
					     {"library", json{{"path", lib_path}, {"digest", digest(lib_text)}}}});
	report["design"] = json{{"cells", n.cells.size()},
				{"pis", n.pis.size()},
				{"pos", n.pos.size()},
				{"ffs", ffs}};
	report["site_usage"] = to_json(usage);
	report["site_usage"]["rows"] = plan.rows;
	report["site_usage"]["sites_per_row"] = plan.sites_per_row;
	report["timing"] = json{{"clock_period", clock_period},
				{"wns", sta.wns},
				{"tns", sta.tns},
				{"covered_nets", covered},
				{"uncovered_nets", uncovered}};
	report["controllability"] = json{{"cycles", cycles},
					 {"seed", seed},
					 {"stimulus_model", "uniform-random"},
					 {"tpc_threshold", tpc_threshold},
					 {"lcn_count", lcn.lcns.size()},
					 {"lcc_count", lcn.lccs.size()}};
	report["timings_ms"] = clock.timings;
	emit(report, out_path);
	return 0;
}

int cmd_lock(const std::string &netlist_path, const std::string &lib_path, const std::string &assets_path,
	     const FloorplanFlags &fp, const LockingConfig &cfg, const std::string &prefix)
{
	StageClock clock;
	std::string lib_text = slurp(lib_path);
	std::string net_text = slurp(netlist_path);
	CellLibrary lib = load_library(lib_text);
	Netlist n = parse_netlist(net_text, lib);
	std::vector<std::string> assets;
	std::string assets_digest = "";
	if (!assets_path.empty()) {
		assets = read_assets(assets_path);
		assets_digest = digest(slurp(assets_path));
	}
	clock.mark("parse");

	Floorplan plan = fp.resolve(n, lib);
	HardenedDesign hd = harden(n, assets, plan, lib, cfg);
	clock.mark("harden");

	spit(prefix + ".bench", write_netlist(hd.locked));
	spit(prefix + ".key", "k=" + std::to_string(hd.key.size()) + "\n" + hd.key + "\n");

	json report = base_report(cfg.key_seed,
				  json{{"netlist", json{{"path", netlist_path}, {"digest", digest(net_text)}}},
				       {"library", json{{"path", lib_path}, {"digest", digest(lib_text)}}},
				       {"assets", assets_path.empty()
						      ? json(nullptr)
						      : json{{"path", assets_path}, {"digest", assets_digest}}}});
	report["scheme"] = to_string(cfg.scheme);
	report["alpha"] = cfg.alpha;
	report["sigma"] = cfg.sigma_or_default(lib);
	report["clock_period"] = cfg.clock_period;
	report["floorplan"] = json{{"rows", plan.rows}, {"sites_per_row", plan.sites_per_row}};
	report["locking"] = to_json(hd.report);
	json records = json::array();
	for (const auto &r : hd.records)
		records.push_back(to_json(r));
	report["records"] = records;
	clock.mark("report");
	report["timings_ms"] = clock.timings;
	emit(report, prefix + ".report.json");

	std::cout << "locked " << hd.records.size() << " cells, key length " << hd.key.size()
		  << ", utilization " << hd.report.usage_before.utilization << " -> "
		  << hd.report.usage_after.utilization << "\n";
	return 0;
}

int cmd_verify(const std::string &orig_path, const std::string &locked_path, const std::string &lib_path,
	       const std::string &key_path, const std::string &mode, std::uint64_t budget,
	       std::uint64_t seed, const std::string &out_path)
{
	CellLibrary lib = load_library(slurp(lib_path));
	Netlist orig = parse_netlist(slurp(orig_path), lib);
	Netlist locked = parse_netlist(slurp(locked_path), lib);
	std::string key = read_key(key_path);

	EqMode m;
	if (mode == "exhaustive")
		m = EqMode::exhaustive;
	else if (mode == "random")
		m = EqMode::random;
	else
		m = orig.pis.size() <= 16 ? EqMode::exhaustive : EqMode::random;

	EquivalenceVerdict v = check_equivalence(orig, locked, lib, key, m, budget, seed);
	json report = base_report(seed, json{{"orig", orig_path}, {"locked", locked_path}});
	report["equivalence"] = to_json(v);
	emit(report, out_path);
	if (!v.ok()) {
		std::cerr << "mismatch at PO '" << v.mismatch->po << "', cycle " << v.mismatch->cycle << "\n";
		return 3;
	}
	return 0;
}

int cmd_attack(const std::string &locked_path, const std::string &lib_path, const std::string &key_path,
	       double x_threshold, const std::string &out_path)
{
	StageClock clock;
	CellLibrary lib = load_library(slurp(lib_path));
	Netlist locked = parse_netlist(slurp(locked_path), lib);
	std::string key = read_key(key_path);
	clock.mark("parse");

	std::vector<std::string> selects = find_key_selects(locked, lib);
	StructureAttackOptions opts;
	opts.x_threshold = x_threshold;
	AttackResult raw = local_structure_attack(locked, lib, selects, opts);
	AttackResult scored = score_attack(raw.predictions, key);
	clock.mark("local_structure");

	int zero_signal = 0, nonzero_signal = 0, max_signal = 0;
	for (size_t i = 0; i < selects.size(); ++i) {
		ProbeResult pr = constant_prop_probe(locked, lib, (int)i);
		(pr.signal() == 0 ? zero_signal : nonzero_signal)++;
		max_signal = std::max(max_signal, pr.signal());
	}
	clock.mark("constant_prop");

	json report = base_report(0, json{{"locked", locked_path}, {"key", key_path}});
	report["key_length"] = key.size();
	report["local_structure"] = to_json(scored);
	report["local_structure"]["kpa_display"] = format_kpa(scored);
	report["constant_prop"] = json{{"zero_signal_bits", zero_signal},
				       {"nonzero_signal_bits", nonzero_signal},
				       {"max_signal", max_signal}};
	report["timings_ms"] = clock.timings;
	emit(report, out_path);
	return 0;
}

int cmd_export(const std::string &netlist_path, const std::string &lib_path, bool keys_as_inputs,
	       bool ffs_as_pseudo_ports, const std::string &out_path)
{
	CellLibrary lib = load_library(slurp(lib_path));
	Netlist n = parse_netlist(slurp(netlist_path), lib);
	ExportOptions opts;
	opts.keys_as_inputs = keys_as_inputs;
	opts.ffs_as_pseudo_ports = ffs_as_pseudo_ports;
	std::string text = export_bench(n, lib, opts);
	if (out_path.empty())
		std::cout << text;
	else
		spit(out_path, text);
	return 0;
}

} // namespace

int main(int argc, char **argv)
{
	CLI::App app{"netlist hardening via MUX-based logic locking"};
	app.require_subcommand(1);

	std::string netlist_path, lib_path, assets_path, key_path, orig_path, locked_path, out_path, prefix;
	FloorplanFlags fp;
	LockingConfig cfg;
	double clock_period = 1.0, tpc_threshold = 0.1, sigma = -1, x_threshold = 0.1;
	int cycles = 10000, alpha = 3;
	std::uint64_t seed = 1, budget = 10000;
	std::string scheme = "tromux", mode = "auto";
	bool no_verify = false, keys_as_inputs = false, ffs_as_pseudo = false;

	auto *analyze = app.add_subcommand("analyze", "STA, toggle profile and site usage of a netlist");
	analyze->add_option("netlist", netlist_path)->required();
	analyze->add_option("--lib", lib_path, "cell library file")->required();
	analyze->add_option("--clock-period", clock_period, "ns, default 1.0");
	analyze->add_option("--cycles", cycles, "toggle-profile cycles, default 10000");
	analyze->add_option("--seed", seed, "stimulus seed, default 1");
	analyze->add_option("--tpc-threshold", tpc_threshold, "LCN threshold, default 0.1");
	analyze->add_option("-o,--out", out_path, "report path (default stdout)");
	add_floorplan_flags(analyze, fp);

	auto *lock = app.add_subcommand("lock", "two-stage locking; emits .bench/.key/.report.json");
	lock->add_option("netlist", netlist_path)->required();
	lock->add_option("--lib", lib_path)->required();
	lock->add_option("--assets", assets_path, "file with one asset FF name per line");
	lock->add_option("--alpha", alpha, "per-bit timing budget in sites, default 3");
	lock->add_option("--sigma", sigma, "locking delay in ns; default delay(INV)+delay(MUX2)");
	lock->add_option("--seed", seed, "key/configuration seed, default 1");
	lock->add_option("--clock-period", clock_period);
	lock->add_option("--cycles", cycles);
	lock->add_option("--tpc-threshold", tpc_threshold);
	lock->add_option("--scheme", scheme)->check(CLI::IsMember({"tromux", "naive"}));
	lock->add_flag("--no-verify", no_verify, "skip the built-in equivalence check");
	lock->add_option("-o,--out", prefix, "output prefix")->required();
	add_floorplan_flags(lock, fp);

	auto *verify = app.add_subcommand("verify", "equivalence of original vs locked under a key");
	verify->add_option("--orig", orig_path)->required();
	verify->add_option("--locked", locked_path)->required();
	verify->add_option("--lib", lib_path)->required();
	verify->add_option("--key", key_path)->required();
	verify->add_option("--mode", mode)->check(CLI::IsMember({"auto", "exhaustive", "random"}));
	verify->add_option("--budget", budget, "random vectors, default 10000");
	verify->add_option("--seed", seed);
	verify->add_option("-o,--out", out_path);

	auto *attack = app.add_subcommand("attack", "oracle-less attack evaluation of a locked design");
	attack->add_option("locked", locked_path)->required();
	attack->add_option("--lib", lib_path)->required();
	attack->add_option("--key", key_path, "true key, for scoring")->required();
	attack->add_option("--x-threshold", x_threshold, "log-likelihood gap below which a bit is X");
	attack->add_option("-o,--out", out_path);

	auto *exp = app.add_subcommand("export", "decompose into the restricted BENCH cell set");
	exp->add_option("netlist", netlist_path)->required();
	exp->add_option("--lib", lib_path)->required();
	exp->add_flag("--keys-as-inputs", keys_as_inputs, "strip the keychain, expose selects as PIs");
	exp->add_flag("--ffs-as-pseudo-ports", ffs_as_pseudo, "FF outputs become PIs, FF inputs POs");
	exp->add_option("-o,--out", out_path);

	CLI11_PARSE(app, argc, argv);

	try {
		if (analyze->parsed())
			return cmd_analyze(netlist_path, lib_path, fp, clock_period, cycles, seed,
					   tpc_threshold, out_path);
		if (lock->parsed()) {
			cfg.alpha = alpha;
			if (sigma >= 0)
				cfg.sigma = sigma;
			cfg.key_seed = seed;
			cfg.clock_period = clock_period;
			cfg.tpc_threshold = tpc_threshold;
			cfg.cycles = cycles;
			cfg.scheme = scheme == "naive" ? Scheme::naive : Scheme::tromux;
			cfg.self_check = !no_verify;
			return cmd_lock(netlist_path, lib_path, assets_path, fp, cfg, prefix);
		}
		if (verify->parsed())
			return cmd_verify(orig_path, locked_path, lib_path, key_path, mode, budget, seed,
					  out_path);
		if (attack->parsed())
			return cmd_attack(locked_path, lib_path, key_path, x_threshold, out_path);
		if (exp->parsed())
			return cmd_export(netlist_path, lib_path, keys_as_inputs, ffs_as_pseudo, out_path);
	} catch (const Error &e) {
		std::cerr << "error: " << e.what() << "\n";
		return e.exit_code();
	} catch (const std::exception &e) {
		std::cerr << "internal error: " << e.what() << "\n";
		return 4;
	}
	return 1;
}
