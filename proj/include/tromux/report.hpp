#pragma once

#include "attack.hpp"
#include "locking.hpp"
#include "sim.hpp"
#include "timing.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>

namespace tromux {

inline constexpr const char *kToolVersion = "0.1.0";

using json = nlohmann::ordered_json;

// FNV-1a, used to fingerprint input files in reports.
inline std::string digest(const std::string &bytes)
{
	std::uint64_t h = 1469598103934665603ull;
	for (unsigned char c : bytes) {
		h ^= c;
		h *= 1099511628211ull;
	}
	char buf[17];
	std::snprintf(buf, sizeof(buf), "%016llx", (unsigned long long)h);
	return buf;
}

inline json to_json(const SiteUsage &u)
{
	return json{{"occupied", u.occupied}, {"open", u.open}, {"utilization", u.utilization}};
}

inline json to_json(const EquivalenceVerdict &v)
{
	json j{{"mode", v.mode == EqMode::exhaustive ? "exhaustive" : "random"},
	       {"vectors_tested", v.vectors_tested},
	       {"mismatch", nullptr}};
	if (v.mismatch) {
		j["mismatch"] = json{{"cycle", v.mismatch->cycle},
				     {"po", v.mismatch->po},
				     {"expected", v.mismatch->expected},
				     {"got", v.mismatch->got},
				     {"inputs", v.mismatch->inputs}};
	}
	return j;
}

inline json to_json(const AttackResult &r)
{
	json preds = json::object();
	for (const auto &[i, p] : r.predictions)
		preds[std::to_string(i)] = std::string(1, p);
	return json{{"ac", r.ac},
		    {"pc", r.pc},
		    {"kpa", r.kpa ? json(*r.kpa) : json(nullptr)},
		    {"x_count", r.x_count},
		    {"predictions", preds}};
}

inline json to_json(const TroMuxRecord &r)
{
	return json{{"locked_cell", r.locked_cell},
		    {"original_type", r.original_type},
		    {"implemented_type", r.implemented_type},
		    {"mux_cell", r.mux_cell},
		    {"inv_cell", r.inv_cell ? json(*r.inv_cell) : json(nullptr)},
		    {"key_index", r.key_index},
		    {"key_bit", r.key_bit},
		    {"config", r.config}};
}

inline json to_json(const HardenReport &r)
{
	json j{{"site_usage_before", to_json(r.usage_before)},
	       {"site_usage_after", to_json(r.usage_after)},
	       {"locked_assets", r.assets_locked},
	       {"assets", r.assets_total},
	       {"locked_lcc", r.lcc_locked},
	       {"lcc", r.lcc_total},
	       {"key_length", r.key_length},
	       {"shortfall", r.shortfall},
	       {"pool_exhausted", r.pool_exhausted},
	       {"unprotected_pos", r.unprotected_pos},
	       {"equivalence", r.equivalence ? to_json(*r.equivalence) : json(nullptr)}};
	return j;
}

inline std::string format_kpa(const AttackResult &r)
{
	if (!r.kpa)
		return "--";
	char buf[32];
	std::snprintf(buf, sizeof(buf), "%.2f", *r.kpa);
	return buf;
}

} // namespace tromux
