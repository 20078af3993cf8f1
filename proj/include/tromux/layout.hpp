#pragma once

#include "netlist.hpp"

#include <cmath>

namespace tromux {

// Row/site accounting that stands in for placement. The security argument at
// this layer is purely about counts of exploitable open sites, so no
// coordinates or legality are modeled.
struct Floorplan {
	int rows = 1;
	int sites_per_row = 1;

	long long total_sites() const { return (long long)rows * sites_per_row; }
};

struct SiteUsage {
	long long occupied = 0;
	long long open = 0;
	double utilization = 0;
};

inline long long total_width(const Netlist &n, const CellLibrary &lib)
{
	long long w = 0;
	for (const auto &c : n.cells)
		w += lib.at(c.type).width;
	return w;
}

inline SiteUsage site_usage(const Netlist &n, const Floorplan &fp, const CellLibrary &lib)
{
	SiteUsage u;
	u.occupied = total_width(n, lib);
	if (u.occupied > fp.total_sites())
		fail(errc::semantic, "FloorplanOverflow",
		     "netlist needs " + std::to_string(u.occupied) + " sites, floorplan has " +
			 std::to_string(fp.total_sites()));
	u.open = fp.total_sites() - u.occupied;
	u.utilization = fp.total_sites() ? double(u.occupied) / double(fp.total_sites()) : 0.0;
	return u;
}

// Smallest near-square grid whose utilization approximates the target within
// one row's granularity.
inline Floorplan make_floorplan(const Netlist &n, const CellLibrary &lib, double target_utilization)
{
	if (!(target_utilization > 0.0) || target_utilization > 1.0)
		fail(errc::semantic, "BadTarget", "target utilization must be in (0, 1]");
	long long need = total_width(n, lib);
	long long ideal = (long long)std::ceil(double(need) / target_utilization);
	if (ideal < 1)
		ideal = 1;
	Floorplan fp;
	fp.rows = std::max(1, (int)std::floor(std::sqrt((double)ideal)));
	fp.sites_per_row = (int)((ideal + fp.rows - 1) / fp.rows);
	return fp;
}

} // namespace tromux
