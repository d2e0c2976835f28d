#!/usr/bin/env python3
"""Spatiotemporal analytics: clustering, bursts, and co-occurrence.

Events pair a dated entity with a located one from the same chunk. The
clustering is density-based with a joint neighborhood (within 50 km AND
within 7 days by default); bursts flag windows whose counts jump above the
trailing baseline; the co-occurrence graph counts chunks where two values
appear together.
"""

from datetime import date, timedelta

from stindex import GeoValue, cluster_st, detect_bursts, parse_iso
from stindex.analytics import StEvent

BASE = date(2024, 4, 1)


def event(i, lat, lon, day, place):
    d = BASE + timedelta(days=day)
    return StEvent(
        event_id=i, doc_id="demo", chunk_index=0,
        temporal=parse_iso(d.isoformat()),
        geo=GeoValue(name=place, resolved_name=place, lat=lat, lon=lon,
                     hierarchy={"country": "AU"}, resolution_level="exact",
                     provider="gazetteer"),
    )


events = [
    # a Perth-metro flare-up across three days
    event(0, -31.95, 115.86, 9, "Perth"),
    event(1, -31.74, 115.77, 10, "Joondalup"),
    event(2, -32.06, 115.74, 11, "Fremantle"),
    # a separate pair in the Goldfields
    event(3, -30.75, 121.47, 10, "Kalgoorlie"),
    event(4, -30.75, 121.47, 12, "Kalgoorlie"),
    # an isolated east-coast report
    event(5, -33.87, 151.21, 11, "Sydney"),
    # background activity weeks earlier
    event(6, -31.95, 115.86, 0, "Perth"),
]

clusters, noise = cluster_st(events, eps_km=50, eps_days=7, min_pts=2)
print(f"{len(clusters)} clusters, {len(noise)} noise events")
for c in clusters:
    print(f"  cluster {c.cluster_id}: events {c.member_event_ids} "
          f"centred at ({c.centroid_lat:.2f}, {c.centroid_lon:.2f}) "
          f"{c.start} .. {c.end}")
print("  noise:", noise)

bursts = detect_bursts([e.date for e in events] + [BASE + timedelta(days=10)] * 3,
                       window_days=3, step_days=1, z=1.5, min_count=3)
print(f"\n{len(bursts)} burst window(s)")
for b in bursts:
    print(f"  {b.start} .. {b.end}: {b.observed} events "
          f"(baseline {b.baseline_mean:.2f} +/- {b.baseline_std:.2f})")
