#!/usr/bin/env python3
"""Toponym resolution with document-context correction.

"WA" means Washington to a gazetteer sorted by population, but in a
document that has been talking about Perth and Fremantle it means Western
Australia. The geocoder resolves names through a fallback ladder (bias
country, admin qualifier, bare name) and then re-checks ambiguous names
against the document's running country tally.
"""

from collections import Counter

from stindex import GeocodingService, haversine_km, load_default_gazetteer

service = GeocodingService(load_default_gazetteer())

for name in ("Perth", "Fremantle", "Australia", "Atlantis"):
    v = service.geocode(name)
    where = f"({v.lat}, {v.lon}) {v.hierarchy}" if v.resolved else "unresolved"
    print(f"{name:>12} -> {v.resolution_level:<18} {where}")

print("\nqualifiers disambiguate:")
print("  Perth + bias GB ->", service.geocode("Perth", bias="GB").hierarchy)
print("  Perth + admin 'Scotland' ->",
      service.geocode("Perth", admin_hint="Scotland").hierarchy)

print("\nthe ambiguous abbreviation:")
unbiased = service.geocode("WA")
print(f"  WA with no context -> {unbiased.resolved_name} ({unbiased.country})")
corrected = service.apply_context_correction(unbiased, Counter({"AU": 5}))
print(f"  WA after five Australian mentions -> "
      f"{corrected.resolved_name} ({corrected.country})")

perth = service.geocode("Perth", bias="AU")
fremantle = service.geocode("Fremantle")
print(f"\nPerth-Fremantle distance: "
      f"{haversine_km(perth.lat, perth.lon, fremantle.lat, fremantle.lon):.1f} km")
