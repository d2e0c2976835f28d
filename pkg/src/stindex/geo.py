"""Toponym resolution: offline gazetteer, optional Nominatim-style HTTP
geocoder, multi-level fallback, document-context correction, and geodesic
math.

The gazetteer is a TSV of (name, alt_names, country_code, admin_name, lat,
lon, population). Country rows leave admin_name empty; admin-region rows
set admin_name equal to their own name; everything else is a locality.
"""

from __future__ import annotations

import math
import threading
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import requests

EARTH_RADIUS_KM = 6371.0

RESOLUTION_LEVELS = (
    "exact", "admin_qualified", "country_qualified", "country_only", "unresolved"
)


def haversine_km(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in kilometres (Earth radius 6371.0 km)."""
    phi1, lam1, phi2, lam2 = map(math.radians, (lat1, lon1, lat2, lon2))
    dphi = phi2 - phi1
    dlam = lam2 - lam1
    a = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(a)))


@dataclass(frozen=True)
class GeoValue:
    """A toponym with its resolution outcome.

    ``lat``/``lon`` are present iff ``resolution_level != "unresolved"``;
    ``hierarchy`` maps level name -> value (country level holds the ISO
    country code) and always carries "country" when coordinates are present.
    """

    name: str
    resolved_name: str | None = None
    lat: float | None = None
    lon: float | None = None
    hierarchy: dict = field(default_factory=dict)
    resolution_level: str = "unresolved"
    provider: str | None = None

    @property
    def resolved(self) -> bool:
        return self.resolution_level != "unresolved"

    @property
    def country(self) -> str | None:
        return self.hierarchy.get("country")

    def to_payload(self) -> dict:
        return {
            "type": "geo",
            "name": self.name,
            "resolved_name": self.resolved_name,
            "lat": self.lat,
            "lon": self.lon,
            "hierarchy": dict(self.hierarchy),
            "resolution_level": self.resolution_level,
            "provider": self.provider,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "GeoValue":
        return cls(
            name=payload["name"],
            resolved_name=payload.get("resolved_name"),
            lat=payload.get("lat"),
            lon=payload.get("lon"),
            hierarchy=dict(payload.get("hierarchy") or {}),
            resolution_level=payload.get("resolution_level", "unresolved"),
            provider=payload.get("provider"),
        )


@dataclass(frozen=True)
class GazetteerRow:
    name: str
    alt_names: tuple[str, ...]
    country: str
    admin: str
    lat: float
    lon: float
    population: int

    @property
    def kind(self) -> str:
        if not self.admin:
            return "country"
        if self.admin == self.name:
            return "admin"
        return "locality"


class Gazetteer:
    """Case-insensitive name/alt-name index over the TSV rows."""

    def __init__(self, rows: list[GazetteerRow]):
        self.rows = rows
        self._index: dict[str, list[GazetteerRow]] = {}
        for row in rows:
            for key in (row.name, *row.alt_names):
                key = key.casefold().strip()
                if key:
                    self._index.setdefault(key, []).append(row)

    @classmethod
    def load(cls, path: str | Path) -> "Gazetteer":
        rows = []
        for raw in Path(path).read_text(encoding="utf-8").splitlines():
            if not raw.strip() or raw.startswith("#"):
                continue
            parts = raw.split("\t")
            if len(parts) != 7:
                raise ValueError(f"gazetteer row has {len(parts)} columns: {raw!r}")
            name, alts, country, admin, lat, lon, pop = parts
            rows.append(
                GazetteerRow(
                    name=name.strip(),
                    alt_names=tuple(a.strip() for a in alts.split("|") if a.strip()),
                    country=country.strip().upper(),
                    admin=admin.strip(),
                    lat=float(lat),
                    lon=float(lon),
                    population=int(pop),
                )
            )
        return cls(rows)

    def candidates(self, name: str) -> list[GazetteerRow]:
        return list(self._index.get(name.casefold().strip(), ()))

    def is_ambiguous(self, name: str) -> bool:
        """True iff the name has candidates in at least two countries."""
        return len({row.country for row in self.candidates(name)}) >= 2


def _pick(rows: list[GazetteerRow]) -> GazetteerRow:
    # descending population, then lexicographic country code
    return sorted(rows, key=lambda r: (-r.population, r.country))[0]


def _row_to_value(name: str, row: GazetteerRow, disambiguated: bool,
                  n_candidates: int) -> GeoValue:
    hierarchy: dict[str, str] = {"country": row.country}
    if row.kind == "country":
        level = "country_only"
    elif row.kind == "admin":
        hierarchy["admin"] = row.admin
        level = "admin_qualified"
    else:
        hierarchy["admin"] = row.admin
        hierarchy["locality"] = row.name
        # a locality picked by tie-break alone is only country-qualified
        level = "exact" if (disambiguated or n_candidates == 1) else "country_qualified"
    return GeoValue(
        name=name,
        resolved_name=row.name,
        lat=row.lat,
        lon=row.lon,
        hierarchy=hierarchy,
        resolution_level=level,
        provider="gazetteer",
    )


class _RateLimiter:
    def __init__(self, min_interval_s: float):
        self.min_interval_s = min_interval_s
        self._last = 0.0
        self._lock = threading.Lock()

    def wait(self) -> None:
        with self._lock:
            delta = self.min_interval_s - (time.monotonic() - self._last)
            if delta > 0:
                time.sleep(delta)
            self._last = time.monotonic()


class _ProviderError(Exception):
    """Internal: HTTP provider failed; fall back to the gazetteer."""


class HttpGeocoder:
    """Nominatim-compatible search client (GET /search?q=...&format=json)."""

    def __init__(self, base_url: str, timeout_s: float = 10.0,
                 min_interval_s: float = 1.0, session=None):
        self.base_url = base_url.rstrip("/")
        self.timeout_s = timeout_s
        self._limiter = _RateLimiter(min_interval_s)
        self._session = session or requests.Session()

    def search(self, name: str, bias: str | None) -> GeoValue | None:
        params = {"q": name, "format": "json", "limit": 5, "addressdetails": 1}
        if bias:
            params["countrycodes"] = bias.lower()
        self._limiter.wait()
        try:
            resp = self._session.get(
                f"{self.base_url}/search", params=params, timeout=self.timeout_s
            )
            resp.raise_for_status()
            hits = resp.json()
        except Exception as exc:
            raise _ProviderError(str(exc)) from exc
        if not isinstance(hits, list) or not hits:
            return None
        hit = hits[0]
        address = hit.get("address") or {}
        country = (address.get("country_code") or "").upper()
        hierarchy = {"country": country} if country else {}
        if address.get("state"):
            hierarchy["admin"] = address["state"]
        locality = address.get("city") or address.get("town") or address.get("village")
        if locality:
            hierarchy["locality"] = locality
        return GeoValue(
            name=name,
            resolved_name=hit.get("display_name") or name,
            lat=float(hit["lat"]),
            lon=float(hit["lon"]),
            hierarchy=hierarchy,
            resolution_level="exact",
            provider="http",
        )


class GeocodingService:
    """Multi-level fallback geocoder over HTTP (optional) and the gazetteer.

    The ladder for a lookup, stopping at the first hit:
      1. exact name restricted to the bias country
      2. exact name restricted to the admin qualifier
      3. exact name unqualified (population tie-break)
    Country and admin-region rows are themselves name matches, so a bare
    country/region name resolves to its centroid. Results are cached by
    (name, bias, admin) and cache hits return the stored value unchanged.
    """

    def __init__(self, gazetteer: Gazetteer, http: HttpGeocoder | None = None):
        self.gazetteer = gazetteer
        self.http = http
        self._cache: dict[tuple, GeoValue] = {}
        self._lock = threading.Lock()

    def geocode(self, name: str, bias: str | None = None,
                admin_hint: str | None = None) -> GeoValue:
        name = name.strip()
        if not name:
            return GeoValue(name=name)
        key = (name.casefold(), (bias or "").upper(), (admin_hint or "").casefold())
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        value = self._geocode_uncached(name, bias, admin_hint)
        with self._lock:
            self._cache.setdefault(key, value)
            return self._cache[key]

    def _geocode_uncached(self, name, bias, admin_hint) -> GeoValue:
        if self.http is not None:
            try:
                hit = self.http.search(name, bias)
                if hit is not None:
                    return hit
            except _ProviderError:
                pass  # offline fallback below
        return self._gazetteer_lookup(name, bias, admin_hint)

    def _gazetteer_lookup(self, name, bias, admin_hint) -> GeoValue:
        rows = self.gazetteer.candidates(name)
        if not rows:
            return GeoValue(name=name)
        if bias:
            biased = [r for r in rows if r.country == bias.upper()]
            if biased:
                return _row_to_value(name, _pick(biased), True, len(rows))
        if admin_hint:
            admin = self._canonical_admin(admin_hint)
            qualified = [r for r in rows if r.admin.casefold() == admin.casefold()]
            if qualified:
                return _row_to_value(name, _pick(qualified), True, len(rows))
        return _row_to_value(name, _pick(rows), False, len(rows))

    def _canonical_admin(self, admin_hint: str) -> str:
        # the hint may itself be an abbreviation ("WA" -> "Western Australia")
        for row in self.gazetteer.candidates(admin_hint):
            if row.kind == "admin":
                return row.name
        return admin_hint

    def apply_context_correction(self, value: GeoValue,
                                 tally: Counter | dict) -> GeoValue:
        """Re-geocode an ambiguous toponym with the document's majority country.

        Fires only when the surface name has candidates in >= 2 countries and
        at least 60% of >= 2 previously resolved entities share one country;
        the biased result is adopted only when it lands in that country.
        """
        tally = Counter(tally)
        total = sum(tally.values())
        if total < 2 or not self.gazetteer.is_ambiguous(value.name):
            return value
        country, count = tally.most_common(1)[0]
        if count / total < 0.6:
            return value
        if value.country == country:
            return value
        corrected = self.geocode(value.name, bias=country)
        if corrected.resolved and corrected.country == country:
            return corrected
        return value


def load_default_gazetteer() -> Gazetteer:
    return Gazetteer.load(Path(__file__).parent / "data" / "gazetteer.tsv")
