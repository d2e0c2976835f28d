"""ISO 8601 temporal values: parsing, serialization, exact match, and
rule-based resolution of relative expressions against an anchor.

Values are naive local timestamps (no timezones); granularity runs from
year down to minute. Intervals serialize as "start/end" with both sides at
the value's granularity.
"""

from __future__ import annotations

import calendar
import re
from dataclasses import dataclass, replace
from datetime import date, datetime, timedelta

from .errors import BadIso, UnresolvableExpression

GRANULARITIES = ("year", "month", "day", "hour", "minute")

# granularity -> strftime-style serialization depth
_FORMATS = {
    "year": "{0.year:04d}",
    "month": "{0.year:04d}-{0.month:02d}",
    "day": "{0.year:04d}-{0.month:02d}-{0.day:02d}",
    "hour": "{0.year:04d}-{0.month:02d}-{0.day:02d}T{0.hour:02d}",
    "minute": "{0.year:04d}-{0.month:02d}-{0.day:02d}T{0.hour:02d}:{0.minute:02d}",
}

_INSTANT_RE = re.compile(
    r"^(\d{4})(?:-(\d{2})(?:-(\d{2})(?:T(\d{2})(?::(\d{2}))?)?)?)?$"
)


@dataclass(frozen=True)
class TemporalValue:
    """A normalized temporal value at a stated granularity.

    ``start`` (and ``end`` for intervals) carry the populated calendar
    fields; anything finer than the granularity is zeroed and ignored.
    """

    kind: str  # "instant" | "interval"
    start: datetime
    granularity: str
    end: datetime | None = None
    original_expression: str = ""
    relative: bool = False

    @property
    def date(self) -> date:
        """Calendar date of the start timestamp (intervals contribute start)."""
        return self.start.date()

    def serialize(self) -> str:
        fmt = _FORMATS[self.granularity]
        if self.kind == "interval":
            assert self.end is not None
            return f"{fmt.format(self.start)}/{fmt.format(self.end)}"
        return fmt.format(self.start)

    def to_payload(self) -> dict:
        return {
            "type": "temporal",
            "iso": self.serialize(),
            "kind": self.kind,
            "granularity": self.granularity,
            "relative": self.relative,
            "original_expression": self.original_expression,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "TemporalValue":
        value = parse_iso(payload["iso"])
        return replace(
            value,
            relative=bool(payload.get("relative", False)),
            original_expression=payload.get("original_expression", ""),
        )


def _parse_instant(text: str, offset: int) -> tuple[datetime, str]:
    """Parse one side of an ISO value; returns (timestamp, granularity)."""
    m = _INSTANT_RE.match(text)
    if not m:
        # best-effort failure position: first char that breaks the grammar
        pos = offset
        for i, ch in enumerate(text):
            if not (ch.isdigit() or ch in "-T:"):
                pos = offset + i
                break
        raise BadIso(f"not an ISO 8601 value: {text!r}", pos)
    year, month, day, hour, minute = m.groups()
    granularity = "year"
    if month is not None:
        granularity = "month"
    if day is not None:
        granularity = "day"
    if hour is not None:
        granularity = "hour"
    if minute is not None:
        granularity = "minute"

    y = int(year)
    mo = int(month) if month else 1
    d = int(day) if day else 1
    h = int(hour) if hour else 0
    mi = int(minute) if minute else 0
    if not 1 <= mo <= 12:
        raise BadIso(f"month {mo} out of range in {text!r}", offset + 5)
    if day is not None and not 1 <= d <= calendar.monthrange(y, mo)[1]:
        raise BadIso(f"day {d} invalid for {y}-{mo:02d} in {text!r}", offset + 8)
    if hour is not None and not 0 <= h <= 23:
        raise BadIso(f"hour {h} out of range in {text!r}", offset + 11)
    if minute is not None and not 0 <= mi <= 59:
        raise BadIso(f"minute {mi} out of range in {text!r}", offset + 14)
    return datetime(y, mo, d, h, mi), granularity


def parse_iso(text: str) -> TemporalValue:
    """Parse an ISO 8601 instant or "start/end" interval.

    Accepts year/month/day/hour/minute forms; granularity is the narrowest
    populated field. Raises BadIso on syntax or calendar violations.
    """
    if not isinstance(text, str) or not text.strip():
        raise BadIso("empty temporal value", 0)
    text = text.strip()
    if "/" in text:
        left, sep, right = text.partition("/")
        if "/" in right:
            raise BadIso("interval may contain only one '/'", len(left) + 1 + right.index("/"))
        start, g1 = _parse_instant(left, 0)
        end, g2 = _parse_instant(right, len(left) + 1)
        if g1 != g2:
            raise BadIso(f"interval sides differ in granularity ({g1} vs {g2})", len(left) + 1)
        if start > end:
            raise BadIso("interval start is after its end", 0)
        return TemporalValue(kind="interval", start=start, end=end, granularity=g1)
    start, granularity = _parse_instant(text, 0)
    return TemporalValue(kind="instant", start=start, granularity=granularity)


def temporal_exact_match(a: TemporalValue, b: TemporalValue) -> bool:
    """True iff kind, granularity, and all populated fields agree."""
    return (
        a.kind == b.kind
        and a.granularity == b.granularity
        and a.serialize() == b.serialize()
    )


# -- relative expression resolution ----------------------------------------

_NUMBER_WORDS = {
    "one": 1, "two": 2, "three": 3, "four": 4, "five": 5, "six": 6,
    "seven": 7, "eight": 8, "nine": 9, "ten": 10, "eleven": 11, "twelve": 12,
    "a": 1, "an": 1,
}

_WEEKDAYS = {
    "monday": 0, "tuesday": 1, "wednesday": 2, "thursday": 3,
    "friday": 4, "saturday": 5, "sunday": 6,
}

_NUM = r"(\d+|" + "|".join(_NUMBER_WORDS) + r")"
_N_UNITS_RE = re.compile(
    _NUM + r" (day|days|week|weeks|month|months) (later|earlier|ago|after|before)$"
)
_WEEKDAY_RE = re.compile(r"(next|last) (" + "|".join(_WEEKDAYS) + r")$")
_SPAN_RE = re.compile(r"(this|next|last) (week|month|year)$")

_GRAN_ORDER = {g: i for i, g in enumerate(GRANULARITIES)}


def _normalize_expression(expression: str) -> str:
    text = expression.strip().lower()
    text = re.sub(r"\s+", " ", text)
    # leading articles are optional: "the next day" == "next day"
    text = re.sub(r"^the ", "", text)
    return text


def _add_months(d: date, n: int) -> date:
    """Month arithmetic with the day clamped to the target month's length."""
    month_index = d.year * 12 + (d.month - 1) + n
    year, month = divmod(month_index, 12)
    month += 1
    day = min(d.day, calendar.monthrange(year, month)[1])
    return date(year, month, day)


def _require_granularity(anchor: TemporalValue, needed: str, expression: str) -> None:
    if anchor.relative:
        raise UnresolvableExpression(f"anchor for {expression!r} must be absolute")
    if _GRAN_ORDER[anchor.granularity] < _GRAN_ORDER[needed]:
        raise UnresolvableExpression(
            f"anchor granularity {anchor.granularity!r} too coarse for {expression!r}"
        )


def _day_instant(d: date, expression: str) -> TemporalValue:
    return TemporalValue(
        kind="instant",
        start=datetime(d.year, d.month, d.day),
        granularity="day",
        original_expression=expression,
        relative=True,
    )


def resolve_relative(expression: str, anchor: TemporalValue) -> TemporalValue:
    """Resolve a relative expression against an absolute anchor.

    Supported inventory: today/tomorrow/yesterday, the next/previous day,
    "N days|weeks|months later|earlier" (digits or number words), next/last
    <weekday>, and this/next/last week|month|year. Raises
    UnresolvableExpression for anything else.
    """
    text = _normalize_expression(expression)

    simple_days = {
        "today": 0,
        "tomorrow": 1,
        "next day": 1,
        "yesterday": -1,
        "previous day": -1,
        "day before": -1,
        "day after": 1,
    }
    if text in simple_days:
        _require_granularity(anchor, "day", expression)
        return _day_instant(anchor.date + timedelta(days=simple_days[text]), expression)

    m = _N_UNITS_RE.match(text)
    if m:
        raw_n, unit, direction = m.groups()
        n = _NUMBER_WORDS.get(raw_n) or int(raw_n)
        if direction in ("earlier", "ago", "before"):
            n = -n
        _require_granularity(anchor, "day", expression)
        base = anchor.date
        if unit.startswith("day"):
            return _day_instant(base + timedelta(days=n), expression)
        if unit.startswith("week"):
            return _day_instant(base + timedelta(weeks=n), expression)
        return _day_instant(_add_months(base, n), expression)

    m = _WEEKDAY_RE.match(text)
    if m:
        direction, weekday = m.groups()
        _require_granularity(anchor, "day", expression)
        target = _WEEKDAYS[weekday]
        base = anchor.date
        if direction == "next":
            ahead = (target - base.weekday() + 7) % 7 or 7
            return _day_instant(base + timedelta(days=ahead), expression)
        back = (base.weekday() - target + 7) % 7 or 7
        return _day_instant(base - timedelta(days=back), expression)

    m = _SPAN_RE.match(text)
    if m:
        direction, unit = m.groups()
        shift = {"this": 0, "next": 1, "last": -1}[direction]
        if unit == "week":
            _require_granularity(anchor, "day", expression)
            monday = anchor.date - timedelta(days=anchor.date.weekday())
            monday += timedelta(weeks=shift)
            return TemporalValue(
                kind="interval",
                start=datetime(monday.year, monday.month, monday.day),
                end=datetime.combine(monday + timedelta(days=6), datetime.min.time()),
                granularity="day",
                original_expression=expression,
                relative=True,
            )
        if unit == "month":
            _require_granularity(anchor, "month", expression)
            first = _add_months(anchor.start.date().replace(day=1), shift)
            return TemporalValue(
                kind="instant",
                start=datetime(first.year, first.month, 1),
                granularity="month",
                original_expression=expression,
                relative=True,
            )
        return TemporalValue(
            kind="instant",
            start=datetime(anchor.start.year + shift, 1, 1),
            granularity="year",
            original_expression=expression,
            relative=True,
        )

    raise UnresolvableExpression(f"unsupported relative expression: {expression!r}")


def is_relative_expression(expression: str) -> bool:
    """True iff the expression is in the supported relative inventory."""
    text = _normalize_expression(expression)
    return (
        text in ("today", "tomorrow", "next day", "yesterday", "previous day",
                 "day before", "day after")
        or bool(_N_UNITS_RE.match(text))
        or bool(_WEEKDAY_RE.match(text))
        or bool(_SPAN_RE.match(text))
    )
