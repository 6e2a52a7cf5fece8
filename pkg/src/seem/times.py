"""Lenient timestamp and date-text parsing.

The engine never invents chronology: parsing either succeeds against one of
the known layouts or returns None and the raw text is kept where it was.
"""

from __future__ import annotations

import re
from datetime import date, datetime, timezone

MONTHS = {
    "january": 1, "february": 2, "march": 3, "april": 4, "may": 5,
    "june": 6, "july": 7, "august": 8, "september": 9, "october": 10,
    "november": 11, "december": 12,
}

_MONTH_NAME = r"(?:January|February|March|April|May|June|July|August|September|October|November|December)"

# "January 5, 2024" / "January 5 2024" / "23 January, 2022" / "January 2024" /
# "2024-01-05" / bare year.  Ordered longest-first so the scanner prefers the
# most specific form.
DATE_TEXT = (
    rf"{_MONTH_NAME}\s+\d{{1,2}},?\s+\d{{4}}"
    rf"|\d{{1,2}}\s+{_MONTH_NAME},?\s+\d{{4}}"
    rf"|\d{{4}}-\d{{2}}-\d{{2}}"
    rf"|{_MONTH_NAME}\s+\d{{4}}"
    rf"|\d{{4}}"
)
DATE_TEXT_RE = re.compile(DATE_TEXT)

_MDY_RE = re.compile(rf"({_MONTH_NAME})\s+(\d{{1,2}}),?\s+(\d{{4}})")
_DMY_RE = re.compile(rf"(\d{{1,2}})\s+({_MONTH_NAME}),?\s+(\d{{4}})")
_MY_RE = re.compile(rf"({_MONTH_NAME})\s+(\d{{4}})")
_ISO_DATE_RE = re.compile(r"(\d{4})-(\d{2})-(\d{2})")
_YEAR_RE = re.compile(r"\b(\d{4})\b")

# Session timestamp layouts seen in the supported corpora, tried in order.
_INSTANT_LAYOUTS = (
    "%I:%M %p on %d %B, %Y",
    "%I:%M %p on %d %B %Y",
    "%H:%M on %d %B, %Y",
    "%d %B, %Y",
    "%d %B %Y",
    "%B %d, %Y",
    "%Y/%m/%d (%a) %H:%M",
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%d %H:%M",
    "%Y-%m-%d",
)


def parse_instant(text: str | None) -> datetime | None:
    """Parse an ISO-8601 or corpus-style timestamp to a UTC instant.

    Returns None when no known layout matches; the caller keeps the raw
    string wherever it lives.
    """
    if not text:
        return None
    raw = text.strip()
    if not raw:
        return None
    try:
        parsed = datetime.fromisoformat(raw.replace("Z", "+00:00"))
    except ValueError:
        parsed = None
    if parsed is None:
        for layout in _INSTANT_LAYOUTS:
            try:
                parsed = datetime.strptime(raw, layout)
                break
            except ValueError:
                continue
    if parsed is None:
        return None
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=timezone.utc)
    return parsed.astimezone(timezone.utc)


def resolve_day(text: str | None) -> date | None:
    """Resolve date text to a calendar day; month- or year-only text does not resolve."""
    if not text:
        return None
    m = _ISO_DATE_RE.search(text)
    if m:
        try:
            return date(int(m.group(1)), int(m.group(2)), int(m.group(3)))
        except ValueError:
            return None
    m = _MDY_RE.search(text)
    if m:
        try:
            return date(int(m.group(3)), MONTHS[m.group(1).lower()], int(m.group(2)))
        except ValueError:
            return None
    m = _DMY_RE.search(text)
    if m:
        try:
            return date(int(m.group(3)), MONTHS[m.group(2).lower()], int(m.group(1)))
        except ValueError:
            return None
    return None


def normalize_date_text(text: str) -> str | None:
    """Canonicalize date text: day -> YYYY-MM-DD, month -> YYYY-MM, year -> YYYY."""
    day = resolve_day(text)
    if day is not None:
        return day.isoformat()
    m = _MY_RE.search(text)
    if m:
        return f"{int(m.group(2)):04d}-{MONTHS[m.group(1).lower()]:02d}"
    m = _YEAR_RE.search(text)
    if m:
        return m.group(1)
    return None
