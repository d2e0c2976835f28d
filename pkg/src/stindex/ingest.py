"""Document loading and chunking.

Supports raw text, local txt/html/md files, and http(s) URLs (rate-limited
per host). Markup is stripped to plain text; metadata (title, publication
date, source location) is pulled from HTML meta tags or Markdown
front-matter when present. Character offsets count Unicode scalar values.
"""

from __future__ import annotations

import hashlib
import math
import re
import threading
import time
from dataclasses import dataclass
from datetime import date
from html.parser import HTMLParser
from pathlib import Path
from urllib.parse import urlparse

import requests
import yaml

from .errors import EmptyDocument, FetchError, InvalidChunkParams, UnsupportedFormat

SUPPORTED_EXTENSIONS = {".txt", ".html", ".htm", ".md"}

DEFAULT_CHUNK_SIZE = 2000
DEFAULT_CHUNK_OVERLAP = 200

_BLOCK_TAGS = {
    "p", "div", "br", "li", "ul", "ol", "table", "tr", "h1", "h2", "h3",
    "h4", "h5", "h6", "section", "article", "header", "footer", "blockquote",
    "pre", "main", "aside", "figure",
}


@dataclass(frozen=True)
class FetchPolicy:
    min_interval_s: float = 1.0
    timeout_s: float = 30.0


DEFAULT_FETCH_POLICY = FetchPolicy()


@dataclass(frozen=True)
class SourceDocument:
    doc_id: str
    origin: str  # "raw_text" | "file" | "url"
    locator: str
    body: str
    title: str | None = None
    pub_date: date | None = None
    source_location: str | None = None


@dataclass(frozen=True)
class Chunk:
    doc_id: str
    chunk_index: int
    char_start: int
    char_end: int
    text: str
    strategy: str


def compute_doc_id(origin: str, locator: str, body: str) -> str:
    """Deterministic document id over (origin, locator, body)."""
    digest = hashlib.sha256(f"{origin}\x00{locator}\x00{body}".encode("utf-8"))
    return digest.hexdigest()[:16]


class _HtmlToText(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.parts: list[str] = []
        self.title_parts: list[str] = []
        self.meta: dict[str, str] = {}
        self._skip_depth = 0
        self._in_title = False

    def handle_starttag(self, tag, attrs):
        if tag in ("script", "style"):
            self._skip_depth += 1
        elif tag == "title":
            self._in_title = True
        elif tag == "meta":
            attrs = dict(attrs)
            key = attrs.get("name") or attrs.get("property")
            if key and attrs.get("content"):
                self.meta[key.lower()] = attrs["content"]
        if tag in _BLOCK_TAGS:
            self.parts.append("\n\n")

    def handle_endtag(self, tag):
        if tag in ("script", "style") and self._skip_depth:
            self._skip_depth -= 1
        elif tag == "title":
            self._in_title = False
        if tag in _BLOCK_TAGS:
            self.parts.append("\n\n")

    def handle_data(self, data):
        if self._skip_depth:
            return
        if self._in_title:
            self.title_parts.append(data)
        else:
            self.parts.append(data)


def strip_html(html: str) -> tuple[str, dict]:
    """Plain text plus metadata from an HTML document.

    Tags are removed, block elements become paragraph breaks, script/style
    content is dropped, and entities are unescaped.
    """
    parser = _HtmlToText()
    parser.feed(html)
    text = "".join(parser.parts)
    text = re.sub(r"[ \t]*\n[ \t]*", "\n", text)
    text = re.sub(r"\n{2,}", "\n\n", text)
    meta: dict = {}
    title = "".join(parser.title_parts).strip()
    if title:
        meta["title"] = title
    for key in ("date", "pubdate", "article:published_time", "dc.date"):
        if key in parser.meta:
            meta["date"] = parser.meta[key]
            break
    for key in ("geo.placename", "location"):
        if key in parser.meta:
            meta["location"] = parser.meta[key]
            break
    return text.strip(), meta


_FRONT_MATTER_RE = re.compile(r"\A---\n(.*?)\n---\n?", re.DOTALL)


def strip_markdown(markdown: str) -> tuple[str, dict]:
    """Plain text plus front-matter metadata from a Markdown document."""
    meta: dict = {}
    m = _FRONT_MATTER_RE.match(markdown)
    if m:
        try:
            front = yaml.safe_load(m.group(1)) or {}
        except yaml.YAMLError:
            front = {}
        if isinstance(front, dict):
            for key in ("title", "date", "location"):
                if key in front and front[key] is not None:
                    meta[key] = str(front[key])
        markdown = markdown[m.end():]
    lines = []
    in_fence = False
    for line in markdown.split("\n"):
        if line.strip().startswith("```"):
            in_fence = not in_fence
            continue
        if not in_fence:
            if re.match(r"^\s*([-*_]\s*){3,}$", line):  # horizontal rule
                continue
            line = re.sub(r"^#{1,6}\s*", "", line)
            line = re.sub(r"^>\s?", "", line)
            line = re.sub(r"^(\s*)[-*+]\s+", r"\1", line)
            line = re.sub(r"^(\s*)\d+\.\s+", r"\1", line)
        lines.append(line)
    text = "\n".join(lines)
    text = re.sub(r"!\[([^\]]*)\]\([^)]*\)", r"\1", text)
    text = re.sub(r"\[([^\]]+)\]\([^)]*\)", r"\1", text)
    text = re.sub(r"\*\*([^*]+)\*\*", r"\1", text)
    text = re.sub(r"\*([^*]+)\*", r"\1", text)
    text = re.sub(r"__([^_]+)__", r"\1", text)
    text = re.sub(r"`([^`]*)`", r"\1", text)
    text = re.sub(r"\n{3,}", "\n\n", text)
    return text.strip(), meta


def _parse_meta_date(raw: str | None) -> date | None:
    if not raw:
        return None
    m = re.match(r"(\d{4})-(\d{2})-(\d{2})", str(raw))
    if not m:
        return None
    try:
        return date(int(m.group(1)), int(m.group(2)), int(m.group(3)))
    except ValueError:
        return None


# shared per-host rate limiting for URL fetches (the only mutable module state)
_host_last: dict[str, float] = {}
_host_lock = threading.Lock()


def _rate_limit(host: str, min_interval_s: float) -> None:
    with _host_lock:
        last = _host_last.get(host, 0.0)
        delta = min_interval_s - (time.monotonic() - last)
        if delta > 0:
            time.sleep(delta)
        _host_last[host] = time.monotonic()


def _convert(content: str, fmt: str) -> tuple[str, dict]:
    if fmt in ("html", "htm"):
        return strip_html(content)
    if fmt == "md":
        return strip_markdown(content)
    return content.replace("\r\n", "\n").strip(), {}


def load_document(
    locator: str,
    origin: str | None = None,
    *,
    fetch_policy: FetchPolicy = DEFAULT_FETCH_POLICY,
    doc_id: str | None = None,
    title: str | None = None,
    pub_date: date | None = None,
    source_location: str | None = None,
) -> SourceDocument:
    """Load one document from raw text, a local file, or a URL.

    ``origin`` is auto-detected when omitted: http(s) locators are URLs,
    anything else is a file path. Pass origin="raw_text" to treat the
    locator itself as the document body (kept verbatim).
    """
    if origin is None:
        origin = "url" if locator.startswith(("http://", "https://")) else "file"

    meta: dict = {}
    if origin == "raw_text":
        body = locator
        locator = ""
    elif origin == "file":
        path = Path(locator)
        ext = path.suffix.lower()
        if ext not in SUPPORTED_EXTENSIONS:
            raise UnsupportedFormat(f"unsupported document format {ext!r} ({locator})")
        try:
            content = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise FetchError(f"cannot read {locator}: {exc}") from exc
        body, meta = _convert(content, ext.lstrip("."))
    elif origin == "url":
        parsed = urlparse(locator)
        _rate_limit(parsed.netloc, fetch_policy.min_interval_s)
        try:
            resp = requests.get(locator, timeout=fetch_policy.timeout_s)
            resp.raise_for_status()
        except requests.RequestException as exc:
            raise FetchError(f"cannot fetch {locator}: {exc}") from exc
        ctype = (resp.headers.get("content-type") or "").split(";")[0].strip()
        ext = Path(parsed.path).suffix.lower().lstrip(".")
        if ctype == "text/html" or ext in ("html", "htm"):
            fmt = "html"
        elif ctype == "text/markdown" or ext == "md":
            fmt = "md"
        elif ctype.startswith("text/") or ext in ("txt", ""):
            fmt = "txt"
        else:
            raise UnsupportedFormat(f"unsupported content type {ctype!r} at {locator}")
        body, meta = _convert(resp.text, fmt)
    else:
        raise ValueError(f"unknown origin {origin!r}")

    if not body.strip():
        raise EmptyDocument(f"document body is empty ({origin} {locator!r})")

    return SourceDocument(
        doc_id=doc_id or compute_doc_id(origin, locator, body),
        origin=origin,
        locator=locator,
        body=body,
        title=title or meta.get("title"),
        pub_date=pub_date or _parse_meta_date(meta.get("date")),
        source_location=source_location or meta.get("location"),
    )


def expected_chunk_count(length: int, size: int, overlap: int) -> int:
    """Sliding-window chunk count: max(1, ceil((len - overlap) / (size - overlap)))."""
    return max(1, math.ceil((length - overlap) / (size - overlap)))


def _sliding_spans(start: int, end: int, size: int, overlap: int) -> list[tuple[int, int]]:
    stride = size - overlap
    spans = []
    pos = start
    while True:
        span_end = min(pos + size, end)
        spans.append((pos, span_end))
        if span_end >= end:
            return spans
        pos += stride


def _paragraph_spans(body: str) -> list[tuple[int, int]]:
    """Paragraph spans tiling [0, len): each span runs to the next paragraph."""
    starts = [0]
    for m in re.finditer(r"\n{2,}", body):
        if m.end() < len(body):
            starts.append(m.end())
    spans = []
    for i, s in enumerate(starts):
        e = starts[i + 1] if i + 1 < len(starts) else len(body)
        spans.append((s, e))
    return spans


def _pack_paragraphs(body: str, size: int, overlap: int) -> list[tuple[int, int]]:
    spans = []
    for p_start, p_end in _paragraph_spans(body):
        if p_end - p_start > size:
            # oversized paragraph: fall back to a sliding window inside it
            spans.extend(_sliding_spans(p_start, p_end, size, overlap))
            continue
        if spans and spans[-1][1] == p_start and p_end - spans[-1][0] <= size:
            spans[-1] = (spans[-1][0], p_end)
        else:
            spans.append((p_start, p_end))
    return spans


def _element_spans(body: str, size: int) -> list[tuple[int, int]]:
    threshold = size / 10
    spans = []
    for p_start, p_end in _paragraph_spans(body):
        if spans and spans[-1][1] == p_start and spans[-1][1] - spans[-1][0] < threshold:
            spans[-1] = (spans[-1][0], p_end)
        else:
            spans.append((p_start, p_end))
    # a trailing short block merges backward
    if len(spans) >= 2 and spans[-1][1] - spans[-1][0] < threshold:
        spans[-2] = (spans[-2][0], spans[-1][1])
        spans.pop()
    return spans


def chunk_document(
    doc: SourceDocument,
    strategy: str = "sliding_window",
    size: int = DEFAULT_CHUNK_SIZE,
    overlap: int = DEFAULT_CHUNK_OVERLAP,
    boundary_scorer=None,
) -> list[Chunk]:
    """Split a document body into chunks covering [0, len(body)).

    sliding_window uses stride = size - overlap; paragraph packs consecutive
    paragraphs greedily up to size (oversized paragraphs fall back to a
    sliding window internally); element keeps one markup-derived block per
    chunk, merging blocks shorter than size/10. The semantic strategy is a
    seam: a boundary_scorer callable may return split offsets, and without
    one it degrades to the paragraph strategy.
    """
    if size <= 0:
        raise InvalidChunkParams(f"chunk size must be positive, got {size}")
    if overlap < 0 or overlap >= size:
        raise InvalidChunkParams(f"overlap must satisfy 0 <= overlap < size, got {overlap}")

    body = doc.body
    label = strategy
    if strategy == "sliding_window":
        spans = _sliding_spans(0, len(body), size, overlap)
    elif strategy == "paragraph":
        spans = _pack_paragraphs(body, size, overlap)
    elif strategy == "element":
        spans = _element_spans(body, size)
    elif strategy == "semantic":
        if boundary_scorer is None:
            spans = _pack_paragraphs(body, size, overlap)
            label = "paragraph"
        else:
            cuts = sorted({c for c in boundary_scorer(body) if 0 < c < len(body)})
            edges = [0, *cuts, len(body)]
            spans = list(zip(edges, edges[1:]))
    else:
        raise ValueError(f"unknown chunking strategy {strategy!r}")

    return [
        Chunk(
            doc_id=doc.doc_id,
            chunk_index=i,
            char_start=s,
            char_end=e,
            text=body[s:e],
            strategy=label,
        )
        for i, (s, e) in enumerate(spans)
    ]
