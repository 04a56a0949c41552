"""Turn raw post bodies into plain text plus extracted code blocks.

Forum dumps carry HTML with platform-specific markup. ``clean`` removes
that markup lexically (tag scanner, tolerant of unbalanced tags), pulls
out code-block contents in document order, decodes entities, and
normalizes whitespace in the remaining description. Markdown-style
triple-backtick fences are recognized as code blocks too, since some
dumps keep them unrendered.
"""

from __future__ import annotations

import html
from dataclasses import dataclass
from html.parser import HTMLParser
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .core import Post

# Tags that imply a line break in rendered text; used to keep words from
# gluing together when the markup is stripped.
_BLOCK_TAGS = frozenset(
    "p br div li ul ol blockquote pre h1 h2 h3 h4 h5 h6 hr table tr td th".split()
)
_SKIP_CONTENT_TAGS = frozenset(("script", "style"))


@dataclass(frozen=True)
class CleanPost:
    """Normalized view of a post: plain-text title and description, plus
    the code-block contents in document order."""

    id: str
    title_text: str
    description_text: str
    code_blocks: tuple[str, ...]


class _SegmentScanner(HTMLParser):
    """Splits a body into alternating text and code segments.

    Any ``<pre>`` region (with or without an inner ``<code>``) counts as a
    code block. ``<code>`` outside ``<pre>`` is inline; its text stays in
    the description.
    """

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.segments: list[tuple[str, str]] = []  # ("text"|"code", content)
        self._pre_depth = 0
        self._skip_depth = 0
        self._buf: list[str] = []

    def _flush(self, kind: str) -> None:
        if self._buf:
            self.segments.append((kind, "".join(self._buf)))
            self._buf = []

    def handle_starttag(self, tag: str, attrs) -> None:
        if tag in _SKIP_CONTENT_TAGS:
            if self._pre_depth == 0:
                self._buf.append("\n")  # script/style render as a break
            self._skip_depth += 1
            return
        if tag == "pre":
            if self._pre_depth == 0:
                self._flush("text")
            self._pre_depth += 1
            return
        if self._pre_depth > 0:
            if tag == "br":
                self._buf.append("\n")
        elif tag in _BLOCK_TAGS:
            self._buf.append("\n")

    def handle_startendtag(self, tag: str, attrs) -> None:
        if tag != "pre":  # a self-closing <pre/> holds no code
            self.handle_starttag(tag, attrs)

    def handle_endtag(self, tag: str) -> None:
        if tag in _SKIP_CONTENT_TAGS:
            if self._skip_depth > 0:
                self._skip_depth -= 1
            return
        if tag == "pre":
            if self._pre_depth > 0:
                self._pre_depth -= 1
                if self._pre_depth == 0:
                    self._flush("code")
            return
        if self._pre_depth == 0 and tag in _BLOCK_TAGS:
            self._buf.append("\n")

    def handle_data(self, data: str) -> None:
        if self._skip_depth == 0:
            self._buf.append(data)

    def close(self) -> None:
        super().close()
        # Unclosed <pre> at EOF: recover by keeping what we saw as code.
        self._flush("code" if self._pre_depth > 0 else "text")
        self._pre_depth = 0


def _split_fences(text: str) -> list[tuple[str, str]]:
    """Extract complete triple-backtick fenced blocks from a text segment.

    A fence opens on a line starting with three backticks whose remainder
    has no backtick (an optional language tag), and closes on a later line
    holding three backticks alone. An opener with no closer is left in the
    text untouched.
    """

    lines = text.split("\n")
    out: list[tuple[str, str]] = []
    text_acc: list[str] = []
    i = 0
    while i < len(lines):
        line = lines[i]
        stripped = line.lstrip()
        if stripped.startswith("```") and "`" not in stripped[3:]:
            close = None
            for j in range(i + 1, len(lines)):
                if lines[j].strip() == "```":
                    close = j
                    break
            if close is not None:
                if text_acc:
                    out.append(("text", "\n".join(text_acc)))
                    text_acc = []
                out.append(("code", "\n".join(lines[i + 1 : close])))
                i = close + 1
                continue
        text_acc.append(line)
        i += 1
    if text_acc:
        out.append(("text", "\n".join(text_acc)))
    return out


def normalize_whitespace(text: str) -> str:
    """Collapse whitespace runs to single spaces and trim the ends."""

    return " ".join(text.split())


def word_tokens(text: str) -> list[str]:
    """Tokens are maximal runs of non-whitespace characters."""

    return text.split()


def clean(post: "Post") -> CleanPost:
    """Normalize a raw post into plain text and extracted code blocks.

    Every ``<pre>``-based code region and complete fenced block is removed
    from the description and its inner text (entities decoded) appended to
    ``code_blocks``; inline ``<code>`` spans stay in the description as
    their inner text. Remaining tags are stripped, entities decoded, and
    description whitespace collapsed. Unbalanced markup is recovered from
    lexically rather than raised.
    """

    scanner = _SegmentScanner()
    scanner.feed(post.body_html)
    scanner.close()

    description_parts: list[str] = []
    code_blocks: list[str] = []
    for kind, content in scanner.segments:
        if kind == "code":
            code_blocks.append(content.strip())
            continue
        for sub_kind, sub in _split_fences(content):
            if sub_kind == "code":
                code_blocks.append(sub.strip())
            else:
                description_parts.append(sub)

    description = normalize_whitespace(" ".join(description_parts))
    title = normalize_whitespace(html.unescape(post.title))
    return CleanPost(
        id=post.id,
        title_text=title,
        description_text=description,
        code_blocks=tuple(code_blocks),
    )
