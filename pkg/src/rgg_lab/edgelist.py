"""Edge-list text format for graphs, masked graphs, masks and patterns.

The format is whitespace separated, 0-indexed, one pair per line, with a header
line ``n <count>``::

    n 4
    0 1
    1 2
    2 3

Masked graphs add a third column with the observed state (``0`` or ``1``); pairs
that are not listed are unknown. Lines starting with ``#`` are comments. Pattern
files may omit the header, in which case the vertex count is inferred.
"""

from __future__ import annotations

from pathlib import Path

from rgg_lab.errors import ValidationError
from rgg_lab.models import Edge, Graph, Mask, MaskedGraph, Pattern, norm_edge


def _parse(text: str, *, source: str) -> tuple[int | None, list[tuple[int, int, int | None]]]:
    n: int | None = None
    rows: list[tuple[int, int, int | None]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        try:
            if fields[0] == "n":
                if n is not None or rows or len(fields) != 2:
                    raise ValueError("misplaced header")
                n = int(fields[1])
                continue
            if len(fields) not in (2, 3):
                raise ValueError("expected 'u v' or 'u v state'")
            state = int(fields[2]) if len(fields) == 3 else None
            if state not in (None, 0, 1):
                raise ValueError("state must be 0 or 1")
            rows.append((int(fields[0]), int(fields[1]), state))
        except ValueError as exc:
            raise ValidationError(f"{source}:{lineno}: {exc}") from exc
    return n, rows


def _require_header(n: int | None, source: str) -> int:
    if n is None:
        raise ValidationError(f"{source}: missing 'n <count>' header")
    return n


def format_graph(graph: Graph) -> str:
    lines = [f"n {graph.n}", *(f"{u} {v}" for u, v in graph.edges())]
    return "\n".join(lines) + "\n"


def format_masked_graph(masked: MaskedGraph) -> str:
    lines = [f"n {masked.n}"]
    lines.extend(
        f"{u} {v} {int(state)}"
        for (u, v), state in zip(masked.mask.edges, masked.states, strict=True)
    )
    return "\n".join(lines) + "\n"


def parse_graph(text: str, *, source: str = "<graph>") -> Graph:
    n, rows = _parse(text, source=source)
    return Graph.from_edges(_require_header(n, source), [(u, v) for u, v, _ in rows])


def parse_masked_graph(text: str, *, source: str = "<masked graph>") -> MaskedGraph:
    n, rows = _parse(text, source=source)
    size = _require_header(n, source)
    states: dict[Edge, bool] = {}
    for u, v, state in rows:
        if state is None:
            raise ValidationError(f"{source}: masked graphs need a state column")
        states[norm_edge(u, v)] = bool(state)
    mask = Mask.from_edges(size, states)
    return MaskedGraph(mask=mask, states=tuple(states[e] for e in mask.edges))


def parse_mask(text: str, *, source: str = "<mask>") -> Mask:
    n, rows = _parse(text, source=source)
    return Mask.from_edges(_require_header(n, source), [(u, v) for u, v, _ in rows])


def parse_pattern(text: str, *, source: str = "<pattern>") -> Pattern:
    n, rows = _parse(text, source=source)
    edges = [(u, v) for u, v, _ in rows]
    if not edges:
        raise ValidationError(f"{source}: a pattern needs at least one edge")
    pattern = Pattern.from_edges(edges)
    if n is not None and n != pattern.k:
        raise ValidationError(f"{source}: header says n={n} but {pattern.k} vertices are used")
    return pattern


def read_mask(path: Path) -> Mask:
    return parse_mask(path.read_text(encoding="utf-8"), source=str(path))


def read_pattern(path: Path) -> Pattern:
    return parse_pattern(path.read_text(encoding="utf-8"), source=str(path))


def write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
