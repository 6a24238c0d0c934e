"""Line-delimited TSV persistence.

Every on-disk artifact is UTF-8 text, one record per line, fields separated
by tabs. The first field names the record kind:

    item    <TAB> id   <TAB> tag1,tag2,...
    like    <TAB> user <TAB> item
    dislike <TAB> user <TAB> item
    pair    <TAB> user <TAB> rec <TAB> other <TAB> {+1|-1}
    pair    <TAB> user <TAB> rec <TAB> other <TAB> label <TAB> source
    pref    <TAB> user <TAB> f1,...,fd <TAB> objective
    sim     <TAB> i    <TAB> j <TAB> cos

Vector files are headerless: ``id<TAB>f1,f2,...,fd``. Floats are written
with ``repr`` so a write/read cycle is bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .model import EXPLICIT, Catalog, PairFeedback, UserId


def format_float(x: float) -> str:
    return repr(float(x))


def format_floats(values) -> str:
    return ",".join(format_float(v) for v in values)


def parse_floats(text: str) -> list[float]:
    return [float(part) for part in text.split(",")]


@dataclass(frozen=True)
class Record:
    """One parsed TSV line: the kind tag plus its remaining fields."""

    kind: str
    fields: tuple[str, ...]


def encode_item(item_id: str, tags) -> str:
    return f"item\t{item_id}\t{','.join(tags)}"


def encode_like(user: UserId, item: str) -> str:
    return f"like\t{user}\t{item}"


def encode_dislike(user: UserId, item: str) -> str:
    return f"dislike\t{user}\t{item}"


def encode_pair(user: UserId, fb: PairFeedback) -> str:
    if fb.source == EXPLICIT:
        sign = "+1" if fb.label > 0 else "-1"
        return f"pair\t{user}\t{fb.rec}\t{fb.other}\t{sign}"
    return (
        f"pair\t{user}\t{fb.rec}\t{fb.other}\t{format_float(fb.label)}\t{fb.source}"
    )


def encode_pref(user: UserId, w, objective: float) -> str:
    return f"pref\t{user}\t{format_floats(w)}\t{format_float(objective)}"


def encode_sim(i: str, j: str, cos: float) -> str:
    return f"sim\t{i}\t{j}\t{format_float(cos)}"


def parse_record(line: str) -> Record:
    parts = line.rstrip("\n").split("\t")
    if len(parts) < 2 or not parts[0]:
        raise ValueError(f"malformed record: {line!r}")
    return Record(parts[0], tuple(parts[1:]))


def decode_pair(record: Record) -> tuple[UserId, PairFeedback]:
    if record.kind != "pair":
        raise ValueError(f"not a pair record: {record.kind!r}")
    if len(record.fields) == 4:
        user, rec, other, raw = record.fields
        if raw not in ("+1", "-1", "1"):
            raise ValueError(f"explicit pair label must be +1 or -1, got {raw!r}")
        return user, PairFeedback(rec, other, float(raw))
    if len(record.fields) == 5:
        user, rec, other, raw, source = record.fields
        return user, PairFeedback(rec, other, float(raw), source=source)
    raise ValueError(f"pair record has {len(record.fields)} fields")


def iter_records(path):
    """Yield Records from a TSV file, skipping blank lines."""
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield parse_record(line)


def write_lines(path, lines) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(line + "\n")


def append_line(path, line) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(line + "\n")


def save_catalog(path, catalog: Catalog) -> None:
    write_lines(
        path, (encode_item(i, catalog.tags_of(i)) for i in catalog.ids)
    )


def load_catalog(path) -> Catalog:
    items = []
    for record in iter_records(path):
        if record.kind != "item":
            raise ValueError(f"unexpected record in catalog file: {record.kind!r}")
        item_id, raw_tags = record.fields[0], record.fields[1] if len(record.fields) > 1 else ""
        tags = [t for t in raw_tags.split(",") if t]
        items.append((item_id, tags))
    return Catalog(items)
