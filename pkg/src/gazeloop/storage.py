"""Line-delimited record files and canonical JSON serialization.

Every artifact this package writes (datasets, detections, annotations,
traces, reports) is a JSONL file: a self-describing header record with a
schema_version field, then one record per line. Serialization is canonical
(sorted keys, no whitespace, repr-roundtripped floats) so identical data
always produces identical bytes.
"""

from __future__ import annotations

import json
from typing import Iterable, Iterator

SCHEMA_VERSION = 1


class DatasetFormatError(ValueError):
    """A record file is malformed; message names the offending line."""


def canonical_dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def write_records(path, header: dict, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_dumps(header) + "\n")
        for rec in records:
            fh.write(canonical_dumps(rec) + "\n")


def records_to_bytes(header: dict, records: Iterable[dict]) -> bytes:
    lines = [canonical_dumps(header)]
    lines.extend(canonical_dumps(rec) for rec in records)
    return ("\n".join(lines) + "\n").encode("utf-8")


def read_records(path, expected_kind: str) -> tuple[dict, list[dict]]:
    """Parse a JSONL artifact. Returns (header, records) or raises
    DatasetFormatError naming the bad line. An empty file yields
    (empty header, no records)."""
    header: dict = {}
    records: list[dict] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise DatasetFormatError(f"{path}: line {lineno}: record is not an object")
            if lineno == 1 or (not header and not records):
                if obj.get("kind") != expected_kind:
                    raise DatasetFormatError(
                        f"{path}: line {lineno}: expected header kind {expected_kind!r}, "
                        f"got {obj.get('kind')!r}")
                if obj.get("schema_version") != SCHEMA_VERSION:
                    raise DatasetFormatError(
                        f"{path}: line {lineno}: unsupported schema_version "
                        f"{obj.get('schema_version')!r}")
                header = obj
            else:
                records.append(obj)
    return header, records


def require_fields(record: dict, fields: Iterable[str], where: str) -> None:
    missing = [f for f in fields if f not in record]
    if missing:
        raise DatasetFormatError(f"{where}: missing fields {missing}")


def iter_kind(records: list[dict], kind: str, where: str) -> Iterator[tuple[int, dict]]:
    for i, rec in enumerate(records):
        if rec.get("kind") != kind:
            raise DatasetFormatError(f"{where}: record {i + 2}: expected kind {kind!r}, "
                                     f"got {rec.get('kind')!r}")
        yield i, rec
