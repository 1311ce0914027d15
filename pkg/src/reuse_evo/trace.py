"""Line-delimited JSON trace records."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Iterable, Iterator, Optional

SCHEMA_VERSION = 1


class TraceError(ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def encode_utility(x: float) -> Optional[float]:
    return None if x == -math.inf else float(x)


def decode_utility(x: Optional[float]) -> float:
    return -math.inf if x is None else float(x)


@dataclass
class TraceRecord:
    iteration: int
    parents: list[int]
    offspring: list[dict]
    pool_sizes: list[int]
    pools: list[list[int]]
    stage_cost: list[float]
    funnel_cost: float
    fitness_cost: float
    panel_ids: list[int]
    panel_utility: float
    incumbent_ids: list[int]
    incumbent_utility: float
    population: list[dict]
    candidates: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["panel_utility"] = encode_utility(self.panel_utility)
        d["incumbent_utility"] = encode_utility(self.incumbent_utility)
        return {"record": "iteration", "schema_version": SCHEMA_VERSION, **d}

    @classmethod
    def from_dict(cls, d: dict) -> "TraceRecord":
        d = dict(d)
        d.pop("record", None)
        d.pop("schema_version", None)
        d["panel_utility"] = decode_utility(d["panel_utility"])
        d["incumbent_utility"] = decode_utility(d["incumbent_utility"])
        return cls(**d)


def dumps(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"), allow_nan=False)


def write_trace(path, header: dict, records: Iterable[TraceRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(header) + "\n")
        for rec in records:
            fh.write(dumps(rec.to_dict()) + "\n")


def iter_trace_lines(path) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TraceError(line_no, f"invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict) or "record" not in obj:
                raise TraceError(line_no, "not a trace record")
            if obj.get("schema_version") != SCHEMA_VERSION:
                raise TraceError(line_no, f"unsupported schema_version {obj.get('schema_version')!r}")
            yield line_no, obj


def read_trace(path) -> tuple[list[dict], list[list[TraceRecord]]]:
    """Headers and their iteration records; a file may hold several runs."""
    headers: list[dict] = []
    runs: list[list[TraceRecord]] = []
    for line_no, obj in iter_trace_lines(path):
        kind = obj["record"]
        if kind == "run":
            headers.append(obj)
            runs.append([])
        elif kind == "iteration":
            if not runs:
                raise TraceError(line_no, "iteration record before run header")
            try:
                runs[-1].append(TraceRecord.from_dict(obj))
            except (KeyError, TypeError) as exc:
                raise TraceError(line_no, f"malformed iteration record ({exc})") from None
        else:
            raise TraceError(line_no, f"unknown record type {kind!r}")
    return headers, runs


def as_jsonable(x: Any) -> Any:
    """Floats and ints from numpy scalars, recursively."""
    if isinstance(x, dict):
        return {str(k): as_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [as_jsonable(v) for v in x]
    if hasattr(x, "item"):
        return x.item()
    return x
