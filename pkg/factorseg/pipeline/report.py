"""The result of a detection run and its JSON form."""

import json
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, NamedTuple

import pandas as pd
import torch

from ..errors import ConfigError
from ..segment import ChangePoint, ChangePointSet, ExaminedNode
from ..utils import to_builtin
from .screening import ScreeningRange
from .segments import BreakClass

ORIGINS = ("common", "idiosyncratic")


class SegmentRecord(NamedTuple):
    start: int
    end: int
    r_hat: int | None
    classification: BreakClass | None
    """Type of the break at the start of this segment; None for the first segment
    and when a neighbour is too short."""
    skipped: str | None = None


def _now() -> str:
    """UTC time of the run, pinned by SOURCE_DATE_EPOCH when it is set."""
    env = os.environ.get("SOURCE_DATE_EPOCH")
    if not env:
        return datetime.now(timezone.utc).isoformat(timespec="seconds")
    try:
        moment = datetime.fromtimestamp(int(env), timezone.utc)
    except ValueError:
        raise ConfigError(f"SOURCE_DATE_EPOCH must be an integer, got {env!r}")
    return moment.isoformat(timespec="seconds")


def _point_dict(point: ChangePoint) -> dict[str, Any]:
    return point._asdict()


def _node_dict(node: ExaminedNode) -> dict[str, Any]:
    record = node._asdict()
    del record["profile"]
    return record


@dataclass
class DetectionReport:
    config: dict[str, Any]
    """Effective configuration, including the seed."""
    n: int
    T: int
    J_star: int
    d_T: int
    min_gap: int
    """Trim actually used, max(d_T, min_gap)."""
    screening: ScreeningRange
    per_k: dict[int, ChangePointSet]
    """Common-component change-points for every screened k."""
    k_star: int
    common_points: ChangePointSet
    idio_points: ChangePointSet
    segments: list[SegmentRecord]
    kbc: pd.DataFrame
    """k_b(c) with columns start, end and one per c."""
    created_at: str = field(default_factory=_now)

    @property
    def cardinality(self) -> dict[int, int]:
        return {k: len(points) for k, points in self.per_k.items()}

    @property
    def inclusion(self) -> dict[int, bool]:
        """Whether the points found with k factors are among those found with k*."""
        chosen = set(self.common_points.locations)
        return {k: set(p.locations) <= chosen for k, p in self.per_k.items()}

    @property
    def c_grid(self) -> list[float]:
        return [float(c) for c in self.kbc.columns[2:]]

    def _kbc_rows(self) -> list[dict[str, Any]]:
        rows = []
        for record in self.kbc.itertuples(index=False):
            start, end, *ks = record
            rows.append(
                dict(
                    start=int(start),
                    end=int(end),
                    k=[None if pd.isna(k) else int(k) for k in ks],
                )
            )
        return rows

    def _profiles(self, points: ChangePointSet) -> list[dict[str, Any]]:
        return [
            dict(
                level=node.level,
                node=node.node,
                start=node.start,
                end=node.end,
                first_b=node.start + self.min_gap,
                curve=node.profile,
            )
            for node in points.nodes
            if node.profile is not None
        ]

    def to_dict(self) -> dict[str, Any]:
        sets = dict(zip(ORIGINS, (self.common_points, self.idio_points)))
        body = {
            "config": self.config,
            "panel": dict(
                n=self.n,
                T=self.T,
                J_star=self.J_star,
                d_T=self.d_T,
                min_gap=self.min_gap,
            ),
            "screening": dict(
                r_lower=self.screening.r_lower,
                r_upper=self.screening.r_upper,
                candidates=list(self.per_k),
                cardinality=list(self.cardinality.values()),
                per_k=[
                    dict(k=k, changepoints=[_point_dict(p) for p in points])
                    for k, points in self.per_k.items()
                ],
            ),
            "k_star": self.k_star,
            "common_changepoints": [_point_dict(p) for p in self.common_points],
            "idio_changepoints": [_point_dict(p) for p in self.idio_points],
            "nodes": {o: [_node_dict(n) for n in s.nodes] for o, s in sets.items()},
            "segments": [record._asdict() for record in self.segments],
            "kbc": dict(c_grid=self.c_grid, rows=self._kbc_rows()),
            "inclusion": self.inclusion,
            "profiles": {o: self._profiles(s) for o, s in sets.items()},
            "created_at": self.created_at,
        }
        return to_builtin(body)

    def canonical(self) -> dict[str, Any]:
        """`to_dict` without the timestamp; equal for runs with equal inputs."""
        body = self.to_dict()
        del body["created_at"]
        return body

    def save(self, path: Path | str) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)
            f.write("\n")

    @classmethod
    def from_dict(cls, body: dict[str, Any]) -> "DetectionReport":
        def points(records) -> tuple[ChangePoint, ...]:
            return tuple(ChangePoint(**r) for r in records)

        def with_nodes(records, origin) -> ChangePointSet:
            # Profiles are either kept for every examined node or for none
            node_records, curves = body["nodes"][origin], body["profiles"][origin]
            profiles = [
                torch.tensor(c["curve"], dtype=torch.float64) for c in curves
            ] or [None] * len(node_records)
            nodes = tuple(
                ExaminedNode(**record, profile=profile)
                for record, profile in zip(node_records, profiles)
            )
            return ChangePointSet(points(records), origin, nodes)

        screening = body["screening"]
        per_k = {
            int(entry["k"]): ChangePointSet(points(entry["changepoints"]), "common")
            for entry in screening["per_k"]
        }

        kbc = body["kbc"]
        columns = [f"{c:g}" for c in kbc["c_grid"]]
        records = [
            dict(start=row["start"], end=row["end"], **dict(zip(columns, row["k"])))
            for row in kbc["rows"]
        ]
        table = pd.DataFrame.from_records(records, columns=["start", "end", *columns])

        panel = body["panel"]
        return cls(
            config=body["config"],
            n=panel["n"],
            T=panel["T"],
            J_star=panel["J_star"],
            d_T=panel["d_T"],
            min_gap=panel["min_gap"],
            screening=ScreeningRange(screening["r_lower"], screening["r_upper"]),
            per_k=per_k,
            k_star=body["k_star"],
            common_points=with_nodes(body["common_changepoints"], "common"),
            idio_points=with_nodes(body["idio_changepoints"], "idiosyncratic"),
            segments=[SegmentRecord(**record) for record in body["segments"]],
            kbc=table,
            created_at=body["created_at"],
        )

    @classmethod
    def load(cls, path: Path | str) -> "DetectionReport":
        with open(path) as f:
            return cls.from_dict(json.load(f))
