"""Codebook container and versioned file format.

A codebook is an ordered set of Grassmann codeword representatives with
shape metadata.  Files are JSON with entries serialized as [re, im] pairs
via repr(), which round-trips float64 exactly.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import ShapeError
from .linalg import check_stiefel, min_chordal_distance

FORMAT_VERSION = 1

METHODS = ("exp-map", "cube-split", "manopt", "manopt-nmse", "external")


@dataclass(frozen=True)
class Codebook:
    """Ordered Grassmann constellation on G(t, m).

    bits is the largest B with 2^B <= |points| (equal to log2|points| when
    the cardinality is a power of two, which only cube-split may violate).
    Bit labels are the natural binary point indices.
    """

    t: int
    m: int
    points: np.ndarray  # (K, t, m) complex128
    method: str
    params: dict[str, Any] = field(default_factory=dict)
    source_digest: str | None = None

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=complex))
        object.__setattr__(self, "points", pts)
        if pts.ndim != 3 or pts.shape[1:] != (self.t, self.m):
            raise ShapeError(
                f"points shape {pts.shape} inconsistent with (K, {self.t}, {self.m})"
            )
        if self.method not in METHODS:
            raise ValueError(f"unknown method tag {self.method!r}")

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def bits(self) -> int:
        return int(math.floor(math.log2(self.size)))

    @property
    def rate(self) -> float:
        """Transmission rate log2|points| / T in bit/sym."""
        return math.log2(self.size) / self.t

    def validate(self) -> None:
        """Check every point's orthonormality and pairwise distinctness."""
        if self.size < 2:
            raise ShapeError("codebook must contain at least 2 points")
        for p in self.points:
            check_stiefel(p)
        if min_chordal_distance(self.points) <= 0.0:
            raise ValueError("codebook contains duplicated points")

    def mcd(self) -> float:
        return min_chordal_distance(self.points)

    def digest(self) -> str:
        """SHA-256 over the exact serialized entries and shape metadata."""
        h = hashlib.sha256()
        h.update(f"{self.t},{self.m},{self.size},{self.method};".encode())
        h.update(self.points.tobytes())
        return h.hexdigest()

    def to_dict(self) -> dict[str, Any]:
        entries = [
            [[z.real, z.imag] for z in p.ravel()] for p in self.points
        ]
        doc = {
            "format_version": FORMAT_VERSION,
            "method": self.method,
            "T": self.t,
            "M": self.m,
            "B": self.bits,
            "size": self.size,
            "params": self.params,
            "entries": entries,
        }
        if self.source_digest is not None:
            doc["source_digest"] = self.source_digest
        return doc

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f)
            f.write("\n")

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "Codebook":
        if doc.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported format_version {doc.get('format_version')}")
        t, m, k = doc["T"], doc["M"], doc["size"]
        flat = np.array(doc["entries"], dtype=float)
        if flat.shape != (k, t * m, 2):
            raise ShapeError(f"entry block has shape {flat.shape}")
        pts = (flat[..., 0] + 1j * flat[..., 1]).reshape(k, t, m)
        return cls(
            t=t,
            m=m,
            points=pts,
            method=doc["method"],
            params=doc.get("params", {}),
            source_digest=doc.get("source_digest"),
        )

    @classmethod
    def load(cls, path) -> "Codebook":
        with open(path) as f:
            return cls.from_dict(json.load(f))


def rate_of(codebook: Codebook) -> float:
    return codebook.rate
