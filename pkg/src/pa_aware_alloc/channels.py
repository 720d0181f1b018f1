"""Seeded channel generators and the channel CSV format.

CSV layout::

    # rows=<N_R> cols=<N_T>
    re:im,re:im,...
    ...

one line per matrix row, entries written with 17 significant digits so
that a write/read round trip is bitwise exact.
"""

from __future__ import annotations

from dataclasses import dataclass
import os
import re
from typing import Literal, Union

import numpy as np

__all__ = [
    "ChannelSpec",
    "ChannelFormatError",
    "generate",
    "rayleigh",
    "multipath",
    "numerical_rank",
    "derive_seed",
    "read_channel",
    "write_channel",
    "format_float",
]

_MASK64 = (1 << 64) - 1

# per-purpose constants XORed into the base seed
SEED_PURPOSE = {
    "channel": 0x9E3779B97F4A7C15,
    "rank": 0xBF58476D1CE4E5B9,
    "cell": 0x94D049BB133111EB,
}

_HEADER = re.compile(r"^#\s*rows\s*=\s*(\d+)\s+cols\s*=\s*(\d+)\s*$")


class ChannelFormatError(ValueError):
    """Malformed channel file; the message names the offending line."""


@dataclass(frozen=True)
class ChannelSpec:
    kind: Literal["rayleigh", "multipath"]
    n_r: int
    n_t: int
    seed: int = 0
    n_paths: int = 1

    def __post_init__(self):
        if self.kind not in ("rayleigh", "multipath"):
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if self.n_r < 1 or self.n_t < 1:
            raise ValueError("n_r and n_t must be >= 1")
        if self.kind == "multipath" and not 1 <= self.n_paths <= min(self.n_r, self.n_t):
            raise ValueError(f"n_paths must lie in [1, {min(self.n_r, self.n_t)}]")


def derive_seed(base_seed: int, purpose: str, index: int = 0) -> int:
    """Sub-stream seed: ``(base_seed XOR purpose constant) + index`` modulo 2**64."""
    return ((int(base_seed) ^ SEED_PURPOSE[purpose]) + int(index)) & _MASK64


def _cn(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def rayleigh(n_r: int, n_t: int, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. unit-variance circularly-symmetric complex Gaussian entries."""
    return _cn(rng, (n_r, n_t))


def multipath(n_r: int, n_t: int, n_paths: int, rng: np.random.Generator) -> np.ndarray:
    """Sum of ``n_paths`` random rank-one paths ``g a b^H``.

    Direction vectors have unit norm; path gains are complex Gaussian with
    variance ``n_r * n_t / n_paths`` so that ``E ||H||_F**2 = n_r * n_t``.
    ``n_paths = 0`` gives the zero matrix.
    """
    H = np.zeros((n_r, n_t), dtype=complex)
    if n_paths == 0:
        return H
    a = _cn(rng, (n_r, n_paths))
    b = _cn(rng, (n_t, n_paths))
    a /= np.linalg.norm(a, axis=0)
    b /= np.linalg.norm(b, axis=0)
    g = _cn(rng, n_paths) * np.sqrt(n_r * n_t / n_paths)
    return (a * g) @ b.conj().T


def generate(spec: ChannelSpec) -> np.ndarray:
    """Draw the channel described by ``spec``; deterministic in ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "rayleigh":
        return rayleigh(spec.n_r, spec.n_t, rng)
    return multipath(spec.n_r, spec.n_t, spec.n_paths, rng)


def numerical_rank(H, rel_tol: float = 1e-9) -> int:
    """Number of singular values above ``rel_tol`` times the largest."""
    sv = np.linalg.svd(np.asarray(H, dtype=complex), compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return 0
    return int(np.sum(sv > rel_tol * sv[0]))


def format_float(x: float) -> str:
    return f"{x:.17g}"


def write_channel(H, path: Union[str, os.PathLike]) -> None:
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2:
        raise ValueError("channel must be 2-D")
    lines = [f"# rows={H.shape[0]} cols={H.shape[1]}"]
    for row in H:
        lines.append(",".join(f"{format_float(z.real)}:{format_float(z.imag)}" for z in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_channel(path: Union[str, os.PathLike]) -> np.ndarray:
    """Parse a channel CSV, raising :class:`ChannelFormatError` on bad input."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise ChannelFormatError(f"{path}: empty file")
    m = _HEADER.match(lines[0].strip())
    if not m:
        raise ChannelFormatError(f"{path}:1: expected header '# rows=<N_R> cols=<N_T>'")
    rows, cols = int(m.group(1)), int(m.group(2))
    if rows < 1 or cols < 1:
        raise ChannelFormatError(f"{path}:1: rows and cols must be >= 1")
    data = lines[1:]
    if len(data) != rows:
        raise ChannelFormatError(f"{path}: header declares {rows} rows, found {len(data)}")
    H = np.empty((rows, cols), dtype=complex)
    for r, line in enumerate(data):
        lineno = r + 2
        fields = line.split(",")
        if len(fields) != cols:
            raise ChannelFormatError(
                f"{path}:{lineno}: expected {cols} entries, found {len(fields)}"
            )
        for c, field in enumerate(fields):
            parts = field.strip().split(":")
            try:
                if len(parts) != 2:
                    raise ValueError
                z = complex(float(parts[0]), float(parts[1]))
            except ValueError:
                raise ChannelFormatError(
                    f"{path}:{lineno}:{c + 1}: cannot parse entry {field.strip()!r} as re:im"
                ) from None
            if not np.isfinite(z):
                raise ChannelFormatError(f"{path}:{lineno}:{c + 1}: non-finite entry")
            H[r, c] = z
    return H
