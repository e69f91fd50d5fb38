"""Numerical substrate: seeded random substreams, array validation, symmetric
eigen-extremes, and a log-gamma evaluation used by the Gaussian closed forms.

All floating point work is float64. Random streams are counter-based
(Philox) so that substreams derived from (seed, path) are independent and
reproducible across runs; the variate sequence of a stream does not depend
on how draws are chunked into calls.
"""

from __future__ import annotations

import hashlib
import math

import numpy as np

from .errors import DomainError, NumericError, ShapeError

__all__ = [
    "RngStream",
    "as_matrix",
    "as_vector",
    "eig_extremes_symmetric",
    "ensure_finite",
    "log_gamma",
    "sample_std_gaussian_vector",
]


# ---------------------------------------------------------------------------
# random streams
# ---------------------------------------------------------------------------

def _derive_key(seed: int, path: tuple) -> np.ndarray:
    """128-bit Philox key from (seed, substream path) via SHA-256."""
    h = hashlib.sha256()
    h.update(b"trontide-rng")
    h.update(int(seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "big"))
    for part in path:
        if isinstance(part, str):
            h.update(b"s" + part.encode("utf-8") + b"\x00")
        else:
            h.update(b"i" + int(part).to_bytes(16, "big", signed=True))
    digest = h.digest()
    return np.frombuffer(digest[:16], dtype=np.uint64).copy()


class RngStream:
    """A named, reproducible random substream.

    Streams with the same (seed, path) produce identical draw sequences;
    streams with different paths are independent (distinct Philox keys).
    """

    def __init__(self, seed: int, path: tuple = ()):
        if seed < 0:
            raise DomainError("seed must be a non-negative integer")
        self.seed = int(seed)
        self.path = tuple(path)
        self._gen = np.random.Generator(np.random.Philox(key=_derive_key(seed, self.path)))

    def substream(self, *ids) -> "RngStream":
        """Derive an independent stream extending this stream's path."""
        return RngStream(self.seed, self.path + tuple(ids))

    # thin delegation; keep the numpy Generator surface we actually use
    def standard_normal(self, size=None) -> np.ndarray:
        return self._gen.standard_normal(size)

    def random(self, size=None):
        return self._gen.random(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def __repr__(self):  # pragma: no cover
        return f"RngStream(seed={self.seed}, path={self.path!r})"


def sample_std_gaussian_vector(rng: RngStream, n: int) -> np.ndarray:
    """n independent standard normal draws, advancing the stream."""
    if n < 1:
        raise DomainError(f"dimension must be >= 1, got {n}")
    return rng.standard_normal(n)


# ---------------------------------------------------------------------------
# array validation
# ---------------------------------------------------------------------------

def ensure_finite(a: np.ndarray, name: str = "array") -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise NumericError(f"{name} contains non-finite entries")
    return a


def as_vector(x, n: int | None = None, name: str = "vector") -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise ShapeError(f"{name} must be 1-d, got shape {v.shape}")
    if n is not None and v.shape[0] != n:
        raise ShapeError(f"{name} must have length {n}, got {v.shape[0]}")
    return ensure_finite(v, name)


def as_matrix(a, rows: int | None = None, cols: int | None = None,
              name: str = "matrix") -> np.ndarray:
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"{name} must be 2-d, got shape {m.shape}")
    if rows is not None and m.shape[0] != rows:
        raise ShapeError(f"{name} must have {rows} rows, got {m.shape[0]}")
    if cols is not None and m.shape[1] != cols:
        raise ShapeError(f"{name} must have {cols} columns, got {m.shape[1]}")
    return ensure_finite(m, name)


# ---------------------------------------------------------------------------
# symmetric eigen-extremes
# ---------------------------------------------------------------------------

def eig_extremes_symmetric(s) -> tuple[float, float]:
    """Smallest and largest eigenvalue of the symmetric part (S + S^T)/2.

    The input need not be symmetric; quadratic forms v^T S v are governed
    by the symmetric part, which is what every use in this package needs.
    """
    m = as_matrix(s, name="eig input")
    if m.shape[0] != m.shape[1]:
        raise ShapeError(f"eig input must be square, got shape {m.shape}")
    sym = 0.5 * (m + m.T)
    try:
        vals = np.linalg.eigvalsh(sym)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigensolver failed to converge: {exc}") from exc
    return float(vals[0]), float(vals[-1])


# ---------------------------------------------------------------------------
# log-gamma (Lanczos, g = 7, 9 coefficients)
# ---------------------------------------------------------------------------

_LANCZOS_G = 7.0
_LANCZOS_C = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_LOG_SQRT_2PI = 0.9189385332046727417803297364056176


def log_gamma(x: float) -> float:
    """Natural log of the gamma function for x > 0."""
    x = float(x)
    if not math.isfinite(x) or x <= 0.0:
        raise DomainError(f"log_gamma requires x > 0, got {x}")
    if x < 0.5:
        # reflection keeps the series evaluation in its accurate range
        return math.log(math.pi / math.sin(math.pi * x)) - log_gamma(1.0 - x)
    z = x - 1.0
    series = _LANCZOS_C[0]
    for i, c in enumerate(_LANCZOS_C[1:], start=1):
        series += c / (z + i)
    t = z + _LANCZOS_G + 0.5
    return _LOG_SQRT_2PI + (z + 0.5) * math.log(t) - t + math.log(series)
