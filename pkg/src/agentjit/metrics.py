"""Pass@k and Pass@t for parallel plan sampling."""

from __future__ import annotations

import csv
import io
import math
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np


def pass_at_k(n: int, c: int, k: int, exact: bool = False):
    """Chance that ``k`` draws without replacement from ``n`` (``c`` good) hit a good one.

    Uses ``C(n-c, k) / C(n, k) = prod_{i=n-c+1}^{n} (1 - k/i)`` so nothing
    overflows; ``exact=True`` returns a :class:`Fraction`.
    """
    if not (0 <= c <= n) or not (1 <= k <= n):
        raise ValueError(f"need 0 <= c <= n and 1 <= k <= n, got n={n} c={c} k={k}")
    if n - c < k:
        return Fraction(1) if exact else 1.0
    if exact:
        miss = Fraction(1)
        for i in range(n - c + 1, n + 1):
            miss *= Fraction(i - k, i)
        return 1 - miss
    miss = 1.0
    for i in range(n - c + 1, n + 1):
        miss *= 1.0 - k / i
    return 1.0 - miss


def pass_at_t(cdf: Callable[[float], float], p: float, n_parallel: int, t: float) -> float:
    """Chance that one of ``n_parallel`` workers returns a valid plan by time ``t``.

    Validity and latency are treated as independent.
    """
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    if n_parallel < 1:
        raise ValueError("n_parallel must be >= 1")
    f = float(cdf(t))
    if not 0 <= f <= 1:
        raise ValueError(f"cdf returned {f}, outside [0, 1]")
    return 1.0 - (1.0 - f * p) ** n_parallel


def pass_plateau(p: float, n_parallel: int) -> float:
    return 1.0 - (1.0 - p) ** n_parallel


def empirical_cdf(samples: Sequence[float]) -> Callable[[float], float]:
    """Right-continuous step CDF."""
    s = np.sort(np.asarray(samples, dtype=float))
    if s.size == 0:
        raise ValueError("empirical CDF needs samples")
    return lambda t: float(np.searchsorted(s, t, side="right") / s.size)


def _field(rec, name):
    return rec[name] if isinstance(rec, Mapping) else getattr(rec, name)


def pass_curves(records: Sequence, ks: Iterable[int], ts: Iterable[float],
                n_parallel: int) -> list[dict]:
    """Plug empirical validity and latency CDF into both formulas.

    Pass@k treats the record set as the sample pool (``n = len(records)``).
    """
    records = list(records)
    if not records:
        raise ValueError("pass_curves needs at least one run record")
    valid = [bool(_field(r, "valid")) for r in records]
    n, c = len(valid), sum(valid)
    p = c / n
    cdf = empirical_cdf([float(_field(r, "latency_s")) for r in records])
    rows = [{"metric": "pass@k", "x": k, "value": pass_at_k(n, c, k)} for k in ks]
    rows += [{"metric": "pass@t", "x": t, "value": pass_at_t(cdf, p, n_parallel, t)}
             for t in ts]
    return rows


def rows_to_csv(rows: Sequence[Mapping]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=["metric", "x", "value"], lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({"metric": r["metric"], "x": r["x"], "value": f"{r['value']:.6f}"})
    return buf.getvalue()


def parse_int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def parse_range(text: str) -> list[float]:
    """``"1..30"`` (step 1), ``"0..10:0.5"`` or a comma list."""
    if ".." in text:
        lo, rest = text.split("..", 1)
        hi, _, step = rest.partition(":")
        step_v = float(step) if step else 1.0
        count = int(math.floor((float(hi) - float(lo)) / step_v + 1e-9)) + 1
        return [float(lo) + i * step_v for i in range(count)]
    return [float(x) for x in text.split(",") if x.strip()]


def mock_records(n: int, valid_fraction: float, rng: np.random.Generator,
                 latency=None) -> list[dict]:
    """``round(valid_fraction * n)`` valid records in random order."""
    n_valid = int(round(valid_fraction * n))
    flags = np.zeros(n, dtype=bool)
    flags[:n_valid] = True
    rng.shuffle(flags)
    lats = latency.sample(rng, n) if latency is not None else np.zeros(n)
    return [{"valid": bool(v), "latency_s": float(t)} for v, t in zip(flags, lats)]
