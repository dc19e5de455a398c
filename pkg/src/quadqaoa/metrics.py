"""Solution-quality and noise-overhead analytics over sample sets.

Approximation ratio convention: r(x) = (E(x) - E_max) / (E_min - E_max), so
the ground state scores 1 and the worst state 0. "Best" shots always means
lowest energy; ties among equal energies break by bitstring text so every
aggregate is deterministic. Fractional cutoffs keep ceil(alpha * shots) shots
fully weighted; the interpolating variant used by the overhead fit instead
weights the marginal shot fractionally so the CVaR curve is continuous in
alpha.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, fields
from typing import Callable, Sequence

import numpy as np

from .ising import Spectrum
from .statevector import SampleSet


@dataclass(frozen=True)
class ErrorTable:
    """Per-adjacent-pair two-qubit error rates on a line, plus the mean gate
    time used when converting overheads to wall-clock budgets."""

    eps: tuple[float, ...]
    mean_gate_time: float = 1.0

    def __post_init__(self) -> None:
        if len(self.eps) < 1:
            raise ValueError("a line of n qubits has n-1 adjacent pairs")
        if any(e < 0 for e in self.eps):
            raise ValueError("error rates must be >= 0")
        if self.mean_gate_time <= 0:
            raise ValueError("mean gate time must be positive")

    @classmethod
    def uniform(cls, n: int, eps: float, mean_gate_time: float = 1.0
                ) -> "ErrorTable":
        if n < 2:
            raise ValueError("need at least 2 qubits")
        return cls((float(eps),) * (n - 1), mean_gate_time)

    @property
    def n(self) -> int:
        return len(self.eps) + 1

    def gamma(self, parity: int) -> float:
        """Product of (1 + eps) over the even (parity 0) or odd (parity 1)
        adjacent pairs of the line."""
        if parity not in (0, 1):
            raise ValueError("parity must be 0 or 1")
        out = 1.0
        for a in range(parity, len(self.eps), 2):
            out *= 1.0 + self.eps[a]
        return out


def _extremes(spectrum: "Spectrum | tuple[float, float]") -> tuple[float, float]:
    if isinstance(spectrum, Spectrum):
        emin, emax = spectrum.emin, spectrum.emax
    else:
        emin, emax = float(spectrum[0]), float(spectrum[1])
    if emin == emax:
        raise ValueError("degenerate spectrum: E_min equals E_max")
    return emin, emax


def approximation_ratio(
    value: "SampleSet | float",
    spectrum: "Spectrum | tuple[float, float]",
) -> float:
    """r = (E - E_max) / (E_min - E_max); a SampleSet yields the shot-weighted
    mean ratio."""
    emin, emax = _extremes(spectrum)
    if isinstance(value, SampleSet):
        return (value.mean_energy() - emax) / (emin - emax)
    return (float(value) - emax) / (emin - emax)


def energy_cdf(s: SampleSet) -> list[tuple[float, float]]:
    """Cumulative shot fraction at or below each distinct sampled energy,
    sorted ascending; the last entry reaches 1."""
    if s.shots < 1:
        raise ValueError("empty sample set")
    weight: dict[float, int] = {}
    for (_, count), energy in zip(s.entries, s.energies):
        weight[energy] = weight.get(energy, 0) + count
    out = []
    running = 0
    for energy in sorted(weight):
        running += weight[energy]
        out.append((energy, running / s.shots))
    return out


def _sorted_shot_values(
    s: SampleSet, objective: "Callable[[str], float] | None"
) -> np.ndarray:
    """Per-shot objective values sorted ascending; entries are already in
    bitstring order, so a stable sort keeps lexicographic tie-breaks."""
    if s.shots < 1:
        raise ValueError("empty sample set")
    if objective is None:
        values = np.asarray(s.energies, dtype=float)
    else:
        values = np.array([float(objective(text)) for text, _ in s.entries])
    counts = np.array([c for _, c in s.entries], dtype=int)
    order = np.argsort(values, kind="stable")
    return np.repeat(values[order], counts[order])


def best_fraction_mean(s: SampleSet, alpha: float) -> float:
    """Mean energy of the ceil(alpha * shots) lowest-energy shots."""
    return cvar(s, alpha)


def cvar(
    s: SampleSet,
    alpha: float,
    objective: "Callable[[str], float] | None" = None,
    interpolate: bool = False,
) -> float:
    """Mean objective over the best alpha fraction of shots (lowest values).

    The default keeps ceil(alpha * shots) shots fully weighted. With
    interpolate=True the marginal shot is weighted by the fractional part of
    alpha * shots, which makes the curve continuous and strictly monotone
    wherever the order statistics change.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    values = _sorted_shot_values(s, objective)
    m = alpha * s.shots
    if not interpolate:
        return float(values[: math.ceil(m)].mean())
    if m <= 1.0:
        return float(values[0])
    whole = int(m)
    frac = m - whole
    total = float(values[:whole].sum())
    if frac > 0.0:
        total += frac * float(values[whole])
    return total / m


def cvar_ratio(
    s: SampleSet,
    alpha: float,
    spectrum: "Spectrum | tuple[float, float]",
    interpolate: bool = False,
) -> float:
    """Approximation ratio of the CVaR energy; the ratio map is affine and
    decreasing, so this is also the mean ratio over the best shots."""
    emin, emax = _extremes(spectrum)
    energy = cvar(s, alpha, None, interpolate)
    return (energy - emax) / (emin - emax)


@dataclass(frozen=True)
class AlphaFit:
    """Fitted retained fraction; clipped marks an unreachable target returned
    at the boundary."""

    alpha: float
    ratio: float
    residual: float
    clipped: bool


def fit_alpha(
    s: SampleSet,
    target_r: float,
    spectrum: "Spectrum | tuple[float, float]",
    tol: float = 1e-9,
) -> AlphaFit:
    """Find alpha with cvar_ratio(s, alpha, interpolate=True) = target_r.

    The interpolated CVaR ratio is continuous and nonincreasing in alpha, so
    bisection converges; targets outside the achievable range return the
    nearer boundary with clipped=True.
    """
    lo, hi = 1.0 / s.shots, 1.0
    r_lo = cvar_ratio(s, lo, spectrum, interpolate=True)   # best single shot
    r_hi = cvar_ratio(s, hi, spectrum, interpolate=True)   # overall mean
    if target_r >= r_lo:
        return AlphaFit(lo, r_lo, abs(r_lo - target_r), target_r > r_lo)
    if target_r <= r_hi:
        return AlphaFit(hi, r_hi, abs(r_hi - target_r), target_r < r_hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        r_mid = cvar_ratio(s, mid, spectrum, interpolate=True)
        if abs(r_mid - target_r) <= tol:
            return AlphaFit(mid, r_mid, abs(r_mid - target_r), False)
        if r_mid > target_r:
            lo = mid
        else:
            hi = mid
    r_mid = cvar_ratio(s, hi, spectrum, interpolate=True)
    return AlphaFit(hi, r_mid, abs(r_mid - target_r), False)


@dataclass(frozen=True)
class TheoreticalAlpha:
    """Sampling-overhead estimate 1/sqrt(gamma); clamped marks the k=0
    extension where the odd-layer exponent is floored at zero."""

    alpha: float
    clamped: bool

    def __float__(self) -> float:
        return self.alpha


def alpha_theoretical(k: int, p: int, table: ErrorTable, n: int
                      ) -> TheoreticalAlpha:
    """alpha_th = 1 / sqrt(gamma_0^e0 * gamma_1^e1) with e0 = p(2 + 3*ceil(k/2))
    and e1 = e0 - 3p, the even/odd entangling-layer counts of a depth-p
    truncated circuit."""
    if n < 3:
        raise ValueError("overhead formula needs n >= 3")
    if table.n != n:
        raise ValueError(f"error table covers {table.n} qubits, n is {n}")
    if k < 0 or p < 1:
        raise ValueError("need k >= 0 and p >= 1")
    e0 = p * (2 + 3 * math.ceil(k / 2))
    e1 = e0 - 3 * p
    clamped = e1 < 0
    if clamped:
        e1 = 0
    gamma = table.gamma(0) ** e0 * table.gamma(1) ** e1
    return TheoreticalAlpha(1.0 / math.sqrt(gamma), clamped)


@dataclass(frozen=True)
class MetricsRow:
    """One metric value keyed by the sweep axes it came from; unused axes
    stay None and serialize as empty fields."""

    instance: str
    metric: str
    value: float
    k: int | None = None
    p: int | None = None
    lam: float | None = None
    alpha: float | None = None


_COLUMNS = ("instance", "k", "p", "lam", "alpha", "metric", "value")


def _cell(value: "float | int | None") -> str:
    if value is None:
        return ""
    if isinstance(value, int):
        return str(value)
    return format(value, ".12g")


def rows_to_csv(rows: Sequence[MetricsRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_COLUMNS)
    for row in rows:
        writer.writerow([
            row.instance, _cell(row.k), _cell(row.p), _cell(row.lam),
            _cell(row.alpha), row.metric, _cell(row.value),
        ])
    return buf.getvalue()


def rows_from_csv(text: str) -> list[MetricsRow]:
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    if tuple(header) != _COLUMNS:
        raise ValueError(f"unexpected header {header}")
    out = []
    for rec in reader:
        instance, k, p, lam, alpha, metric, value = rec
        out.append(MetricsRow(
            instance=instance, metric=metric, value=float(value),
            k=int(k) if k else None, p=int(p) if p else None,
            lam=float(lam) if lam else None,
            alpha=float(alpha) if alpha else None,
        ))
    return out


def rows_to_json(rows: Sequence[MetricsRow]) -> str:
    payload = [{f.name: getattr(row, f.name) for f in fields(MetricsRow)}
               for row in rows]
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def rows_from_json(text: str) -> list[MetricsRow]:
    return [MetricsRow(**item) for item in json.loads(text)]
