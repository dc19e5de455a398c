"""Angle and quadratization-parameter training.

All trainers share one recipe: a coarse grid scan over [0, pi/2]^2 for the
depth-1 angles, then a derivative-free local refinement (COBYLA), with deeper
layers bootstrapped from the transition state (beta*, 0, gamma*, 0). Every
reported energy is the expectation of the designated cost polynomial, never
the ansatz polynomial, and traces record the best value seen so far at each
objective evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .circuits import synthesize_qaoa
from .ising import ZPolynomial
from .mps import apply_circuit
from .mps import energy as mps_energy
from .quadratize import VariationalQuadratic, clique_expand
from .statevector import evolve_diagonal
from .swapnet import SwapSchedule, build_schedule, reachable_terms

BACKENDS = ("statevector", "mps")


@dataclass(frozen=True)
class TrainConfig:
    """Grid resolution, refiner budget, restarts, and simulation backend."""

    grid_points: int = 15
    max_evals: int = 500
    rhobeg: float = 0.1
    tol: float = 1e-6
    restarts: int = 1
    seed: int = 0
    backend: str = "statevector"
    chi: int | None = None

    def __post_init__(self) -> None:
        if self.grid_points < 2:
            raise ValueError("grid needs at least 2 points per axis")
        if self.max_evals < 1:
            raise ValueError("max_evals must be >= 1")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}")
        if self.backend == "mps" and (self.chi is None or self.chi < 1):
            raise ValueError("mps backend requires chi >= 1")


@dataclass(frozen=True)
class TrainResult:
    betas: tuple[float, ...]
    gammas: tuple[float, ...]
    theta: tuple[float, ...] | None
    energy: float
    trace: tuple[tuple[int, float], ...]

    def __post_init__(self) -> None:
        if not self.trace:
            raise ValueError("trace must hold at least one evaluation")
        if abs(self.trace[-1][1] - self.energy) > 1e-12:
            raise ValueError("trace must end at the final energy")

    @property
    def p(self) -> int:
        return len(self.betas)

    def to_dict(self) -> dict:
        return {
            "betas": list(self.betas),
            "gammas": list(self.gammas),
            "theta": list(self.theta) if self.theta is not None else None,
            "energy": self.energy,
            "trace": [[i, e] for i, e in self.trace],
        }


class _Recorder:
    """Wraps an objective, tracking best-so-far value, point, and trace."""

    def __init__(self, fn: Callable[[np.ndarray], float]):
        self.fn = fn
        self.best = np.inf
        self.best_x: np.ndarray | None = None
        self.trace: list[tuple[int, float]] = []

    def __call__(self, x: np.ndarray) -> float:
        val = float(self.fn(np.asarray(x, dtype=float)))
        if val < self.best:
            self.best = val
            self.best_x = np.array(x, dtype=float)
        self.trace.append((len(self.trace), self.best))
        return val


def _refine(recorder: _Recorder, x0: np.ndarray, config: TrainConfig) -> None:
    optimize.minimize(
        recorder, x0, method="COBYLA", tol=config.tol,
        options={"rhobeg": config.rhobeg, "maxiter": config.max_evals})


def _angle_evaluator(
    h_ansatz: ZPolynomial,
    h_cost: ZPolynomial,
    config: TrainConfig,
    schedule: SwapSchedule | None,
) -> Callable[[np.ndarray], float]:
    """Objective over x = [betas..., gammas...]: <H_cost> of the QAOA state
    generated by h_ansatz."""
    if config.backend == "statevector":
        table_a = h_ansatz.energy_table()
        table_c = h_cost.energy_table()

        def fn(x: np.ndarray) -> float:
            p = x.size // 2
            psi = evolve_diagonal(table_a, x[:p], x[p:])
            return float((np.abs(psi) ** 2) @ table_c)

        return fn

    sched = schedule if schedule is not None else build_schedule(
        h_ansatz.n, max(h_ansatz.n - 2, 0), None)

    def fn(x: np.ndarray) -> float:
        p = x.size // 2
        c = synthesize_qaoa(h_ansatz, x[:p], x[p:], topology="line",
                            schedule=sched)
        return mps_energy(apply_circuit(c, config.chi), h_cost)

    return fn


def _grid_starts(
    recorder: _Recorder, config: TrainConfig
) -> list[tuple[float, tuple[float, float]]]:
    """Row-major scan of the depth-1 angle grid; returns (energy, (beta,
    gamma)) sorted ascending with first-found winning ties."""
    axis = np.linspace(0.0, np.pi / 2, config.grid_points)
    scored = []
    for i, beta in enumerate(axis):
        for j, gamma in enumerate(axis):
            val = recorder(np.array([beta, gamma]))
            scored.append((val, i * config.grid_points + j, (beta, gamma)))
    scored.sort(key=lambda t: (t[0], t[1]))
    return [(val, point) for val, _, point in scored]


def _pack(betas: Sequence[float], gammas: Sequence[float]) -> np.ndarray:
    return np.concatenate([np.asarray(betas, float), np.asarray(gammas, float)])


def _result_from(recorder: _Recorder, theta: "np.ndarray | None") -> TrainResult:
    x = recorder.best_x
    p = x.size // 2
    return TrainResult(
        betas=tuple(float(v) for v in x[:p]),
        gammas=tuple(float(v) for v in x[p:]),
        theta=tuple(float(v) for v in theta) if theta is not None else None,
        energy=float(recorder.best),
        trace=tuple(recorder.trace),
    )


def train_depth1(
    h_ansatz: ZPolynomial,
    h_cost: ZPolynomial,
    config: TrainConfig,
    schedule: SwapSchedule | None = None,
) -> TrainResult:
    """Depth-1 training: grid scan on [0, pi/2]^2, then local refinement from
    the best grid points (one refinement per restart)."""
    if h_ansatz.n != h_cost.n:
        raise ValueError("ansatz and cost polynomials must share n")
    if h_ansatz.degree() > 2 and h_ansatz.terms != h_cost.terms:
        raise ValueError("ansatz must be quadratic or identical to the cost")
    recorder = _Recorder(_angle_evaluator(h_ansatz, h_cost, config, schedule))
    starts = _grid_starts(recorder, config)
    for _, (beta, gamma) in starts[:config.restarts]:
        _refine(recorder, np.array([beta, gamma]), config)
    return _result_from(recorder, None)


def train_depth_p_transition(
    h_ansatz: ZPolynomial,
    h_cost: ZPolynomial,
    parent: TrainResult,
    config: TrainConfig,
    schedule: SwapSchedule | None = None,
) -> TrainResult:
    """Extend a converged depth-p result to depth p+1 from the transition
    state (betas..., 0, gammas..., 0); the zero-padded start reproduces the
    parent state, so the refined energy never exceeds the parent's.

    The transition state is a stationary point of the deeper landscape, so
    besides refining it as-is, at least two seeded perturbations of the start
    are refined to escape the saddle."""
    recorder = _Recorder(_angle_evaluator(h_ansatz, h_cost, config, schedule))
    start = _pack((*parent.betas, 0.0), (*parent.gammas, 0.0))
    recorder(start)
    for r in range(max(config.restarts, 3)):
        if r == 0:
            x0 = start
        else:
            rng = np.random.default_rng((config.seed, 7000 + r))
            x0 = start + rng.uniform(-0.1, 0.1, start.size)
        _refine(recorder, x0, config)
    return _result_from(recorder, parent.theta)


def _train_to_depth(
    h_ansatz: ZPolynomial,
    h_cost: ZPolynomial,
    p: int,
    config: TrainConfig,
    schedule: SwapSchedule | None = None,
) -> TrainResult:
    result = train_depth1(h_ansatz, h_cost, config, schedule)
    for _ in range(1, p):
        result = train_depth_p_transition(h_ansatz, h_cost, result, config,
                                          schedule)
    return result


def train_truncated(
    h_cost: ZPolynomial,
    schedule: SwapSchedule,
    k: int,
    p: int,
    config: TrainConfig,
) -> TrainResult:
    """Truncated-ansatz training: the circuit evolves only the terms reachable
    within the first k swap layers, but the objective stays the full cost."""
    if h_cost.degree() > 2:
        raise ValueError("truncated training requires a quadratic cost")
    if schedule.k != k:
        raise ValueError(f"schedule holds k={schedule.k}, requested k={k}")
    if p < 1:
        raise ValueError("p must be >= 1")
    h_k, _ = reachable_terms(h_cost, schedule.mapping, k)
    return _train_to_depth(h_k, h_cost, p, config, schedule)


def train_joint_quadratization(
    template: VariationalQuadratic,
    h_cost: ZPolynomial,
    p: int,
    config: TrainConfig,
) -> TrainResult:
    """Joint minimization of <H_cost> over the quadratic template parameters
    and all angles. Restart 0 seeds theta from the clique expansion of the
    cost; at least three more restarts draw theta uniformly from [-1, 1].
    Depths beyond 1 are bootstrapped per restart from the transition state.
    """
    if template.n != h_cost.n:
        raise ValueError("template and cost polynomials must share n")
    if p < 1:
        raise ValueError("p must be >= 1")
    if config.backend != "statevector":
        raise ValueError("joint training runs on the statevector backend")
    n = template.n
    table_c = h_cost.energy_table()
    sign_matrix = _template_sign_matrix(template)
    nparams = template.num_parameters

    def objective(x: np.ndarray) -> float:
        theta, angles = x[:nparams], x[nparams:]
        depth = angles.size // 2
        table_a = theta @ sign_matrix
        psi = evolve_diagonal(table_a, angles[:depth], angles[depth:])
        return float((np.abs(psi) ** 2) @ table_c)

    theta_clique = template.theta_from_polynomial(
        clique_expand(h_cost).quadratic())
    num_restarts = max(config.restarts, 4)
    best: TrainResult | None = None
    for r in range(num_restarts):
        if r == 0:
            theta0 = theta_clique
        else:
            rng = np.random.default_rng((config.seed, r))
            theta0 = rng.uniform(-1.0, 1.0, nparams)
        recorder = _Recorder(objective)
        grid = _Recorder(lambda bg: objective(np.concatenate([theta0, bg])))
        starts = _grid_starts(grid, config)
        _, (beta0, gamma0) = starts[0]
        recorder.trace = list(grid.trace)
        recorder.best = grid.best
        recorder.best_x = np.concatenate([theta0, [beta0], [gamma0]])
        _refine(recorder, np.concatenate([theta0, [beta0], [gamma0]]), config)
        for _ in range(1, p):
            prev = recorder.best_x
            depth = (prev.size - nparams) // 2
            extended = np.concatenate([
                prev[:nparams],
                prev[nparams:nparams + depth], [0.0],
                prev[nparams + depth:], [0.0],
            ])
            recorder(extended)
            _refine(recorder, extended, config)
        candidate = _joint_result(recorder, nparams)
        if best is None or candidate.energy < best.energy:
            best = candidate
    return best


def _joint_result(recorder: _Recorder, nparams: int) -> TrainResult:
    x = recorder.best_x
    angles = x[nparams:]
    depth = angles.size // 2
    return TrainResult(
        betas=tuple(float(v) for v in angles[:depth]),
        gammas=tuple(float(v) for v in angles[depth:]),
        theta=tuple(float(v) for v in x[:nparams]),
        energy=float(recorder.best),
        trace=tuple(recorder.trace),
    )


def _template_sign_matrix(template: VariationalQuadratic) -> np.ndarray:
    """Rows are parameter directions, columns are basis states: row k holds
    the Z-parity of parameter k's support, so theta @ matrix is the energy
    table of materialize(theta)."""
    n = template.n
    dim = 1 << n
    idx = np.arange(dim)
    z = 1.0 - 2.0 * ((idx[None, :] >> np.arange(n)[:, None]) & 1)
    rows = np.empty((template.num_parameters, dim))
    for k, (i, j) in enumerate(template.pair_order):
        rows[k] = z[i] * z[j]
    npairs = len(template.pair_order)
    for i in range(n):
        rows[npairs + i] = z[i]
    return rows
