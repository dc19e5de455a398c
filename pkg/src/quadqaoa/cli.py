"""Command-line orchestration, experiment configuration, and result files.

Subcommands: build | quadratize | resources | train | sample | metrics | run.
All flags are long-form. A JSON file passed via --config overrides flag
values. The only environment variable consulted is QUADQAOA_OUTPUT_ROOT,
which sets the default output root for run directories.

Every result file embeds the hash of the resolved configuration that produced
it: JSON payloads carry a "config_hash" key, delimited files start with a
"# config_hash=..." comment. Re-running a command with an identical
configuration rewrites byte-identical result files; wall-clock timestamps go
to a separate meta.json side-channel that is excluded from that guarantee.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import platform
import sys
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import matplotlib
import networkx
import numpy as np
import scipy

from . import __version__, reporting
from .circuits import lower_to_cz, synthesize_qaoa
from .ising import (
    ZPolynomial,
    brute_force_spectrum,
    build_h4_full,
    build_labs,
    build_maxcut,
    build_qubo_full,
    load_problem,
    rr3_graph,
)
from .metrics import (
    MetricsRow,
    approximation_ratio,
    best_fraction_mean,
    cvar_ratio,
    energy_cdf,
    rows_to_csv,
    rows_to_json,
)
from .mps import apply_circuit
from .mps import sample as mps_sample
from .quadratize import clique_expand, variational_template
from .statevector import (
    MAX_NOISELESS_QUBITS,
    NoiseSpec,
    SampleSet,
    evolve_diagonal,
    sample as sv_sample,
    simulate_noisy,
)
from .swapnet import build_schedule, estimate_resources, reachable_terms
from .training import (
    TrainConfig,
    TrainResult,
    train_depth1,
    train_depth_p_transition,
    train_joint_quadratization,
    train_truncated,
)

MODES = ("standard", "clique", "variational", "truncated")
OUTPUT_ROOT_ENV = "QUADQAOA_OUTPUT_ROOT"


class StageError(RuntimeError):
    """Pipeline failure tagged with the stage that raised it."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"run failed at stage '{stage}': {cause}")
        self.stage = stage
        self.cause = cause


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as err:
        raise StageError(name, err) from err


# ----------------------------------------------------------------------------
# configuration plumbing
# ----------------------------------------------------------------------------

def config_hash(payload: dict) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_delimited(path: Path, body: str, hash_: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(f"# config_hash={hash_}\n{body}")


def _output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))


def _apply_config_file(args: argparse.Namespace,
                       parser: argparse.ArgumentParser) -> None:
    """Overlay a JSON config onto parsed flags; config values win."""
    if not getattr(args, "config", None):
        return
    path = Path(args.config)
    if not path.is_file():
        parser.error(f"config file not found: {path}")
    data = json.loads(path.read_text())
    if not isinstance(data, dict):
        parser.error("config file must hold a JSON object")
    for key, value in data.items():
        dest = key.replace("-", "_")
        if not hasattr(args, dest):
            parser.error(f"config key {key!r} is not a flag of this command")
        setattr(args, dest, value)


def _parse_floats(text: "str | Sequence[float]") -> tuple[float, ...]:
    if isinstance(text, str):
        return tuple(float(v) for v in text.split(",") if v != "")
    return tuple(float(v) for v in text)


def _parse_ints(text: "str | Sequence[int]") -> tuple[int, ...]:
    if isinstance(text, str):
        return tuple(int(v) for v in text.split(",") if v != "")
    return tuple(int(v) for v in text)


# ----------------------------------------------------------------------------
# problem construction
# ----------------------------------------------------------------------------

def build_problem(spec: dict) -> tuple[ZPolynomial, str]:
    """Materialize a problem spec: {"path": file} or {"builder": name, ...}."""
    if "path" in spec:
        path = Path(spec["path"])
        if not path.is_file():
            raise FileNotFoundError(f"problem file not found: {path}")
        return load_problem(path), path.stem
    builder = spec.get("builder")
    if builder == "labs":
        n = int(spec["n"])
        return build_labs(n), f"labs-{n}"
    if builder == "h4full":
        n = int(spec["n"])
        return build_h4_full(n), f"h4full-{n}"
    if builder == "qubo":
        n, seed = int(spec["n"]), int(spec.get("seed", 0))
        return build_qubo_full(n, seed=seed), f"qubo-{n}-s{seed}"
    if builder == "maxcut":
        if "rr3" in spec:
            n, seed = int(spec["rr3"]), int(spec.get("seed", 0))
            edges = rr3_graph(n, seed)
            return build_maxcut(edges, n), f"rr3-{n}-s{seed}"
        edges = [tuple(e) for e in spec["edges"]]
        return build_maxcut(edges), "maxcut-custom"
    raise ValueError(f"unknown problem spec {spec!r}")


def _degree_phrase(h: ZPolynomial) -> str:
    names = {1: "linear", 2: "quadratic", 3: "cubic", 4: "quartic"}
    counts = h.term_count_by_degree()
    parts = [f"{counts[d]} {names.get(d, f'degree-{d}')}"
             for d in sorted(counts, reverse=True) if d >= 1]
    return ", ".join(parts) if parts else "0 terms"


# ----------------------------------------------------------------------------
# experiment configuration
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved settings for one pipeline run (possibly a sweep)."""

    problem: dict
    mode: str = "standard"
    k: int | None = None
    p: int = 1
    backend: str = "statevector"
    chi: int | None = None
    lam: float = 0.0
    trajectories: int = 200
    shots: int = 10_000
    seed: int = 0
    train: dict = field(default_factory=dict)
    alphas: tuple[float, ...] = (0.01, 0.05, 0.1)
    emin: float | None = None
    emax: float | None = None
    sweep_k: tuple[int, ...] = ()
    sweep_p: tuple[int, ...] = ()
    sweep_lam: tuple[float, ...] = ()
    outdir: str | None = None
    label: str | None = None

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.mode == "truncated" and self.k is None and not self.sweep_k:
            raise ValueError("truncated mode needs --k or --sweep-k")
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.shots < 1:
            raise ValueError("shots must be >= 1")
        if self.lam < 0 or any(l < 0 for l in self.sweep_lam):
            raise ValueError("lambda must be >= 0")

    def payload(self) -> dict:
        out = asdict(self)
        for key in ("alphas", "sweep_k", "sweep_p", "sweep_lam"):
            out[key] = list(out[key])
        return out

    def hash(self) -> str:
        return config_hash({"command": "run", **self.payload()})

    def train_config(self) -> TrainConfig:
        fields = dict(self.train)
        fields.setdefault("seed", self.seed)
        fields.setdefault("backend", self.backend)
        fields.setdefault("chi", self.chi)
        return TrainConfig(**fields)


def _experiment_from_args(args: argparse.Namespace) -> ExperimentConfig:
    if args.problem:
        problem = {"path": args.problem}
    elif args.builder:
        problem = {"builder": args.builder, "n": args.n}
        if args.builder in ("qubo", "maxcut"):
            problem["seed"] = args.problem_seed
        if args.builder == "maxcut":
            problem = {"builder": "maxcut", "rr3": args.n,
                       "seed": args.problem_seed}
    else:
        raise ValueError("provide --problem or --builder")
    train = {}
    for key in ("grid_points", "max_evals", "rhobeg", "tol", "restarts"):
        value = getattr(args, key)
        if value is not None:
            train[key] = value
    return ExperimentConfig(
        problem=problem, mode=args.mode, k=args.k, p=args.p,
        backend=args.backend, chi=args.chi, lam=args.lam,
        trajectories=args.trajectories, shots=args.shots, seed=args.seed,
        train=train, alphas=_parse_floats(args.alphas),
        emin=args.emin, emax=args.emax,
        sweep_k=_parse_ints(args.sweep_k) if args.sweep_k else (),
        sweep_p=_parse_ints(args.sweep_p) if args.sweep_p else (),
        sweep_lam=_parse_floats(args.sweep_lam) if args.sweep_lam else (),
        outdir=args.outdir, label=args.label,
    )


# ----------------------------------------------------------------------------
# pipeline stages
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainedAnsatz:
    """Training output plus everything needed to sample it."""

    mode: str
    k: int | None
    p: int
    result: TrainResult
    ansatz: ZPolynomial
    cost_energy: float


def _validate_mode(mode: str, h: ZPolynomial, backend: str) -> None:
    if mode == "clique" and h.degree() < 3:
        raise ValueError("clique mode needs a degree >= 3 problem")
    if mode == "truncated" and h.degree() > 2:
        raise ValueError("truncated mode needs a quadratic problem")
    if mode == "variational" and backend != "statevector":
        raise ValueError("variational mode runs on the statevector backend")
    if backend == "statevector" and h.n > MAX_NOISELESS_QUBITS:
        raise ValueError(
            f"n={h.n} exceeds the statevector cap {MAX_NOISELESS_QUBITS}; "
            "use --backend mps")


def _train_to_depth(h_ansatz: ZPolynomial, h_cost: ZPolynomial, p: int,
                    tc: TrainConfig, schedule=None) -> TrainResult:
    result = train_depth1(h_ansatz, h_cost, tc, schedule)
    for _ in range(1, p):
        result = train_depth_p_transition(h_ansatz, h_cost, result, tc,
                                          schedule)
    return result


def train_for_mode(h: ZPolynomial, mode: str, k: int | None, p: int,
                   tc: TrainConfig) -> TrainedAnsatz:
    """Train one ansatz configuration.

    clique mode trains its angles against the clique surrogate itself (its
    samples are then scored under the original cost), variational mode trains
    theta and angles jointly against the original cost, truncated mode trains
    against the full quadratic cost with the k-layer term subset as ansatz.
    """
    if mode == "standard":
        result = _train_to_depth(h, h, p, tc)
        return TrainedAnsatz(mode, None, p, result, h, result.energy)
    if mode == "clique":
        surrogate = clique_expand(h).quadratic()
        result = _train_to_depth(surrogate, surrogate, p, tc)
        psi = evolve_diagonal(surrogate.energy_table(), result.betas,
                              result.gammas)
        cost_energy = float((np.abs(psi) ** 2) @ h.energy_table())
        return TrainedAnsatz(mode, None, p, result, surrogate, cost_energy)
    if mode == "variational":
        template = variational_template(h.n)
        result = train_joint_quadratization(template, h, p, tc)
        ansatz = template.materialize(np.array(result.theta))
        return TrainedAnsatz(mode, None, p, result, ansatz, result.energy)
    if mode == "truncated":
        schedule = build_schedule(h.n, k, None)
        result = train_truncated(h, schedule, k, p, tc)
        ansatz, _ = reachable_terms(h, schedule.mapping, k)
        return TrainedAnsatz(mode, k, p, result, ansatz, result.energy)
    raise ValueError(f"unknown mode {mode!r}")


def _sampling_circuit(trained: TrainedAnsatz, n: int):
    """Line-synthesized circuit for quadratic ansatze, lowered abstract
    circuit for higher-order ones; both end in two-qubit native gates so
    trajectory noise applies after every entangler."""
    betas, gammas = trained.result.betas, trained.result.gammas
    if trained.ansatz.degree() <= 2:
        k = trained.k if trained.k is not None else max(n - 2, 0)
        schedule = build_schedule(n, k, None)
        circuit = synthesize_qaoa(trained.ansatz, betas, gammas,
                                  topology="line", schedule=schedule)
    else:
        circuit = synthesize_qaoa(trained.ansatz, betas, gammas,
                                  topology="abstract")
    return lower_to_cz(circuit)


def sample_for_mode(h: ZPolynomial, trained: TrainedAnsatz, shots: int,
                    lam: float, trajectories: int, seed: int,
                    backend: str, chi: int | None) -> SampleSet:
    """Sample the trained state; energies always come from the original h."""
    if lam > 0.0:
        if backend != "statevector":
            raise ValueError("trajectory noise runs on the statevector "
                             "backend")
        circuit = _sampling_circuit(trained, h.n)
        per_trajectory = max(1, math.ceil(shots / trajectories))
        return simulate_noisy(circuit, h, NoiseSpec(lam, trajectories, seed),
                              shots_per_trajectory=per_trajectory)
    if backend == "mps":
        circuit = synthesize_qaoa(
            trained.ansatz, trained.result.betas, trained.result.gammas,
            topology="line",
            schedule=build_schedule(
                h.n, trained.k if trained.k is not None else h.n - 2, None))
        state = apply_circuit(circuit, chi)
        return mps_sample(state, h, shots, seed)
    psi = evolve_diagonal(trained.ansatz.energy_table(),
                          trained.result.betas, trained.result.gammas)
    return sv_sample(psi, h, shots, seed)


def _spectrum_bounds(h: ZPolynomial, emin: float | None, emax: float | None
                     ) -> tuple[float, float]:
    if emin is not None and emax is not None:
        if emin >= emax:
            raise ValueError("emin must lie below emax")
        return float(emin), float(emax)
    if h.n > MAX_NOISELESS_QUBITS:
        raise ValueError(
            f"n={h.n} is beyond exhaustive enumeration; pass --emin/--emax "
            "(e.g. from a classical heuristic)")
    spec = brute_force_spectrum(h)
    return spec.emin, spec.emax


def metrics_rows(s: SampleSet, h: ZPolynomial, instance: str,
                 alphas: Sequence[float],
                 emin: float | None, emax: float | None,
                 k: int | None = None, p: int | None = None,
                 lam: float | None = None) -> list[MetricsRow]:
    bounds = _spectrum_bounds(h, emin, emax)
    rows = [
        MetricsRow(instance, "mean_energy", s.mean_energy(), k, p, lam),
        MetricsRow(instance, "min_energy", s.min_energy(), k, p, lam),
        MetricsRow(instance, "ratio_mean",
                   approximation_ratio(s, bounds), k, p, lam),
    ]
    for alpha in alphas:
        rows.append(MetricsRow(instance, "best_fraction_mean",
                               best_fraction_mean(s, alpha), k, p, lam, alpha))
        rows.append(MetricsRow(instance, "cvar_ratio",
                               cvar_ratio(s, alpha, bounds), k, p, lam, alpha))
    return rows


def _result_payload(trained: TrainedAnsatz, hash_: str) -> dict:
    return {
        "config_hash": hash_,
        "mode": trained.mode,
        "k": trained.k,
        "p": trained.p,
        "cost_energy": trained.cost_energy,
        **trained.result.to_dict(),
    }


def _trace_csv(result: TrainResult) -> str:
    lines = ["evaluation,best_energy"]
    lines += [f"{i},{format(v, '.12g')}" for i, v in result.trace]
    return "\n".join(lines) + "\n"


def _versions() -> dict:
    return {
        "quadqaoa": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "networkx": networkx.__version__,
        "matplotlib": matplotlib.__version__,
    }


# ----------------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------------

def cmd_build(args: argparse.Namespace) -> int:
    spec = {"builder": args.kind, "n": args.n}
    if args.kind == "qubo":
        spec["seed"] = args.seed
    if args.kind == "maxcut":
        if args.rr3 is None:
            raise SystemExit("build maxcut needs --rr3 N")
        spec = {"builder": "maxcut", "rr3": args.rr3, "seed": args.seed}
    elif args.n is None:
        raise SystemExit(f"build {args.kind} needs --n")
    h, label = _stage("problem", build_problem, spec)
    hash_ = config_hash({"command": "build", **spec})
    payload = {"config_hash": hash_, **h.to_dict()}
    _write_json(Path(args.out), payload)
    if args.kind == "maxcut":
        print(f"{label}: {h.num_terms()} edges -> {args.out}")
    else:
        print(f"{label}: {_degree_phrase(h)} -> {args.out}")
    return 0


def cmd_quadratize(args: argparse.Namespace) -> int:
    if args.method == "variational":
        if args.n is None:
            raise SystemExit("quadratize variational needs --n")
        template = variational_template(args.n)
        hash_ = config_hash({"command": "quadratize",
                             "method": "variational", "n": args.n})
        payload = {
            "config_hash": hash_,
            "n": template.n,
            "num_parameters": template.num_parameters,
            "pairs": [list(pair) for pair in template.pair_order],
        }
        _write_json(Path(args.out), payload)
        print(f"variational template: {template.num_parameters} parameters "
              f"-> {args.out}")
        return 0
    if not args.problem:
        raise SystemExit("quadratize clique needs --problem")
    h = _stage("problem", load_problem, args.problem)
    if h.degree() < 3:
        raise SystemExit("clique quadratization needs a degree >= 3 problem")
    expansion = _stage("quadratize", clique_expand, h)
    quadratic = expansion.quadratic()
    hash_ = config_hash({"command": "quadratize", "method": "clique",
                         "problem": str(args.problem)})
    payload = {
        "config_hash": hash_,
        "quadratic": quadratic.to_dict(),
        "diagnostics": expansion.diagnostics(),
    }
    _write_json(Path(args.out), payload)
    print(f"clique expansion: {quadratic.num_terms()} quadratic terms "
          f"-> {args.out}")
    return 0


def cmd_resources(args: argparse.Namespace) -> int:
    h = _stage("problem", load_problem, args.problem)
    estimate = _stage(
        "resources", estimate_resources, h, args.topology,
        k=args.k, p=args.p)
    print(f"{'topology':<12}{'2q gates':>10}{'2q depth':>10}")
    print(f"{estimate.topology:<12}{estimate.two_qubit_gate_count:>10}"
          f"{estimate.two_qubit_depth:>10}")
    if args.out:
        hash_ = config_hash({
            "command": "resources", "problem": str(args.problem),
            "topology": args.topology, "k": args.k, "p": args.p})
        _write_json(Path(args.out), {
            "config_hash": hash_,
            "topology": estimate.topology,
            "two_qubit_gate_count": estimate.two_qubit_gate_count,
            "two_qubit_depth": estimate.two_qubit_depth,
        })
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    h = _stage("problem", load_problem, args.problem)
    _stage("validate", _validate_mode, args.mode, h, args.backend)
    train = {key: getattr(args, key)
             for key in ("grid_points", "max_evals", "rhobeg", "tol",
                         "restarts")
             if getattr(args, key) is not None}
    tc = TrainConfig(seed=args.seed, backend=args.backend, chi=args.chi,
                     **train)
    trained = _stage("train", train_for_mode, h, args.mode, args.k, args.p, tc)
    hash_ = config_hash({
        "command": "train", "problem": str(args.problem), "mode": args.mode,
        "k": args.k, "p": args.p, "backend": args.backend, "chi": args.chi,
        "seed": args.seed, "train": train})
    _write_json(Path(args.out), _result_payload(trained, hash_))
    if args.trace_csv:
        _write_delimited(Path(args.trace_csv), _trace_csv(trained.result),
                         hash_)
    print(f"{args.mode} p={args.p}: cost energy "
          f"{trained.cost_energy:.6f} -> {args.out}")
    return 0


def _load_trained(path: "str | Path", h: ZPolynomial) -> TrainedAnsatz:
    data = json.loads(Path(path).read_text())
    result = TrainResult(
        betas=tuple(data["betas"]), gammas=tuple(data["gammas"]),
        theta=tuple(data["theta"]) if data.get("theta") is not None else None,
        energy=float(data["energy"]),
        trace=tuple((int(i), float(v)) for i, v in data["trace"]))
    mode, k = data["mode"], data.get("k")
    if mode == "standard":
        ansatz = h
    elif mode == "clique":
        ansatz = clique_expand(h).quadratic()
    elif mode == "variational":
        ansatz = variational_template(h.n).materialize(np.array(result.theta))
    elif mode == "truncated":
        schedule = build_schedule(h.n, k, None)
        ansatz, _ = reachable_terms(h, schedule.mapping, k)
    else:
        raise ValueError(f"unknown mode {mode!r} in {path}")
    return TrainedAnsatz(mode, k, int(data["p"]), result, ansatz,
                         float(data["cost_energy"]))


def cmd_sample(args: argparse.Namespace) -> int:
    h = _stage("problem", load_problem, args.problem)
    trained = _stage("load-result", _load_trained, args.result, h)
    s = _stage("sample", sample_for_mode, h, trained, args.shots, args.lam,
               args.trajectories, args.seed, args.backend, args.chi)
    hash_ = config_hash({
        "command": "sample", "problem": str(args.problem),
        "result": str(args.result), "shots": args.shots, "lam": args.lam,
        "trajectories": args.trajectories, "seed": args.seed,
        "backend": args.backend, "chi": args.chi})
    _write_delimited(Path(args.out), _sampleset_csv(s), hash_)
    print(f"{s.shots} shots, mean energy {s.mean_energy():.6f} -> {args.out}")
    return 0


def _sampleset_csv(s: SampleSet) -> str:
    lines = ["bitstring,count,energy"]
    lines += [f"{text},{count},{format(e, '.12g')}"
              for (text, count), e in zip(s.entries, s.energies)]
    return "\n".join(lines) + "\n"


def cmd_metrics(args: argparse.Namespace) -> int:
    h = _stage("problem", load_problem, args.problem)
    merged: SampleSet | None = None
    for path in args.samples:
        s = _stage("load-samples", SampleSet.from_csv, path)
        merged = s if merged is None else merged.merge(s)
    rows = _stage("metrics", metrics_rows, merged, h,
                  args.instance, _parse_floats(args.alphas),
                  args.emin, args.emax)
    hash_ = config_hash({
        "command": "metrics", "problem": str(args.problem),
        "samples": [str(p) for p in args.samples],
        "alphas": list(_parse_floats(args.alphas)),
        "emin": args.emin, "emax": args.emax, "instance": args.instance})
    _write_delimited(Path(args.out), rows_to_csv(rows), hash_)
    if args.json_out:
        _write_json(Path(args.json_out),
                    {"config_hash": hash_,
                     "rows": json.loads(rows_to_json(rows))})
    if args.cdf_out:
        body = "energy,cumulative_fraction\n" + "".join(
            f"{format(e, '.12g')},{format(f, '.12g')}\n"
            for e, f in energy_cdf(merged))
        _write_delimited(Path(args.cdf_out), body, hash_)
    for row in rows:
        suffix = f" alpha={row.alpha}" if row.alpha is not None else ""
        print(f"{row.metric}{suffix}: {row.value:.6f}")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    started = datetime.now(timezone.utc)
    cfg = _stage("config", _experiment_from_args, args)
    h, default_label = _stage("problem", build_problem, cfg.problem)
    _stage("validate", _validate_mode, cfg.mode, h, cfg.backend)
    instance = cfg.label or default_label
    hash_ = cfg.hash()
    root = Path(cfg.outdir) if cfg.outdir else _output_root()
    rundir = root / f"run-{hash_}"
    rundir.mkdir(parents=True, exist_ok=True)

    _write_json(rundir / "config.json",
                {"config_hash": hash_, **cfg.payload()})
    _write_json(rundir / "problem.json",
                {"config_hash": hash_, **h.to_dict()})

    ks = cfg.sweep_k or (cfg.k,)
    ps = cfg.sweep_p or (cfg.p,)
    lams = cfg.sweep_lam or (cfg.lam,)

    trained_grid: dict[tuple[int | None, int], TrainedAnsatz] = {}
    tc = cfg.train_config()
    for k in ks:
        for p in ps:
            trained = _stage("train", train_for_mode, h, cfg.mode, k, p,
                             replace(tc, seed=cfg.seed))
            trained_grid[(k, p)] = trained
            tag = _point_tag(cfg, k, p, None)
            _write_json(rundir / f"result{tag}.json",
                        _result_payload(trained, hash_))
            _write_delimited(rundir / f"trace{tag}.csv",
                             _trace_csv(trained.result), hash_)

    all_rows: list[MetricsRow] = []
    sample_sets: dict[tuple[int | None, int, float], SampleSet] = {}
    sample_seeds: dict[str, int] = {}
    index = 0
    for k in ks:
        for p in ps:
            for lam in lams:
                seed = cfg.seed + 1 + index
                index += 1
                s = _stage("sample", sample_for_mode, h, trained_grid[(k, p)],
                           cfg.shots, lam, cfg.trajectories, seed,
                           cfg.backend, cfg.chi)
                tag = _point_tag(cfg, k, p, lam)
                sample_sets[(k, p, lam)] = s
                sample_seeds[tag or "-base"] = seed
                _write_delimited(rundir / f"samples{tag}.csv",
                                 _sampleset_csv(s), hash_)
                all_rows.extend(_stage(
                    "metrics", metrics_rows, s, h, instance, cfg.alphas,
                    cfg.emin, cfg.emax,
                    k=k, p=p, lam=lam))

    _write_delimited(rundir / "metrics.csv", rows_to_csv(all_rows), hash_)
    _write_json(rundir / "metrics.json",
                {"config_hash": hash_,
                 "rows": json.loads(rows_to_json(all_rows))})
    figures = _stage("report", _render_figures, rundir, cfg, h,
                     trained_grid, sample_sets, ks, ps, lams)

    _write_json(rundir / "results.json", {
        "config_hash": hash_,
        "instance": instance,
        "config": cfg.payload(),
        "versions": _versions(),
        "seeds": {"train": cfg.seed, "sample": sample_seeds},
        "files": sorted(pth.name for pth in rundir.iterdir()
                        if pth.name not in ("meta.json", "results.json")),
        "figures": [pth.name for pth in figures],
    })
    finished = datetime.now(timezone.utc)
    # wall-clock side-channel, excluded from the byte-identity guarantee
    _write_json(rundir / "meta.json", {
        "started_at": started.isoformat(),
        "finished_at": finished.isoformat(),
        "duration_s": (finished - started).total_seconds(),
    })
    print(f"run {hash_} -> {rundir}")
    for row in all_rows:
        if row.metric == "ratio_mean":
            axes = ", ".join(
                f"{name}={value}" for name, value in
                (("k", row.k), ("p", row.p), ("lam", row.lam))
                if value is not None)
            print(f"  ratio_mean[{axes}]: {row.value:.4f}"
                  if axes else f"  ratio_mean: {row.value:.4f}")
    return 0


def _point_tag(cfg: ExperimentConfig, k: int | None, p: int,
               lam: float | None) -> str:
    parts = []
    if cfg.sweep_k or (cfg.mode == "truncated" and k is not None):
        parts.append(f"k{k}")
    if cfg.sweep_p:
        parts.append(f"p{p}")
    if lam is not None and cfg.sweep_lam:
        parts.append(f"lam{format(lam, 'g')}")
    return ("-" + "-".join(parts)) if parts else ""


def _render_figures(rundir: Path, cfg: ExperimentConfig, h: ZPolynomial,
                    trained_grid, sample_sets, ks, ps, lams) -> list[Path]:
    figures = []
    traces = [(f"k={k} p={p}" if (cfg.sweep_k or cfg.sweep_p) else "training",
               trained.result.trace)
              for (k, p), trained in trained_grid.items()]
    figures.append(reporting.save_training_trace(traces, rundir / "trace.png"))
    if cfg.sweep_lam:
        series = []
        for k in ks:
            for p in ps:
                label = f"k={k} p={p}" if (cfg.sweep_k or cfg.sweep_p) \
                    else cfg.mode
                values = [best_fraction_mean(sample_sets[(k, p, lam)], 0.1)
                          for lam in lams]
                series.append((label, values))
        figures.append(reporting.save_noise_trend(
            lams, series, rundir / "noise.png"))
    if cfg.sweep_k:
        bounds = _spectrum_bounds(h, cfg.emin, cfg.emax)
        series = []
        for p in ps:
            values = [approximation_ratio(sample_sets[(k, p, lams[0])],
                                          bounds)
                      for k in ks]
            series.append((f"p={p}", values))
        figures.append(reporting.save_truncation_sweep(
            list(ks), series, rundir / "truncation.png"))
    if not cfg.sweep_k and not cfg.sweep_lam:
        curves = [(cfg.mode, energy_cdf(sample_sets[(ks[0], ps[0], lams[0])]))]
        figures.append(reporting.save_energy_cdf(curves, rundir / "cdf.png"))
    return figures


# ----------------------------------------------------------------------------
# argument parsing
# ----------------------------------------------------------------------------

def _add_config_flag(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", default=None,
                     help="JSON file whose values override flags")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quadqaoa",
        description="High-order QAOA quadratization and truncation workbench")
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    b = subs.add_parser("build", help="write a problem JSON")
    b.add_argument("kind", choices=("labs", "h4full", "qubo", "maxcut"))
    b.add_argument("--n", type=int, default=None)
    b.add_argument("--rr3", type=int, default=None,
                   help="maxcut: random 3-regular graph on this many nodes")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", required=True)
    _add_config_flag(b)
    b.set_defaults(func=cmd_build)

    q = subs.add_parser("quadratize", help="quadratize a problem")
    q.add_argument("--method", choices=("clique", "variational"),
                   required=True)
    q.add_argument("--problem", default=None)
    q.add_argument("--n", type=int, default=None,
                   help="variational: template size")
    q.add_argument("--out", required=True)
    _add_config_flag(q)
    q.set_defaults(func=cmd_quadratize)

    r = subs.add_parser("resources", help="two-qubit gate counts and depth")
    r.add_argument("--problem", required=True)
    r.add_argument("--topology", choices=("all-to-all", "line"),
                   default="all-to-all")
    r.add_argument("--k", type=int, default=None)
    r.add_argument("--p", type=int, default=1)
    r.add_argument("--out", default=None)
    _add_config_flag(r)
    r.set_defaults(func=cmd_resources)

    def _train_flags(sub: argparse.ArgumentParser) -> None:
        sub.add_argument("--grid-points", type=int, default=None)
        sub.add_argument("--max-evals", type=int, default=None)
        sub.add_argument("--rhobeg", type=float, default=None)
        sub.add_argument("--tol", type=float, default=None)
        sub.add_argument("--restarts", type=int, default=None)

    t = subs.add_parser("train", help="train one ansatz configuration")
    t.add_argument("--problem", required=True)
    t.add_argument("--mode", choices=MODES, default="standard")
    t.add_argument("--k", type=int, default=None)
    t.add_argument("--p", type=int, default=1)
    t.add_argument("--backend", choices=("statevector", "mps"),
                   default="statevector")
    t.add_argument("--chi", type=int, default=None)
    t.add_argument("--seed", type=int, default=0)
    _train_flags(t)
    t.add_argument("--out", required=True)
    t.add_argument("--trace-csv", default=None)
    _add_config_flag(t)
    t.set_defaults(func=cmd_train)

    s = subs.add_parser("sample", help="sample a trained ansatz")
    s.add_argument("--problem", required=True)
    s.add_argument("--result", required=True)
    s.add_argument("--shots", type=int, default=10_000)
    s.add_argument("--lam", type=float, default=0.0,
                   help="two-qubit depolarizing rate")
    s.add_argument("--trajectories", type=int, default=200)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--backend", choices=("statevector", "mps"),
                   default="statevector")
    s.add_argument("--chi", type=int, default=None)
    s.add_argument("--out", required=True)
    _add_config_flag(s)
    s.set_defaults(func=cmd_sample)

    m = subs.add_parser("metrics", help="aggregate sample CSVs into metrics")
    m.add_argument("--problem", required=True)
    m.add_argument("--samples", action="append", required=True)
    m.add_argument("--instance", default="instance")
    m.add_argument("--alphas", default="0.01,0.05,0.1")
    m.add_argument("--emin", type=float, default=None)
    m.add_argument("--emax", type=float, default=None)
    m.add_argument("--out", required=True)
    m.add_argument("--json-out", default=None)
    m.add_argument("--cdf-out", default=None)
    _add_config_flag(m)
    m.set_defaults(func=cmd_metrics)

    run = subs.add_parser("run", help="train, sample, compute metrics, and "
                                      "render report figures")
    run.add_argument("--problem", default=None,
                     help="problem JSON path (alternative to --builder)")
    run.add_argument("--builder", choices=("labs", "h4full", "qubo", "maxcut"),
                     default=None)
    run.add_argument("--n", type=int, default=None)
    run.add_argument("--problem-seed", type=int, default=0)
    run.add_argument("--mode", choices=MODES, default="standard")
    run.add_argument("--k", type=int, default=None)
    run.add_argument("--p", type=int, default=1)
    run.add_argument("--backend", choices=("statevector", "mps"),
                     default="statevector")
    run.add_argument("--chi", type=int, default=None)
    run.add_argument("--lam", type=float, default=0.0)
    run.add_argument("--trajectories", type=int, default=200)
    run.add_argument("--shots", type=int, default=10_000)
    run.add_argument("--seed", type=int, default=0)
    _train_flags(run)
    run.add_argument("--alphas", default="0.01,0.05,0.1")
    run.add_argument("--emin", type=float, default=None)
    run.add_argument("--emax", type=float, default=None)
    run.add_argument("--sweep-k", default=None,
                     help="comma-separated swap-layer values")
    run.add_argument("--sweep-p", default=None,
                     help="comma-separated depth values")
    run.add_argument("--sweep-lam", default=None,
                     help="comma-separated depolarizing rates")
    run.add_argument("--outdir", default=None,
                     help=f"output root (default ${OUTPUT_ROOT_ENV} or ./runs)")
    run.add_argument("--label", default=None,
                     help="instance label used in metrics rows")
    _add_config_flag(run)
    run.set_defaults(func=cmd_run)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _apply_config_file(args, parser)
    try:
        return args.func(args)
    except StageError as err:
        print(str(err), file=sys.stderr)
        return 2
    except (ValueError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
