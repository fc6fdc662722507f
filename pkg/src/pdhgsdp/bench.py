"""Benchmark protocol: seed sweeps per problem family, solved-within-budget
tables, and the eta grid search for the balancing policies."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

from .problems import SdpProblem, gen_maxcut, gen_random, gen_snl
from .projections import ProjectionConfig
from .solver import (
    BalancedResidualPolicy,
    FixedPolicy,
    GradientAlignmentPolicy,
    LinesearchPolicy,
    RunTrace,
    SolveConfig,
    SolveError,
    StepsizePolicy,
    TuningFreePolicy,
    solve,
)

FAMILIES = ("rg", "mc", "snl")

DEFAULT_BUDGETS: dict[str, tuple[int, ...]] = {
    "rg": (5000, 10000, 25000),
    "mc": (2500, 5000, 10000),
    "snl": (7500, 15000, 30000),
}

DEFAULT_LS_GRID = (0.1, 0.2, 1.0, 10.0)

ETA_GRID = (0.9, 0.925, 0.95, 0.975, 0.99)

# 33/34/33 family split used by the eta grid search
GRID_SEARCH_SPLIT = {"rg": 33, "mc": 34, "snl": 33}


def make_problem(family: str, seed: int, sizes: Mapping[str, dict] | None = None) -> SdpProblem:
    """Generate one instance; ``sizes`` optionally overrides generator kwargs
    per family."""
    kwargs = dict((sizes or {}).get(family, {}))
    if family == "rg":
        return gen_random(seed, **kwargs)
    if family == "mc":
        return gen_maxcut(seed, **kwargs)
    if family == "snl":
        problem, _ = gen_snl(seed, **kwargs)
        return problem
    raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")


@dataclass(frozen=True)
class BenchConfig:
    families: tuple[str, ...] = FAMILIES
    seeds: int = 100
    budgets: Mapping[str, tuple[int, ...]] = field(
        default_factory=lambda: dict(DEFAULT_BUDGETS)
    )
    policies: tuple[str, ...] = ("fixed", "bpdr", "alv", "ls", "tf")
    ls_s_grid: tuple[float, ...] = DEFAULT_LS_GRID
    tol: float = 1e-6
    sizes: Mapping[str, dict] = field(default_factory=dict)
    policy_params: Mapping[str, dict] = field(default_factory=dict)
    proj: ProjectionConfig = ProjectionConfig()

    def __post_init__(self):
        for family in self.families:
            if family not in FAMILIES:
                raise ValueError(f"unknown family {family!r}")
            budgets = self.budgets[family]
            if any(b2 <= b1 for b1, b2 in zip(budgets, budgets[1:])):
                raise ValueError(
                    f"budgets for {family} must be strictly increasing, got {budgets}"
                )
        if self.seeds < 1:
            raise ValueError("need at least one seed")

    def policy_factories(self) -> list[tuple[str, Callable[[], StepsizePolicy]]]:
        """Expand the policy list; the linesearch entry fans out over its
        s-grid with labels like "ls_s0.2"."""
        out: list[tuple[str, Callable[[], StepsizePolicy]]] = []
        params = self.policy_params
        for name in self.policies:
            if name == "fixed":
                out.append(("fixed", lambda: FixedPolicy(**params.get("fixed", {}))))
            elif name == "bpdr":
                out.append(("bpdr", lambda: BalancedResidualPolicy(**params.get("bpdr", {}))))
            elif name == "alv":
                out.append(("alv", lambda: GradientAlignmentPolicy(**params.get("alv", {}))))
            elif name == "tf":
                out.append(("tf", lambda: TuningFreePolicy(**params.get("tf", {}))))
            elif name == "ls":
                for s in self.ls_s_grid:
                    kw = dict(params.get("ls", {}))
                    kw["s"] = s
                    out.append((f"ls_s{s:g}", lambda kw=kw: LinesearchPolicy(**kw)))
            else:
                raise ValueError(f"unknown policy {name!r}")
        return out


@dataclass(frozen=True)
class RunRecord:
    family: str
    policy: str
    seed: int
    converged: bool
    iterations: int
    error: str | None = None


@dataclass
class BenchResult:
    """solved_fraction per (family, policy, budget), plus per-run records."""

    fractions: dict[tuple[str, str, int], float]
    records: list[RunRecord]

    def fraction(self, family: str, policy: str, budget: int) -> float:
        return self.fractions[(family, policy, budget)]

    def table_csv(self) -> str:
        lines = ["family,policy,budget,solved_fraction"]
        for (family, policy, budget) in sorted(self.fractions):
            lines.append(
                f"{family},{policy},{budget},{self.fractions[(family, policy, budget)]!r}"
            )
        return "\n".join(lines) + "\n"


def run_bench(
    config: BenchConfig,
    trace_dir: str | Path | None = None,
    progress: Callable[[str], None] | None = None,
) -> BenchResult:
    """Sweep (family, policy, seed), one instance per seed, solving once under
    the family's largest budget; solved-within flags for the smaller budgets
    come from the iteration count in the trace. Run errors are recorded
    per-cell and do not abort the sweep.
    """
    if trace_dir is not None:
        trace_dir = Path(trace_dir)
        trace_dir.mkdir(parents=True, exist_ok=True)

    factories = config.policy_factories()
    fractions: dict[tuple[str, str, int], float] = {}
    records: list[RunRecord] = []

    for family in config.families:
        budgets = tuple(config.budgets[family])
        solved_counts = {(label, b): 0 for label, _ in factories for b in budgets}
        for seed in range(1, config.seeds + 1):
            problem = make_problem(family, seed, config.sizes)
            for label, factory in factories:
                trace, err = _run_one(problem, factory(), budgets[-1], config)
                converged = trace.status == "converged"
                iters = trace.iterations
                records.append(RunRecord(family, label, seed, converged, iters, err))
                for budget in budgets:
                    if converged and iters <= budget:
                        solved_counts[(label, budget)] += 1
                if trace_dir is not None:
                    trace.write_csv(trace_dir / f"{family}_{label}_{seed}.csv")
                if progress is not None:
                    progress(f"{family} {label} seed={seed}: {trace.status} in {iters}")
        for label, _ in factories:
            for budget in budgets:
                fractions[(family, label, budget)] = (
                    solved_counts[(label, budget)] / config.seeds
                )
    return BenchResult(fractions=fractions, records=records)


def _run_one(problem, policy, max_iters, config) -> tuple[RunTrace, str | None]:
    cfg = SolveConfig(max_iters=max_iters, tol=config.tol, proj=config.proj)
    try:
        return solve(problem, policy, cfg), None
    except SolveError as exc:
        return exc.trace, str(exc)


@dataclass(frozen=True)
class GridSearchResult:
    # (policy, eta) -> fraction of instances where this eta was fastest
    fastest_fraction: dict[tuple[str, float], float]

    def table_csv(self) -> str:
        lines = ["policy,eta,fastest_fraction"]
        for (policy, eta) in sorted(self.fastest_fraction):
            lines.append(f"{policy},{eta!r},{self.fastest_fraction[(policy, eta)]!r}")
        return "\n".join(lines) + "\n"


def grid_search_eta(
    etas: tuple[float, ...] = ETA_GRID,
    split: Mapping[str, int] | None = None,
    sizes: Mapping[str, dict] | None = None,
    budgets: Mapping[str, int] | None = None,
    tol: float = 1e-6,
    eps0: float = 0.5,
    progress: Callable[[str], None] | None = None,
) -> GridSearchResult:
    """For each eta in the grid, run the two balancing policies over the
    family-split instance pool and report, per policy, the fraction of
    instances on which that eta converged fastest (ties count for every tied
    eta; instances where no eta converges count for none)."""
    split = dict(GRID_SEARCH_SPLIT if split is None else split)
    budgets = dict(budgets or {f: DEFAULT_BUDGETS[f][1] for f in split})
    instances = [
        (family, seed) for family in split for seed in range(1, split[family] + 1)
    ]

    iters_to_tol: dict[tuple[str, float, str, int], float] = {}
    for family, seed in instances:
        problem = make_problem(family, seed, sizes)
        for eta in etas:
            for name, ctor in (
                ("bpdr", BalancedResidualPolicy),
                ("alv", GradientAlignmentPolicy),
            ):
                policy = ctor(eps0=eps0, eta=eta)
                cfg = SolveConfig(max_iters=budgets[family], tol=tol)
                try:
                    trace = solve(problem, policy, cfg)
                except SolveError as exc:
                    trace = exc.trace
                iters_to_tol[(name, eta, family, seed)] = (
                    trace.iterations if trace.status == "converged" else math.inf
                )
                if progress is not None:
                    progress(f"{family} seed={seed} {name} eta={eta}: "
                             f"{iters_to_tol[(name, eta, family, seed)]}")

    fractions: dict[tuple[str, float], float] = {}
    for name in ("bpdr", "alv"):
        wins = {eta: 0 for eta in etas}
        for family, seed in instances:
            per_eta = {eta: iters_to_tol[(name, eta, family, seed)] for eta in etas}
            best = min(per_eta.values())
            if math.isinf(best):
                continue
            for eta, iters in per_eta.items():
                if iters == best:
                    wins[eta] += 1
        for eta in etas:
            fractions[(name, eta)] = wins[eta] / len(instances)
    return GridSearchResult(fastest_fraction=fractions)
