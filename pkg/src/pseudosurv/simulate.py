"""Simulation scenarios, Monte-Carlo comparisons, and timing benchmarks.

Three data-generating scenarios are built in:

``rc``
    Right-censored. The latent time is 5.5 + 0.25 z1 + 0.25 z2 plus a
    uniform disturbance on [-3, 3] with z1, z2 independent Bernoulli(1/2);
    censoring is exponential with rate 0.07 (about a third of subjects);
    the regression target is restricted mean survival at tau = 6 on the
    saturated design (1, z1(1-z2), z2(1-z1), z1 z2).
``ic1``
    The same latent time, observed through five visits (the first uniform
    on [0, 6], gaps uniform on [0, 2]), giving mixed interval-censoring;
    default cuts 4, 5, 6, 7 and the same regression target.
``ic2``
    Latent time 6 + 4 z + standard normal noise with z uniform on [0, 2],
    five visits (first uniform on [0, 10], gaps uniform on [0, 4]),
    default cuts 6, 8, 10, 12, 14, and unrestricted mean (tau = inf) on
    the design (1, z).

Replications draw from independent spawned generator streams, so reports
are reproducible bit for bit from the scenario seed, and the fast and
jackknife arms of a comparison see identical datasets.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass

import numpy as np

from .data import Dataset, right_censored_dataset, interval_dataset
from .errors import (
    DidNotConverge,
    NoEvents,
    NonIdentifiable,
    SingularDesign,
    SingularInformation,
)
from .fitting import fit_pch
from .gee import IDENTITY, LinkSpec, fit_gee
from .jackknife import jackknife_km, jackknife_pch
from .km import FAST, JACKKNIFE, RMST, km_fit, km_pseudo_rmst
from .parametric import pseudo_rmst
from .pch import CutGrid

SE_CONVENTION = "sample standard deviation of replication estimates (ddof=1)"

_SATURATED_NAMES = ("intercept", "z1_only", "z2_only", "z1_and_z2")


@dataclass(frozen=True)
class ScenarioConfig:
    """One simulation scenario with its constants resolved.

    ``tau`` and ``cuts`` default per scenario (see the module docstring);
    pass explicit values to override them.
    """

    scenario: str
    n: int
    seed: int = 0
    tau: float | None = None
    cuts: tuple | None = None

    def __post_init__(self):
        if self.scenario not in ("rc", "ic1", "ic2"):
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.n < 2:
            raise ValueError("scenario needs n >= 2")
        if self.tau is None:
            object.__setattr__(self, "tau", math.inf if self.scenario == "ic2" else 6.0)
        if self.cuts is None and self.scenario != "rc":
            default = (4.0, 5.0, 6.0, 7.0) if self.scenario == "ic1" else (6.0, 8.0, 10.0, 12.0, 14.0)
            object.__setattr__(self, "cuts", default)
        if self.cuts is not None:
            object.__setattr__(self, "cuts", tuple(float(c) for c in self.cuts))

    @property
    def beta0(self) -> np.ndarray:
        """Closed-form regression truth for the scenario's target."""
        if self.scenario == "ic2":
            return np.array([6.0, 4.0])
        cells = [_uniform_cell_rmst(m, self.tau) for m in (5.5, 5.75, 5.75, 6.0)]
        return np.array(
            [cells[0], cells[1] - cells[0], cells[2] - cells[0], cells[3] - cells[0]]
        )

    @property
    def coef_names(self) -> tuple:
        return ("intercept", "z") if self.scenario == "ic2" else _SATURATED_NAMES


def _uniform_cell_rmst(m: float, tau: float, half: float = 3.0) -> float:
    """E[min(T, tau)] for T uniform on [m - half, m + half]."""
    lo, hi = m - half, m + half
    if tau >= hi:
        return m
    if tau <= lo:
        return tau
    width = hi - lo
    return (tau**2 - lo**2) / (2 * width) + tau * (hi - tau) / width


def gen_rc(n: int, seed, with_latent: bool = False):
    """Right-censored scenario data; see the module docstring for the design."""
    rng = np.random.default_rng(seed)
    z1 = rng.binomial(1, 0.5, n)
    z2 = rng.binomial(1, 0.5, n)
    tstar = 5.5 + 0.25 * z1 + 0.25 * z2 + rng.uniform(-3.0, 3.0, n)
    censor = rng.exponential(1.0 / 0.07, n)
    times = np.minimum(tstar, censor)
    status = (tstar <= censor).astype(int)
    dataset = right_censored_dataset(
        times, status, _saturated_design(z1, z2), _SATURATED_NAMES
    )
    if with_latent:
        return dataset, {"tstar": tstar, "censor": censor}
    return dataset


def gen_ic1(n: int, seed, with_latent: bool = False):
    """First interval-censored scenario: five visits over a uniform latent time."""
    rng = np.random.default_rng(seed)
    z1 = rng.binomial(1, 0.5, n)
    z2 = rng.binomial(1, 0.5, n)
    tstar = 5.5 + 0.25 * z1 + 0.25 * z2 + rng.uniform(-3.0, 3.0, n)
    left, right = _visit_bracket(rng, tstar, first_scale=6.0, gap_scale=2.0)
    dataset = interval_dataset(left, right, _saturated_design(z1, z2), _SATURATED_NAMES)
    if with_latent:
        return dataset, {"tstar": tstar}
    return dataset


def gen_ic2(n: int, seed, with_latent: bool = False):
    """Second interval-censored scenario: linear model with a continuous covariate."""
    rng = np.random.default_rng(seed)
    z = rng.uniform(0.0, 2.0, n)
    tstar = 6.0 + 4.0 * z + rng.normal(0.0, 1.0, n)
    left, right = _visit_bracket(rng, tstar, first_scale=10.0, gap_scale=4.0)
    design = np.column_stack([np.ones(n), z])
    dataset = interval_dataset(left, right, design, ("intercept", "z"))
    if with_latent:
        return dataset, {"tstar": tstar}
    return dataset


def generate(config: ScenarioConfig, seed=None, with_latent: bool = False):
    """Generate one dataset for a scenario config (seed override optional)."""
    use = config.seed if seed is None else seed
    if config.scenario == "rc":
        return gen_rc(config.n, use, with_latent)
    if config.scenario == "ic1":
        return gen_ic1(config.n, use, with_latent)
    return gen_ic2(config.n, use, with_latent)


def _saturated_design(z1, z2):
    return np.column_stack(
        [np.ones(z1.size), z1 * (1 - z2), z2 * (1 - z1), z1 * z2]
    ).astype(float)


def _visit_bracket(rng, tstar, first_scale, gap_scale, visits: int = 5):
    """Bracket each latent time by a subject-specific visit schedule.

    The first visit is uniform on [0, first_scale]; later visits add
    uniform [0, gap_scale] gaps. Times before the first visit are
    left-censored at it; times after the last are right-censored.
    """
    n = tstar.size
    v = np.empty((n, visits))
    v[:, 0] = rng.uniform(0.0, first_scale, n)
    for j in range(1, visits):
        v[:, j] = v[:, j - 1] + rng.uniform(0.0, gap_scale, n)
    # >= keeps a time landing exactly on a visit inside its bracket
    after = v >= tstar[:, None]
    first_after = np.argmax(after, axis=1)
    left_censored = tstar < v[:, 0]
    right_censored = tstar > v[:, -1]
    rows = np.arange(n)
    left = np.where(
        left_censored, 0.0, v[rows, np.maximum(first_after - 1, 0)]
    )
    left = np.where(right_censored, v[:, -1], left)
    right = np.where(right_censored, np.inf, v[rows, first_after])
    right = np.where(left_censored, v[:, 0], right)
    return left, right


def true_rmst_beta(scenario: str, draws: int = 10_000_000, seed=0) -> np.ndarray:
    """Monte-Carlo regression truth from uncensored latent draws.

    Complements the closed-form ``ScenarioConfig.beta0``; the two agree to
    Monte-Carlo accuracy and the simulation tests check both.
    """
    rng = np.random.default_rng(seed)
    if scenario in ("rc", "ic1"):
        z1 = rng.binomial(1, 0.5, draws)
        z2 = rng.binomial(1, 0.5, draws)
        tstar = 5.5 + 0.25 * z1 + 0.25 * z2 + rng.uniform(-3.0, 3.0, draws)
        y = np.minimum(tstar, 6.0)
        cells = [
            y[(z1 == a) & (z2 == b)].mean()
            for a, b in ((0, 0), (1, 0), (0, 1), (1, 1))
        ]
        return np.array(
            [cells[0], cells[1] - cells[0], cells[2] - cells[0], cells[3] - cells[0]]
        )
    if scenario == "ic2":
        z = rng.uniform(0.0, 2.0, draws)
        tstar = 6.0 + 4.0 * z + rng.normal(0.0, 1.0, draws)
        design = np.column_stack([np.ones(draws), z])
        coef, *_ = np.linalg.lstsq(design, tstar, rcond=None)
        return coef
    raise ValueError(f"unknown scenario {scenario!r}")


@dataclass(frozen=True, eq=False)
class MonteCarloReport:
    """Bias, spread, and timing of one estimation method over replications.

    ``estimates`` keeps the per-replication coefficient vectors so paired
    comparisons between methods stay possible after aggregation. The MSE
    column satisfies MSE = Bias^2 + (used-1)/used * SE^2 exactly under the
    documented SE convention.
    """

    scenario: str
    method: str
    reps: int
    used: int
    excluded: int
    beta0: np.ndarray
    coef_names: tuple
    estimates: np.ndarray
    bias: np.ndarray
    se: np.ndarray
    mse: np.ndarray
    total_seconds: float
    se_convention: str = SE_CONVENTION

    def to_csv(self) -> str:
        """Deterministic per-coefficient table (no timing columns)."""
        lines = [f"# scenario={self.scenario} method={self.method} reps={self.reps}"
                 f" used={self.used} excluded={self.excluded}",
                 f"# SE convention: {self.se_convention}",
                 "coefficient,true,bias,se,mse"]
        for name, b0, bias, se, mse in zip(
            self.coef_names, self.beta0, self.bias, self.se, self.mse
        ):
            lines.append(f"{name},{b0:.10g},{bias:.10g},{se:.10g},{mse:.10g}")
        return "\n".join(lines) + "\n"

    def summary(self) -> str:
        head = (
            f"scenario {self.scenario}, method {self.method}: "
            f"{self.used}/{self.reps} replications used "
            f"({self.excluded} excluded), "
            f"pseudo+regression time {self.total_seconds:.3f} s"
        )
        return head + "\n" + self.to_csv()


def monte_carlo(config: ScenarioConfig, method: str, reps: int) -> MonteCarloReport:
    """Replicate the scenario and summarize the chosen method's estimates.

    Pathological replications (non-convergence, lost identifiability,
    singular information) are counted and excluded rather than raised.
    Replication r uses the r-th spawned stream of the scenario seed, so
    fast and jackknife runs with the same config see identical data.
    """
    if method not in (FAST, JACKKNIFE):
        raise ValueError(f"unknown method {method!r}")
    if reps < 2:
        raise ValueError("need at least two replications")
    streams = np.random.SeedSequence(config.seed).spawn(reps)
    estimates = []
    excluded = 0
    total = 0.0
    for stream in streams:
        dataset = generate(config, seed=stream)
        try:
            beta_hat, seconds = _estimate_once(config, dataset, method)
        except (DidNotConverge, NonIdentifiable, SingularInformation,
                SingularDesign, NoEvents):
            excluded += 1
            continue
        estimates.append(beta_hat)
        total += seconds
    beta0 = config.beta0
    used = len(estimates)
    est = np.array(estimates) if used else np.empty((0, beta0.size))
    if used >= 2:
        bias = est.mean(axis=0) - beta0
        se = est.std(axis=0, ddof=1)
        mse = ((est - beta0) ** 2).mean(axis=0)
    else:
        bias = se = mse = np.full(beta0.size, np.nan)
    return MonteCarloReport(
        scenario=config.scenario,
        method=method,
        reps=reps,
        used=used,
        excluded=excluded,
        beta0=beta0,
        coef_names=config.coef_names,
        estimates=est,
        bias=bias,
        se=se,
        mse=mse,
        total_seconds=total,
    )


def _estimate_once(config: ScenarioConfig, dataset: Dataset, method: str):
    """Pseudo-observations plus regression for one dataset; returns
    (coefficients, seconds). Timing excludes the initial estimator fit."""
    link = LinkSpec(IDENTITY)
    design = dataset.covariates
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if config.scenario == "rc":
            km = km_fit(dataset)
            start = time.perf_counter()
            if method == FAST:
                pv = km_pseudo_rmst(km, config.tau)
            else:
                pv = jackknife_km(dataset, RMST, config.tau)
            result = fit_gee(pv, design, link)
            seconds = time.perf_counter() - start
        else:
            grid = CutGrid(config.cuts)
            pfit = fit_pch(dataset, grid)
            start = time.perf_counter()
            if method == FAST:
                pv = pseudo_rmst(pfit, dataset, config.tau)
            else:
                pv = jackknife_pch(dataset, grid, RMST, config.tau, fit=pfit)
                if pv.flagged is not None:
                    raise DidNotConverge(
                        "leave-one-out refits failed for "
                        f"{int(pv.flagged.sum())} subjects"
                    )
            result = fit_gee(pv, design, link)
            seconds = time.perf_counter() - start
    return result.beta, seconds


@dataclass(frozen=True, eq=False)
class BenchmarkReport:
    """Wall-clock comparison of the fast and jackknife pipelines."""

    scenario: str
    n: int
    target: str
    tau: float
    fast_seconds: float
    jackknife_seconds: float | None

    @property
    def ratio(self) -> float | None:
        if self.jackknife_seconds is None:
            return None
        return self.jackknife_seconds / self.fast_seconds

    def summary(self) -> str:
        lines = [
            f"scenario {self.scenario}, n={self.n}, target {self.target} at {self.tau:g}",
            f"fast pseudo + regression:      {self.fast_seconds:.6f} s",
        ]
        if self.jackknife_seconds is not None:
            lines.append(
                f"jackknife pseudo + regression: {self.jackknife_seconds:.6f} s"
            )
            lines.append(f"ratio (jackknife / fast):      {self.ratio:.1f}x")
        return "\n".join(lines)

    def to_csv(self) -> str:
        jk = "" if self.jackknife_seconds is None else f"{self.jackknife_seconds:.6f}"
        ratio = "" if self.ratio is None else f"{self.ratio:.3f}"
        return (
            "scenario,n,target,tau,fast_seconds,jackknife_seconds,ratio\n"
            f"{self.scenario},{self.n},{self.target},{self.tau:g},"
            f"{self.fast_seconds:.6f},{jk},{ratio}\n"
        )


def benchmark(
    config: ScenarioConfig,
    *,
    repeat: int = 3,
    include_jackknife: bool = True,
) -> BenchmarkReport:
    """Time the pseudo-observation computation plus regression on one dataset.

    The initial survival estimator (product-limit pass or hazard fit) is
    excluded from both arms. The fast arm reports the best of ``repeat``
    runs; the jackknife arm runs once, since it dominates the budget.
    """
    dataset = generate(config)
    link = LinkSpec(IDENTITY)
    design = dataset.covariates
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if config.scenario == "rc":
            km = km_fit(dataset)

            def fast_run():
                fit_gee(km_pseudo_rmst(km, config.tau), design, link)

            def jack_run():
                fit_gee(jackknife_km(dataset, RMST, config.tau), design, link)
        else:
            grid = CutGrid(config.cuts)
            pfit = fit_pch(dataset, grid)
            pfit.info_factor  # factorization belongs to the untimed fit stage

            def fast_run():
                fit_gee(pseudo_rmst(pfit, dataset, config.tau), design, link)

            def jack_run():
                fit_gee(
                    jackknife_pch(dataset, grid, RMST, config.tau, fit=pfit),
                    design,
                    link,
                )

        fast_seconds = min(_timed(fast_run) for _ in range(max(1, repeat)))
        jackknife_seconds = _timed(jack_run) if include_jackknife else None
    return BenchmarkReport(
        scenario=config.scenario,
        n=config.n,
        target=RMST,
        tau=config.tau,
        fast_seconds=fast_seconds,
        jackknife_seconds=jackknife_seconds,
    )


def _timed(thunk) -> float:
    start = time.perf_counter()
    thunk()
    return time.perf_counter() - start
