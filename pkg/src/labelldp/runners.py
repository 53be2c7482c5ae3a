"""Verification suites and benchmark sweeps behind the command line.

Every runner takes an ExperimentConfig, walks the (mechanism, K, epsilon, n)
grid in list order, and returns a process exit code: 0 on success, 1 when a
verified property fails or a cell aborts. Sweeps buffer all rows and emit
them in grid order, so output is deterministic given the master seed (wall
clock readings excepted).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .config import ExperimentConfig
from .errors import EnumerationGuardError, ParameterError
from .estimators import (
    PerLabelGradients,
    estimator_moments_bruteforce,
    second_moment_bound,
)
from .hard_instance import (
    closed_form_excess_risk,
    linear_loss,
    make_hard_instance,
    reduce_to_theta_hat,
)
from .mechanisms import (
    D_SUBSET,
    SUBSET_MECHANISMS,
    MechanismParams,
    verify_ldp_ratio,
)
from .rng import PURPOSE_DATA, PURPOSE_EVAL, RandomnessStream
from .sgd import (
    Dataset,
    ParameterDomain,
    excess_risk_bound,
    excess_risk_montecarlo,
    train,
)

#: CSV schema of one sweep result, in column order.
CSV_COLUMNS = (
    "mechanism",
    "K",
    "epsilon",
    "n",
    "d",
    "trial",
    "seed",
    "empirical_excess_risk",
    "closed_form_risk",
    "theoretical_bound",
    "wall_time_ms",
)

REDUCE_COLUMNS = (
    "mechanism",
    "K",
    "epsilon",
    "n",
    "trial",
    "seed",
    "theta_estimate_error",
    "alpha_scaled_iterate_error",
)

MOMENT_COLUMNS = ("mechanism", "K", "d", "epsilon", "second_moment", "bound", "mean_error")

#: Fresh samples per trial for the Monte Carlo risk column.
DEFAULT_EVAL_SAMPLES = 4096

RATIO_SLACK = 1e-9
UNBIASEDNESS_TOL = 1e-9
REDUCTION_TOL = 1e-12


def _fmt(value) -> str:
    """Render one CSV field; floats carry 17 significant digits."""
    if isinstance(value, float):
        return format(value, ".17g")
    if value is None:
        return ""
    return str(value)


def _write_csv(path: str, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _grid(config: ExperimentConfig):
    """Yield (cell_index, mechanism, k, epsilon, n) in deterministic order."""
    cell = 0
    for mech in config.mechanisms:
        for k in config.ks:
            for eps in config.epsilons:
                for n in config.ns:
                    yield cell, mech, k, eps, n
                    cell += 1


def _cell_params(config: ExperimentConfig, mech: str, k: int, eps: float) -> MechanismParams:
    if mech == D_SUBSET:
        return MechanismParams(epsilon=eps, num_labels=k, subset_size=config.subset_size_for(k, eps))
    return MechanismParams(epsilon=eps, num_labels=k)


def _trial_seed(config: ExperimentConfig, cell: int, trial: int) -> int:
    return RandomnessStream(config.master_seed).derive(cell, trial).derived_seed()


# ---------------------------------------------------------------------------
# verify-privacy
# ---------------------------------------------------------------------------


def run_verify_privacy(
    config: ExperimentConfig,
    likelihood_override=None,
    log: Callable[[str], None] = print,
) -> int:
    """Enumerate worst-case likelihood ratios over the config grid.

    Fails (exit 1) if any ratio exceeds e^eps * (1 + 1e-9); cells beyond the
    enumeration guard are skipped with a warning, not failed.
    """
    failures = 0
    checked = 0
    for mech in config.mechanisms:
        if mech not in SUBSET_MECHANISMS:
            log(f"# skip {mech}: no exhaustive enumeration for this mechanism")
            continue
        for k in config.ks:
            for eps in config.epsilons:
                try:
                    params = _cell_params(config, mech, k, eps)
                    ratio = verify_ldp_ratio(mech, params, likelihood_fn=likelihood_override)
                except EnumerationGuardError as exc:
                    log(f"# skip {mech} K={k} eps={_fmt(float(eps))}: {exc}")
                    continue
                target = math.exp(eps)
                ok = ratio <= target * (1.0 + RATIO_SLACK)
                checked += 1
                if not ok:
                    failures += 1
                d = params.subset_size if mech == D_SUBSET else None
                log(
                    f"{mech} K={k} eps={_fmt(float(eps))} d={d if d is not None else '-'} "
                    f"ratio={ratio:.12g} target={target:.12g} {'ok' if ok else 'FAIL'}"
                )
    log(f"# verified {checked} cells, {failures} failures")
    return 1 if failures else 0


# ---------------------------------------------------------------------------
# verify-estimators
# ---------------------------------------------------------------------------


def _random_gradients(gen: np.random.Generator, k: int, dim: int) -> PerLabelGradients:
    """Random per-label gradients with row norms spread over (0, 1]."""
    raw = gen.standard_normal((k, dim))
    norms = np.linalg.norm(raw, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    scales = gen.uniform(0.05, 1.0, size=(k, 1))
    return PerLabelGradients(matrix=raw / norms * scales, lipschitz_bound=1.0)


def run_verify_estimators(
    config: ExperimentConfig,
    gradient_sets: int = 20,
    log: Callable[[str], None] = print,
) -> int:
    """Brute-force estimator means and second moments over the config grid.

    Each cell checks the standard-basis gradient set plus ``gradient_sets``
    random Lipschitz sets at random true labels; unbiasedness must hold to
    1e-9 per coordinate and the second moment must stay below its closed-form
    bound. Writes one record per cell to config.out when set.
    """
    records = []
    failures = []
    for cell, mech, k, eps, _n in _grid(config):
        if mech not in SUBSET_MECHANISMS:
            log(f"# skip {mech}: estimator enumeration covers subset/krr mechanisms")
            continue
        try:
            params = _cell_params(config, mech, k, eps)
        except ParameterError as exc:
            log(f"# config error at {mech} K={k} eps={_fmt(float(eps))}: {exc}")
            return 1
        gen = RandomnessStream(config.master_seed).derive(cell).generator
        worst_mean_err = 0.0
        worst_moment = 0.0
        bound = second_moment_bound(mech, params, lipschitz_bound=1.0)
        cell_failed = False
        grad_sets = [PerLabelGradients(matrix=np.eye(k), lipschitz_bound=1.0)]
        grad_sets.extend(_random_gradients(gen, k, k) for _ in range(gradient_sets))
        try:
            for grads in grad_sets:
                y = int(gen.integers(1, k + 1))
                report = estimator_moments_bruteforce(mech, y, grads, params)
                worst_mean_err = max(worst_mean_err, report.mean_error)
                worst_moment = max(worst_moment, report.second_moment)
                if report.mean_error > UNBIASEDNESS_TOL or report.second_moment > bound * (1 + 1e-12):
                    cell_failed = True
        except EnumerationGuardError as exc:
            log(f"# skip {mech} K={k} eps={_fmt(float(eps))}: {exc}")
            continue
        if cell_failed:
            failures.append((mech, k, eps))
        d = params.subset_size if mech == D_SUBSET else None
        records.append((mech, k, d, float(eps), worst_moment, bound, worst_mean_err))
        log(
            f"{mech} K={k} eps={_fmt(float(eps))} d={d if d is not None else '-'} "
            f"mean_err={worst_mean_err:.3g} moment={worst_moment:.12g} bound={bound:.12g} "
            f"{'FAIL' if cell_failed else 'ok'}"
        )
    if config.out:
        _write_csv(config.out, MOMENT_COLUMNS, records)
    if failures:
        for mech, k, eps in failures:
            log(f"# FAILED cell: {mech} K={k} eps={_fmt(float(eps))}")
        return 1
    return 0


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ResultRow:
    """One trial of one grid cell, as written to the sweep CSV."""

    mechanism: str
    k: int
    epsilon: float
    n: int
    d: int | None
    trial: int
    seed: int
    empirical_excess_risk: float
    closed_form_risk: float
    theoretical_bound: float
    wall_time_ms: float

    def as_csv_fields(self) -> tuple:
        return (
            self.mechanism,
            self.k,
            float(self.epsilon),
            self.n,
            self.d,
            self.trial,
            self.seed,
            self.empirical_excess_risk,
            self.closed_form_risk,
            self.theoretical_bound,
            self.wall_time_ms,
        )


def run_trial(
    config: ExperimentConfig,
    mech: str,
    k: int,
    eps: float,
    n: int,
    trial: int,
    seed: int,
    eval_samples: int = DEFAULT_EVAL_SAMPLES,
) -> ResultRow:
    """One full trial: sample data, train privately, score the average."""
    start = time.perf_counter()
    instance = make_hard_instance(k, n, eps, c_gamma=config.c_gamma)
    loss = linear_loss(k)
    params = _cell_params(config, mech, k, eps)
    base = RandomnessStream(seed)
    _, labels = instance.sampler(base.derive(PURPOSE_DATA).generator, n)
    dataset = Dataset(labels=labels, shared_feature=instance.fixed_feature)
    domain = ParameterDomain(dimension=k, radius=1.0)
    result = train(dataset, loss, domain, params, mech, seed=seed)
    closed = closed_form_excess_risk(result.averaged_iterate, instance)
    estimate = excess_risk_montecarlo(
        result.averaged_iterate,
        instance.sampler,
        loss,
        eval_samples,
        reference_w=instance.direction,
        stream=base.derive(PURPOSE_EVAL),
    )
    if estimate.value < -4.0 * estimate.stderr:
        raise ParameterError(
            f"empirical risk {estimate.value} below -4 standard errors ({estimate.stderr})"
        )
    bound = excess_risk_bound(k, eps, n)
    wall_ms = (time.perf_counter() - start) * 1000.0
    return ResultRow(
        mechanism=mech,
        k=k,
        epsilon=eps,
        n=n,
        d=params.subset_size if mech == D_SUBSET else None,
        trial=trial,
        seed=seed,
        empirical_excess_risk=estimate.value,
        closed_form_risk=closed,
        theoretical_bound=bound,
        wall_time_ms=wall_ms,
    )


def run_sweep(
    config: ExperimentConfig,
    eval_samples: int = DEFAULT_EVAL_SAMPLES,
    log: Callable[[str], None] = print,
) -> int:
    """The benchmark grid: one ResultRow per (cell, trial), buffered then
    written in grid order."""
    if not config.out:
        log("# sweep requires an output path (out = ... or --out)")
        return 2
    rows: list[tuple] = []
    for cell, mech, k, eps, n in _grid(config):
        for trial in range(config.trials):
            seed = _trial_seed(config, cell, trial)
            try:
                row = run_trial(config, mech, k, eps, n, trial, seed, eval_samples)
            except ParameterError as exc:
                log(f"# abort at cell {mech} K={k} eps={_fmt(float(eps))} n={n} trial={trial}: {exc}")
                return 1
            rows.append(row.as_csv_fields())
    _write_csv(config.out, CSV_COLUMNS, rows)
    log(f"# wrote {len(rows)} rows to {config.out}")
    return 0


# ---------------------------------------------------------------------------
# reduce-demo
# ---------------------------------------------------------------------------


def run_reduce_demo(
    config: ExperimentConfig,
    w_hat_override=None,
    log: Callable[[str], None] = print,
) -> int:
    """Train, map the average iterate to a distribution estimate, and record
    the isometry ||theta_hat - theta|| = alpha ||w_hat - b|| per trial.

    ``w_hat_override(instance)`` replaces training (test hook for injected
    estimates). Exit 1 if the two error columns ever disagree beyond 1e-12.
    """
    if not config.out:
        log("# reduce-demo requires an output path (out = ... or --out)")
        return 2
    rows: list[tuple] = []
    worst_gap = 0.0
    for cell, mech, k, eps, n in _grid(config):
        if k % 2 != 0:
            log(f"# reduce-demo requires even K, got {k}")
            return 2
        for trial in range(config.trials):
            seed = _trial_seed(config, cell, trial)
            try:
                instance = make_hard_instance(k, n, eps, c_gamma=config.c_gamma)
                if w_hat_override is not None:
                    w_hat = np.asarray(w_hat_override(instance), dtype=float)
                else:
                    loss = linear_loss(k)
                    params = _cell_params(config, mech, k, eps)
                    base = RandomnessStream(seed)
                    _, labels = instance.sampler(base.derive(PURPOSE_DATA).generator, n)
                    dataset = Dataset(labels=labels, shared_feature=instance.fixed_feature)
                    result = train(
                        dataset, loss, ParameterDomain(k, 1.0), params, mech, seed=seed
                    )
                    w_hat = result.averaged_iterate
                theta_hat = reduce_to_theta_hat(w_hat, k, instance.distribution.gamma)
                theta_err = float(np.linalg.norm(theta_hat - instance.distribution.probabilities))
                scaled_err = instance.alpha * float(np.linalg.norm(w_hat - instance.direction))
            except ParameterError as exc:
                log(f"# abort at cell {mech} K={k} eps={_fmt(float(eps))} n={n} trial={trial}: {exc}")
                return 1
            worst_gap = max(worst_gap, abs(theta_err - scaled_err))
            rows.append((mech, k, float(eps), n, trial, seed, theta_err, scaled_err))
    _write_csv(config.out, REDUCE_COLUMNS, rows)
    log(f"# wrote {len(rows)} rows to {config.out}; worst identity gap {worst_gap:.3g}")
    return 1 if worst_gap > REDUCTION_TOL else 0
