"""Model-level estimators: drift correlations, quenched-mean variance,
the variance identity, rescaled-path Gaussianity, max-drift decay.

These are the quantities whose growth rates and limits separate the
environments where the environment-conditioned walk obeys a functional CLT
from those where it does not:

* ``estimate_phi``            -- spatial covariance of the local drift.
* ``variance_scan``           -- growth of E|quenched mean - n v|^2 and its
                                 exponent.
* ``variance_identity_check`` -- the two independent routes to that
                                 variance: exact propagation on one side,
                                 drift covariance summed along the
                                 difference chain on the other.
* ``fclt_check``              -- KS Gaussianity of the rescaled walk at
                                 fixed times plus Brownian increment
                                 covariance.
* ``max_drift_check``         -- decay of n^{-1/2} max_k |quenched mean - kv|.

Estimators center with the family's closed-form velocity when it has one;
pass ``velocity`` explicitly otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .diffchain import SAME_ENV, batch_diff_positions
from .environments import FINITE_RANGE, FULLY_CORRELATED, Environment, env_replica, query
from .families import has_fixed_support
from .jumplaws import law_mean
from .stats import (
    GofTestResult,
    ScanCurve,
    bootstrap_se_mean,
    ks_gaussian_test,
    with_fit,
)
from .streams import (
    TAG_DITHER,
    TAG_ENV,
    TAG_OFFSET,
    derive_seeds_vec,
    lanes_for_cells,
    seed_lanes,
    seed_lanes_vec,
    uniforms_at,
)
from .walks import (
    batch_quenched_positions,
    exact_mean_curves,
    quenched_mean_exact,
    quenched_mean_mc,
)

__all__ = [
    "estimate_phi",
    "variance_scan",
    "IdentityReport",
    "variance_identity_check",
    "FcltReport",
    "fclt_check",
    "MaxDriftReport",
    "max_drift_check",
    "analytic_velocity",
]


def analytic_velocity(env: Environment) -> np.ndarray:
    """The family's closed-form annealed one-step mean."""
    v = getattr(env.family, "averaged_mean", None)
    if v is None:
        raise ValueError("family has no closed-form velocity; pass one explicitly")
    return np.asarray(v, dtype=float)


def _replica_drift_grid(env: Environment, seeds: np.ndarray, x_grid: np.ndarray) -> np.ndarray:
    """Local drifts at level 0 and offsets ``x_grid``, shape (m, G); d=1."""
    fam = env.family
    base = seed_lanes_vec(seeds)
    m = seeds.shape[0]
    base2d = (base[0][:, None], base[1][:, None])
    if env.kind == FULLY_CORRELATED:
        lanes = lanes_for_cells(base, 0, TAG_ENV, np.zeros((m, 0), dtype=np.int64))
        u = uniforms_at((lanes[0][..., None], lanes[1][..., None]), np.arange(fam.n_uniforms))
        drift = fam.weight_table(u) @ fam.support[:, 0].astype(float)
        return np.broadcast_to(drift[:, None], (m, x_grid.size))
    if env.kind == FINITE_RANGE:
        cells = np.floor(x_grid / env.dependence_range + 0.5).astype(np.int64)
        cells = np.broadcast_to(cells, (m, x_grid.size))
    else:
        if env.uniform_offset:
            off_lanes = lanes_for_cells(base, 0, TAG_OFFSET, np.zeros((m, 0), dtype=np.int64))
            u_off = uniforms_at(off_lanes, 0)
        else:
            u_off = np.zeros(m)
        cells = np.floor(x_grid[None, :] + u_off[:, None]).astype(np.int64)
    lanes = lanes_for_cells(base2d, 0, TAG_ENV, cells[:, :, None])
    u = uniforms_at((lanes[0][..., None], lanes[1][..., None]), np.arange(fam.n_uniforms))
    return fam.weight_table(u) @ fam.support[:, 0].astype(float)


def estimate_phi(
    env_template: Environment, x_grid, replicas: int, velocity=None
) -> ScanCurve:
    """Drift covariance phi(x) = E[g(field) . g(field shifted by x)].

    ``g`` is the local drift at the origin minus the velocity; the estimate
    pairs the drift at 0 with the drift at separation x over fresh fields.
    phi(0) is the drift variance; under spatial independence phi vanishes
    beyond the dependence range.
    """
    x_grid = np.atleast_1d(np.asarray(x_grid, dtype=float))
    v = analytic_velocity(env_template) if velocity is None else np.atleast_1d(np.asarray(velocity, dtype=float))
    m = replicas
    seeds = derive_seeds_vec(env_template.master_seed, np.arange(m))
    if env_template.d == 1 and has_fixed_support(env_template.family):
        grid_with_zero = np.concatenate([[0.0], x_grid])
        drifts = _replica_drift_grid(env_template, seeds, grid_with_zero)
        g = drifts - v[0]
        prods = g[:, :1] * g[:, 1:]
    else:
        prods = np.empty((m, x_grid.size))
        for i in range(m):
            env = env_replica(env_template, i)
            origin = np.zeros(env.d)
            g0 = law_mean(query(env, 0, origin)) - v
            for j, x in enumerate(x_grid):
                pt = np.full(env.d, x) if env.d > 1 else x
                gx = law_mean(query(env, 0, pt)) - v
                prods[i, j] = g0 @ gx
    est = prods.mean(axis=0)
    ses = prods.std(axis=0, ddof=1) / math.sqrt(m)
    return ScanCurve(x_grid, est, ses)


def _exact_curves(env_template: Environment, n_max: int, m: int) -> np.ndarray:
    """Per-replica exact quenched-mean curves, shape (m, n_max+1); d=1."""
    if env_template.d == 1 and has_fixed_support(env_template.family):
        seeds = derive_seeds_vec(env_template.master_seed, np.arange(m))
        return exact_mean_curves(env_template, n_max, seeds)
    out = np.empty((m, n_max + 1))
    for i in range(m):
        out[i] = quenched_mean_exact(env_replica(env_template, i), n_max).means[:, 0]
    return out


def variance_scan(
    env_template: Environment,
    n_grid,
    env_replicas: int,
    mean_method: str = "exact",
    velocity=None,
    bootstrap_resamples: int = 200,
    mc_walks: int = 1000,
) -> ScanCurve:
    """E|E^w_0[X_n] - n v|^2 versus n, with its fitted growth exponent.

    The exact mean method propagates the full quenched law per replica
    field (no walk noise); the Monte Carlo method averages ``mc_walks``
    walks per field and subtracts the walk-noise variance so the estimate
    stays unbiased.  Standard errors come from a seeded bootstrap over
    replicas.
    """
    n_grid = np.sort(np.asarray(n_grid, dtype=np.int64))
    v = analytic_velocity(env_template) if velocity is None else np.atleast_1d(np.asarray(velocity, dtype=float))
    m = env_replicas
    if mean_method == "exact":
        curves = _exact_curves(env_template, int(n_grid.max()), m)
        dev = curves[:, n_grid] - n_grid[None, :].astype(float) * v[0]
        sq = dev**2
    elif mean_method == "mc":
        sq = np.empty((m, n_grid.size))
        for i in range(m):
            mc = quenched_mean_mc(env_replica(env_template, i), n_grid, mc_walks)
            dev = mc.means[:, 0] - n_grid.astype(float) * v[0]
            sq[i] = dev**2 - mc.standard_errors[:, 0] ** 2
    else:
        raise ValueError(f"unknown mean_method {mean_method!r}")
    est = sq.mean(axis=0)
    ses = bootstrap_se_mean(sq, bootstrap_resamples, env_template.master_seed)
    return with_fit(ScanCurve(n_grid.astype(float), est, ses))


@dataclass(frozen=True, eq=False)
class IdentityReport:
    """Both routes to the quenched-mean variance at one time n.

    ``lhs`` is exact propagation across fields; ``rhs`` sums the drift
    covariance along difference-chain visits.  ``residual`` should vanish
    within ``combined_se`` (and exactly at n=1, where both sides reduce to
    the same drift-variance estimator).
    """

    n: int
    lhs: float
    lhs_se: float
    rhs: float
    rhs_se: float
    residual: float
    combined_se: float
    phi_curve: ScanCurve


def variance_identity_check(
    env_template: Environment,
    n: int,
    env_replicas: int,
    y_replicas: int,
    velocity=None,
) -> IdentityReport:
    """Cross-check E|E^w_0[X_n] - nv|^2 == sum_{k<n} E[phi(Y_k)].

    The two sides share no simulation machinery beyond the drift lookup:
    the left is a quenched-law propagation, the right composes the
    difference chain with the estimated drift covariance.
    """
    v = analytic_velocity(env_template) if velocity is None else np.atleast_1d(np.asarray(velocity, dtype=float))
    curves = _exact_curves(env_template, n, env_replicas)
    dev = curves[:, n] - float(n) * v[0]
    sq = dev * dev
    lhs, lhs_se = float(sq.mean()), float(sq.std(ddof=1) / math.sqrt(env_replicas))

    _, y = batch_diff_positions(
        env_template, max(n - 1, 0), np.arange(y_replicas), x0=0, kind=SAME_ENV
    )
    xs = np.unique(y)
    phi = estimate_phi(env_template, xs.astype(float), env_replicas, velocity=v)
    idx = np.searchsorted(xs, y)
    phi_vals = np.asarray(phi.estimates)
    counts = np.bincount(idx.ravel(), minlength=xs.size) / y_replicas
    rhs = float(counts @ phi_vals)
    per_replica = phi_vals[idx].sum(axis=0)
    occ_noise = float(per_replica.std(ddof=1) / math.sqrt(y_replicas)) if y_replicas > 1 else 0.0
    phi_noise = float(np.sqrt(np.sum((counts * np.asarray(phi.standard_errors)) ** 2)))
    rhs_se = math.hypot(occ_noise, phi_noise)
    combined = math.hypot(lhs_se, rhs_se)
    return IdentityReport(n, lhs, lhs_se, rhs, rhs_se, lhs - rhs, combined, phi)


@dataclass(frozen=True, eq=False)
class FcltReport:
    """Marginal Gaussianity and increment covariance of a rescaled walk."""

    epsilon: float
    centering: str
    n_walks: int
    env_seed: int
    tests: tuple[tuple[float, GofTestResult], ...]
    cov_rows: tuple[tuple[float, float, float, float, float], ...]

    def all_marginals_pass(self, alpha: float = 0.01) -> bool:
        return all(res.p_value > alpha for _, res in self.tests)


def _lattice_span(env: Environment) -> int:
    """Sub-lattice spacing of the walk's position at a fixed time."""
    support = env.family.support[:, 0]
    span = 0
    for s in support.tolist():
        span = math.gcd(span, int(s - support.min()))
    return max(span, 1)


def fclt_check(
    env: Environment,
    epsilon: float,
    time_points,
    walk_replicas: int,
    cov_matrix,
    velocity=None,
    centering: str = "velocity",
    dither: bool = True,
) -> FcltReport:
    """Gaussianity checks of B(t) = sqrt(eps)(X_[t/eps] - centering) at fixed t.

    For each requested t the marginal sample over ``walk_replicas`` walks in
    the single fixed field is KS-tested against Normal(0, t * cov); all
    pairs (s, t) get an empirical Cov(B(s), B(t)) row against min(s, t) *
    cov.  ``centering`` subtracts either [t/eps] * velocity or the exact
    quenched mean.

    Lattice walks put B(t) on a grid of spacing sqrt(eps) * span, which a
    KS test at large sample sizes resolves even when the law is as Gaussian
    as a lattice law can be; weak convergence is therefore checked after a
    deterministic uniform dither of +- half a lattice cell (``dither``,
    default on).
    """
    times = np.sort(np.asarray(time_points, dtype=float))
    ks = np.floor(times / epsilon).astype(np.int64)
    if np.floor(1.0 / epsilon) < 64:
        raise ValueError("epsilon too coarse: need floor(1/eps) >= 64")
    v = analytic_velocity(env) if velocity is None else np.atleast_1d(np.asarray(velocity, dtype=float))
    dvar = float(np.atleast_2d(np.asarray(cov_matrix, dtype=float))[0, 0])
    n_max = int(ks.max())
    _, pos, _ = batch_quenched_positions(env, n_max, np.arange(walk_replicas), record_steps=ks)
    if centering == "velocity":
        center = ks.astype(float) * v[0]
    elif centering == "quenched_mean":
        curve = exact_mean_curves(env, n_max, np.asarray([env.master_seed], dtype=np.uint64))[0]
        center = curve[ks]
    else:
        raise ValueError(f"unknown centering {centering!r}")
    b = math.sqrt(epsilon) * (pos.astype(float) - center[:, None])
    if dither:
        span = _lattice_span(env)
        lanes = lanes_for_cells(
            seed_lanes(env.master_seed), 0, TAG_DITHER, np.arange(walk_replicas)[:, None]
        )
        u = uniforms_at((lanes[0][None, :], lanes[1][None, :]), np.arange(len(ks))[:, None])
        b = b + math.sqrt(epsilon) * span * (u - 0.5)

    tests = []
    for j, t in enumerate(times):
        tests.append((float(t), ks_gaussian_test(b[j], 0.0, float(t) * dvar)))
    cov_rows = []
    centered = b - b.mean(axis=1, keepdims=True)
    for i in range(len(times)):
        for j in range(i + 1, len(times)):
            prods = centered[i] * centered[j]
            emp = float(prods.sum() / (walk_replicas - 1))
            se = float(prods.std(ddof=1) / math.sqrt(walk_replicas))
            expected = float(min(times[i], times[j]) * dvar)
            cov_rows.append((float(times[i]), float(times[j]), emp, expected, se))
    return FcltReport(
        float(epsilon), centering, walk_replicas, env.master_seed,
        tuple(tests), tuple(cov_rows),
    )


@dataclass(frozen=True, eq=False)
class MaxDriftReport:
    """Per-replica n^{-1/2} max_{k<=n} |E^w_0[X_k] - kv| at the grid times."""

    n_grid: np.ndarray
    curves: np.ndarray

    def decay_fraction(self, n_lo: int, n_hi: int, factor: float = 0.5) -> float:
        """Fraction of replicas whose curve at n_hi fell below factor * value at n_lo."""
        grid = list(self.n_grid)
        i, j = grid.index(n_lo), grid.index(n_hi)
        return float((self.curves[:, j] < factor * self.curves[:, i]).mean())


def max_drift_check(
    env_template: Environment, env_replicas: int, n_grid, velocity=None
) -> MaxDriftReport:
    """The scaled running maximum of the quenched-mean drift, per replica.

    Vanishing of this curve as n grows is the almost-sure centering
    statement behind the velocity-centered FCLT; the no-mixing reference
    model keeps it of constant order.
    """
    n_grid = np.sort(np.asarray(n_grid, dtype=np.int64))
    v = analytic_velocity(env_template) if velocity is None else np.atleast_1d(np.asarray(velocity, dtype=float))
    curves = _exact_curves(env_template, int(n_grid.max()), env_replicas)
    ks = np.arange(curves.shape[1], dtype=float)
    dev = np.abs(curves - ks[None, :] * v[0])
    runmax = np.maximum.accumulate(dev, axis=1)
    out = runmax[:, n_grid] / np.sqrt(n_grid.astype(float))
    return MaxDriftReport(n_grid, out)
