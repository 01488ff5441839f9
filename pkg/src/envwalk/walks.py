"""Walk simulation and quenched-mean computation.

Scalar reference paths (`simulate_quenched_path`) consume uniforms law by
law; the batch walkers replay exactly the same draws vectorized over
replicas, because both sides build atom choices from the same weight tables
and the same per-(step, walker) stream keys.  Walk noise uses its own key
tag, so walk randomness never touches environment randomness.

Quenched means come in two dual forms that cross-check each other: a Monte
Carlo mean over walks, and exact forward propagation of the full quenched
law over its reachable lattice support (dense vectorized version for d=1
fixed-support fields, dictionary version for any lattice field).  Exact
propagation prunes mass below ``PRUNE_MASS`` and renormalizes; the dense
window is sized by an Azuma tail bound so the discarded mass stays below the
pruning threshold for every environment realization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .environments import (
    FINITE_RANGE,
    FULLY_CORRELATED,
    Environment,
    env_replica,
    level_uniforms,
    query,
    shift as env_shift,
)
from .families import has_fixed_support
from .jumplaws import Atomic, Dirac, law_mean, law_sample
from .streams import (
    TAG_ENV,
    TAG_WALK,
    StreamKey,
    derive_seeds_vec,
    derive_stream,
    lanes_for_cells,
    seed_lanes,
    seed_lanes_vec,
    uniforms_at,
)

__all__ = [
    "WalkPath",
    "QuenchedMeanCurve",
    "ScaledPath",
    "quenched_step",
    "simulate_quenched_path",
    "simulate_averaged_path",
    "local_drift",
    "quenched_mean_mc",
    "quenched_mean_exact",
    "velocity_and_covariance",
    "scaled_path",
    "env_chain_observable",
    "batch_quenched_positions",
    "batch_averaged_positions",
    "exact_mean_curves",
]

PRUNE_MASS = 1e-15
SUPPORT_CAP = 10**7

# Dense propagation window: Azuma gives P(|X_k| > c*smax*sqrt(k)) < 1e-15
# for c = sqrt(2*ln(2e15)) ~ 8.4; pad a little.
_WINDOW_C = 8.6


@dataclass(frozen=True, eq=False)
class WalkPath:
    """Positions X_0..X_N of one walk, shape (N+1, d)."""

    positions: np.ndarray
    env_seed: int
    walk_seed: int
    start: tuple[float, ...]

    @property
    def n_steps(self) -> int:
        return self.positions.shape[0] - 1


@dataclass(frozen=True, eq=False)
class QuenchedMeanCurve:
    """E^w_0[X_n] on a grid of n, with per-n standard errors.

    ``method`` is "exact" (propagated law; SEs identically zero) or "mc"
    (mean over walks; SEs are sample SD / sqrt(M)).
    """

    n_grid: np.ndarray
    means: np.ndarray
    standard_errors: np.ndarray
    method: str

    def mean_at(self, n: int) -> np.ndarray:
        idx = np.searchsorted(self.n_grid, n)
        if idx >= len(self.n_grid) or self.n_grid[idx] != n:
            raise ValueError(f"mean curve has no entry for n={n}")
        return self.means[idx]


@dataclass(frozen=True, eq=False)
class ScaledPath:
    """Diffusively rescaled path observations sqrt(eps)*(X_[t/eps] - centering)."""

    epsilon: float
    times: np.ndarray
    values: np.ndarray
    centering: str


def _walk_stream(env_seed: int, step: int, walk_seed: int, subcell: tuple[int, ...] = ()):
    return derive_stream(StreamKey(env_seed, step, (walk_seed,) + subcell, TAG_WALK))


def quenched_step(env: Environment, n: int, x, stream) -> np.ndarray:
    """One transition of the walk at time ``n`` from ``x`` under ``env``."""
    law = query(env, n, x)
    return np.atleast_1d(np.asarray(x, dtype=float)) + law_sample(law, stream)


def simulate_quenched_path(
    env: Environment, n_steps: int, walk_seed: int, x0=None, subcell: tuple[int, ...] = ()
) -> WalkPath:
    """A walk of ``n_steps`` steps in the fixed environment ``env``.

    Step ``k`` draws its noise from the stream keyed by
    (env seed, level=k, cell=(walk_seed, *subcell), walk tag), so paths
    replay exactly and walks with different seeds are independent.
    ``subcell`` separates the noise of several walks sharing one seed index
    (e.g. the two walks of a difference chain).
    """
    x = np.zeros(env.d) if x0 is None else np.atleast_1d(np.asarray(x0, dtype=float))
    positions = np.empty((n_steps + 1, env.d))
    positions[0] = x
    for k in range(n_steps):
        stream = _walk_stream(env.master_seed, k, walk_seed, subcell)
        x = quenched_step(env, k, x, stream)
        positions[k + 1] = x
    return WalkPath(positions, env.master_seed, walk_seed, tuple(positions[0]))


def simulate_averaged_path(env_template: Environment, n_steps: int, replica: int, x0=None) -> WalkPath:
    """A walk under the averaged law: fresh environment per replica."""
    return simulate_quenched_path(env_replica(env_template, replica), n_steps, replica, x0=x0)


def local_drift(env: Environment) -> np.ndarray:
    """Mean one-step jump at the origin of the (possibly shifted) field."""
    return law_mean(query(env, 0, 0 if env.d == 1 else np.zeros(env.d)))


# ---------------------------------------------------------------------------
# Batched walkers.
# ---------------------------------------------------------------------------


def _require_integer_shift(env: Environment) -> tuple[int, np.ndarray]:
    pt = np.asarray(env.shift_point)
    if not np.allclose(pt, np.round(pt)):
        raise ValueError("batched lattice walks need an integer shift")
    return env.shift_level, np.round(pt).astype(np.int64)


def _lattice_cells(env: Environment, level_abs: int, pos_abs: np.ndarray) -> np.ndarray:
    """Integer cells for integer absolute positions, per model kind."""
    if env.kind == FINITE_RANGE:
        return np.floor(pos_abs / env.dependence_range + 0.5).astype(np.int64)
    # Unit cells: floor(x + U) == x for integral x and U in [0,1)^d.
    return pos_abs


def _row_atomic_index(cum_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Row-wise inverse CDF matching :func:`jumplaws.atomic_index`."""
    idx = (cum_rows <= u[..., None]).sum(axis=-1)
    return np.minimum(idx, cum_rows.shape[-1] - 1)


def batch_quenched_positions(
    env: Environment,
    n_steps: int,
    walk_seeds: np.ndarray,
    x0: int = 0,
    record_steps=None,
    accumulate_drift: bool = False,
    subcell: tuple[int, ...] = (),
):
    """Vectorized quenched walks for d=1 fixed-support families.

    Returns (record_steps, positions, drift_sums): positions has shape
    (len(record_steps), M) of integer walker positions; drift_sums is the
    per-walker sum of local drifts along the path (None unless requested).
    Draw-for-draw identical to :func:`simulate_quenched_path`.
    """
    fam = env.family
    if env.d != 1 or not has_fixed_support(fam):
        raise ValueError("batched lattice walks need a d=1 fixed-support family")
    support = fam.support[:, 0]
    shift_level, shift_pt = _require_integer_shift(env)
    walk_seeds = np.asarray(walk_seeds, dtype=np.int64)
    m = walk_seeds.shape[0]
    record = np.arange(n_steps + 1) if record_steps is None else np.asarray(record_steps)
    wanted = {int(s): i for i, s in enumerate(record)}

    pos = np.full(m, int(x0), dtype=np.int64)
    out = np.empty((len(record), m), dtype=np.int64)
    if 0 in wanted:
        out[wanted[0]] = pos
    drift_sums = np.zeros(m) if accumulate_drift else None
    env_base = seed_lanes(env.master_seed)
    wcells = np.column_stack([walk_seeds] + [np.full(m, s, dtype=np.int64) for s in subcell])

    for k in range(n_steps):
        cells = _lattice_cells(env, k + shift_level, pos + shift_pt[0])
        if env.kind == FULLY_CORRELATED:
            w = fam.weight_table(level_uniforms(env, k + shift_level))
            w = np.broadcast_to(w, (m, support.size))
        else:
            lanes = lanes_for_cells(env_base, k + shift_level, TAG_ENV, cells)
            u_env = uniforms_at((lanes[0][..., None], lanes[1][..., None]), np.arange(fam.n_uniforms))
            w = fam.weight_table(u_env)
        if accumulate_drift:
            drift_sums += w @ support.astype(float)
        wl = lanes_for_cells(env_base, k, TAG_WALK, wcells)
        u = uniforms_at(wl, 0)
        idx = _row_atomic_index(np.cumsum(w, axis=-1), u)
        pos = pos + support[idx]
        if k + 1 in wanted:
            out[wanted[k + 1]] = pos
    return record, out, drift_sums


def batch_averaged_positions(
    env_template: Environment,
    n_steps: int,
    replicas: np.ndarray,
    x0: int = 0,
    record_steps=None,
):
    """Vectorized averaged walks: replica i walks in its own fresh field.

    Draw-for-draw identical to :func:`simulate_averaged_path` per replica.
    d=1 fixed-support families only.
    """
    fam = env_template.family
    if env_template.d != 1 or not has_fixed_support(fam):
        raise ValueError("batched lattice walks need a d=1 fixed-support family")
    support = fam.support[:, 0]
    shift_level, shift_pt = _require_integer_shift(env_template)
    replicas = np.asarray(replicas, dtype=np.int64)
    m = replicas.shape[0]
    seeds = derive_seeds_vec(env_template.master_seed, replicas)
    seed_base = seed_lanes_vec(seeds)
    record = np.arange(n_steps + 1) if record_steps is None else np.asarray(record_steps)
    wanted = {int(s): i for i, s in enumerate(record)}

    pos = np.full(m, int(x0), dtype=np.int64)
    out = np.empty((len(record), m), dtype=np.int64)
    if 0 in wanted:
        out[wanted[0]] = pos

    for k in range(n_steps):
        cells = _lattice_cells(env_template, k + shift_level, pos + shift_pt[0])
        if env_template.kind == FULLY_CORRELATED:
            lanes = lanes_for_cells(seed_base, k + shift_level, TAG_ENV, np.zeros((m, 0), dtype=np.int64))
        else:
            lanes = lanes_for_cells(seed_base, k + shift_level, TAG_ENV, cells)
        u_env = uniforms_at((lanes[0][..., None], lanes[1][..., None]), np.arange(fam.n_uniforms))
        w = fam.weight_table(u_env)
        wl = lanes_for_cells(seed_base, k, TAG_WALK, replicas[:, None])
        u = uniforms_at(wl, 0)
        idx = _row_atomic_index(np.cumsum(w, axis=-1), u)
        pos = pos + support[idx]
        if k + 1 in wanted:
            out[wanted[k + 1]] = pos
    return record, out


# ---------------------------------------------------------------------------
# Quenched means: Monte Carlo and exact propagation.
# ---------------------------------------------------------------------------


def quenched_mean_mc(env: Environment, n_grid, n_walks: int) -> QuenchedMeanCurve:
    """Monte Carlo quenched means over ``n_walks`` independent walks."""
    n_grid = np.asarray(n_grid, dtype=np.int64)
    n_max = int(n_grid.max())
    if env.d == 1 and has_fixed_support(env.family):
        _, positions, _ = batch_quenched_positions(
            env, n_max, np.arange(n_walks), record_steps=n_grid
        )
        x = positions.astype(float)
        means = x.mean(axis=1)[:, None]
        ses = x.std(axis=1, ddof=1)[:, None] / math.sqrt(n_walks)
        return QuenchedMeanCurve(n_grid, means, ses, "mc")
    allpos = np.empty((len(n_grid), n_walks, env.d))
    for i in range(n_walks):
        path = simulate_quenched_path(env, n_max, walk_seed=i)
        allpos[:, i, :] = path.positions[n_grid]
    means = allpos.mean(axis=1)
    ses = allpos.std(axis=1, ddof=1) / math.sqrt(n_walks)
    return QuenchedMeanCurve(n_grid, means, ses, "mc")


def _integer_atoms(law) -> tuple[np.ndarray, np.ndarray]:
    """Atom (points, weights) of a lattice law; rejects anything else."""
    if isinstance(law, Dirac):
        pts, w = np.asarray([law.point]), np.asarray([1.0])
    elif isinstance(law, Atomic):
        pts, w = np.asarray(law.points), np.asarray(law.weights)
    else:
        raise ValueError("exact propagation requires atomic or pointmass laws")
    rounded = np.round(pts)
    if not np.allclose(pts, rounded, atol=1e-9):
        raise ValueError("exact propagation requires laws supported on the integer lattice")
    return rounded.astype(np.int64), w


def quenched_mean_exact(
    env: Environment,
    n_max: int,
    x0=None,
    prune: float = PRUNE_MASS,
    support_cap: int = SUPPORT_CAP,
) -> QuenchedMeanCurve:
    """Exact quenched means by propagating the full quenched law.

    Works for any dimension and any environment whose queried laws are
    atomic on the integer lattice.  Mass below ``prune`` is dropped and the
    law renormalized; exceeding ``support_cap`` lattice points raises.
    """
    x = np.zeros(env.d, dtype=np.int64) if x0 is None else np.atleast_1d(np.asarray(x0)).astype(np.int64)
    state: dict[tuple[int, ...], float] = {tuple(int(v) for v in x): 1.0}
    means = np.empty((n_max + 1, env.d))
    means[0] = x.astype(float)
    for k in range(n_max):
        new: dict[tuple[int, ...], float] = {}
        drift = np.zeros(env.d)
        for site, mass in state.items():
            pts, w = _integer_atoms(query(env, k, np.asarray(site, dtype=float)))
            drift = drift + mass * (w @ pts)
            for p, wt in zip(pts, w):
                if wt == 0.0:
                    continue
                tgt = tuple(int(v) for v in (np.asarray(site) + p))
                new[tgt] = new.get(tgt, 0.0) + mass * wt
        means[k + 1] = means[k] + drift
        if prune > 0.0:
            new = {s: v for s, v in new.items() if v >= prune}
        if len(new) > support_cap:
            raise ValueError(f"exact propagation support exceeded cap ({support_cap})")
        total = sum(new.values())
        state = {s: v / total for s, v in new.items()}
    grid = np.arange(n_max + 1)
    return QuenchedMeanCurve(grid, means, np.zeros_like(means), "exact")


def exact_mean_curves(
    env_template: Environment,
    n_max: int,
    replica_seeds: np.ndarray,
    prune: float = PRUNE_MASS,
) -> np.ndarray:
    """Exact quenched-mean curves for many environment replicas at once.

    Returns means of shape (n_replicas, n_max + 1) for d=1 fixed-support
    fields starting at 0: the dense-window twin of
    :func:`quenched_mean_exact`, vectorized across replicas.  The window is
    clipped by the Azuma bound so clipped mass stays below the pruning
    threshold for every realization; fully correlated fields collapse to a
    cumulative sum of per-level drifts.
    """
    fam = env_template.family
    if env_template.d != 1 or not has_fixed_support(fam):
        raise ValueError("exact mean curves need a d=1 fixed-support family")
    if env_template.shift_level != 0 or any(env_template.shift_point):
        raise ValueError("exact mean curves expect an unshifted template")
    support = fam.support[:, 0]
    sup_f = support.astype(float)
    seeds = np.asarray(replica_seeds, dtype=np.uint64)
    m = seeds.shape[0]
    base = seed_lanes_vec(seeds)

    if env_template.kind == FULLY_CORRELATED:
        drifts = np.empty((m, n_max))
        empty = np.zeros((m, 0), dtype=np.int64)
        for k in range(n_max):
            lanes = lanes_for_cells(base, k, TAG_ENV, empty)
            u = uniforms_at((lanes[0][..., None], lanes[1][..., None]), np.arange(fam.n_uniforms))
            drifts[:, k] = fam.weight_table(u) @ sup_f
        return np.concatenate([np.zeros((m, 1)), np.cumsum(drifts, axis=1)], axis=1)

    smax = int(np.abs(support).max())
    smin_off, smax_off = int(support.min()), int(support.max())
    st = 2 if bool(np.all(np.abs(support) % 2 == 1)) else 1
    base2d = (base[0][:, None], base[1][:, None])

    means = np.zeros((m, n_max + 1))
    lo = hi = 0
    mass = np.ones((m, 1))
    for k in range(n_max):
        positions = np.arange(lo, hi + 1, st, dtype=np.int64)
        cells = _lattice_cells(env_template, k, positions)
        lanes = lanes_for_cells(base2d, k, TAG_ENV, cells[None, :, None])
        u = uniforms_at((lanes[0][..., None], lanes[1][..., None]), np.arange(fam.n_uniforms))
        w = fam.weight_table(u)  # (m, n_pos, n_atoms)

        # Mean recursion: E[X_{k+1}] = E[X_k] + sum_x mass(x) * drift(x).
        drift = w @ sup_f
        means[:, k + 1] = means[:, k] + (mass * drift).sum(axis=1)

        window = min(smax * (k + 1), int(_WINDOW_C * smax * math.sqrt(k + 1)) + smax + 2)
        lo_new, hi_new = max(lo + smin_off, -window), min(hi + smax_off, window)
        if st == 2:
            # Keep the lattice parity (positions at step k+1 have parity k+1).
            if (lo_new - (lo + smin_off)) % 2:
                lo_new += 1
            if (hi_new - (lo + smin_off)) % 2:
                hi_new -= 1
        new_mass = np.zeros((m, (hi_new - lo_new) // st + 1))
        for a, s in enumerate(support.tolist()):
            p_min, p_max = max(lo, lo_new - s), min(hi, hi_new - s)
            if p_min > p_max:
                continue
            j0, j1 = (p_min - lo) // st, (p_max - lo) // st + 1
            t0 = (p_min + s - lo_new) // st
            new_mass[:, t0 : t0 + (j1 - j0)] += mass[:, j0:j1] * w[:, j0:j1, a]
        if prune > 0.0:
            new_mass[new_mass < prune] = 0.0
        new_mass /= new_mass.sum(axis=1, keepdims=True)
        lo, hi, mass = lo_new, hi_new, new_mass
    return means


def _x1_samples(env_template: Environment, n_env: int, n_walk: int) -> np.ndarray:
    """One-step positions under the averaged law, shape (n_env * n_walk, d)."""
    fam = env_template.family
    if env_template.d == 1 and has_fixed_support(fam):
        env_idx = np.repeat(np.arange(n_env), n_walk)
        walk_idx = np.tile(np.arange(n_walk), n_env)
        seeds = derive_seeds_vec(env_template.master_seed, env_idx)
        base = seed_lanes_vec(seeds)
        support = fam.support[:, 0]
        if env_template.kind == FULLY_CORRELATED:
            lanes = lanes_for_cells(base, 0, TAG_ENV, np.zeros((len(seeds), 0), dtype=np.int64))
        else:
            cells = _lattice_cells(env_template, 0, np.zeros(len(seeds), dtype=np.int64))
            lanes = lanes_for_cells(base, 0, TAG_ENV, cells)
        u_env = uniforms_at((lanes[0][..., None], lanes[1][..., None]), np.arange(fam.n_uniforms))
        w = fam.weight_table(u_env)
        wl = lanes_for_cells(base, 0, TAG_WALK, walk_idx[:, None])
        u = uniforms_at(wl, 0)
        idx = _row_atomic_index(np.cumsum(w, axis=-1), u)
        return support[idx].astype(float)[:, None]
    out = np.empty((n_env * n_walk, env_template.d))
    r = 0
    for i in range(n_env):
        env = env_replica(env_template, i)
        for j in range(n_walk):
            stream = _walk_stream(env.master_seed, 0, j)
            out[r] = quenched_step(env, 0, np.zeros(env.d), stream)
            r += 1
    return out


def velocity_and_covariance(env_template: Environment, n_env: int, n_walk: int = 1):
    """Monte Carlo estimates of the annealed one-step mean and covariance.

    Returns (velocity, velocity_se, cov, cov_se): the limiting velocity and
    diffusion covariance of the averaged walk with entrywise standard
    errors, from ``n_env`` fresh fields with ``n_walk`` walks each.
    """
    x1 = _x1_samples(env_template, n_env, n_walk)
    n = x1.shape[0]
    v = x1.mean(axis=0)
    v_se = x1.std(axis=0, ddof=1) / math.sqrt(n)
    centered = x1 - v
    prods = centered[:, :, None] * centered[:, None, :]
    cov = prods.mean(axis=0) * n / (n - 1)
    # Sampling error of the sample covariance: the spread of the products
    # plus the O(1/n) chi-square term from estimating the mean (which is
    # the whole error for two-point laws, where the products are constant).
    diag = np.diag(cov)
    second_order = (np.outer(diag, diag) + cov**2) / n**2
    cov_se = np.sqrt(prods.var(axis=0, ddof=1) / n + second_order)
    return v, v_se, cov, cov_se


def scaled_path(
    path: WalkPath,
    epsilon: float,
    times,
    centering: str = "velocity",
    velocity=None,
    mean_curve: QuenchedMeanCurve | None = None,
) -> ScaledPath:
    """Diffusive rescaling sqrt(eps) * (X_[t/eps] - centering([t/eps])).

    ``centering`` is "velocity" (subtract [t/eps] * v) or "quenched_mean"
    (subtract E^w_0[X_[t/eps]] read from ``mean_curve``).
    """
    times = np.asarray(times, dtype=float)
    ks = np.floor(times / epsilon).astype(np.int64)
    if ks.max() > path.n_steps:
        raise ValueError(f"path of {path.n_steps} steps cannot cover t/eps = {ks.max()}")
    pos = path.positions[ks]
    if centering == "velocity":
        if velocity is None:
            raise ValueError("velocity centering needs the velocity")
        center = ks[:, None] * np.atleast_1d(np.asarray(velocity, dtype=float))
    elif centering == "quenched_mean":
        if mean_curve is None:
            raise ValueError("quenched_mean centering needs a mean curve")
        center = np.stack([mean_curve.mean_at(int(k)) for k in ks])
    else:
        raise ValueError(f"unknown centering {centering!r}")
    values = math.sqrt(epsilon) * (pos - center)
    return ScaledPath(float(epsilon), times, values, centering)


def env_chain_observable(
    env_template: Environment, n: int, f, replicas: int
) -> tuple[float, float]:
    """Mean of f(law at the walker) after n steps, over fresh (field, walk) pairs.

    Estimates the environment-chain stationarity observable: the law seen
    from the particle at time n.  Returns (estimate, standard error).
    """
    fam = env_template.family
    if env_template.d == 1 and has_fixed_support(fam) and n > 0:
        _, pos = batch_averaged_positions(env_template, n, np.arange(replicas), record_steps=[n])
        finals = pos[0]
    elif n == 0:
        finals = np.zeros(replicas, dtype=np.int64)
    else:
        finals = None
    vals = np.empty(replicas)
    for i in range(replicas):
        env = env_replica(env_template, i)
        if finals is not None:
            x_n = float(finals[i])
        else:
            x_n = simulate_quenched_path(env, n, walk_seed=i).positions[-1]
        seen = env_shift(env, n, x_n)
        vals[i] = f(query(seen, 0, 0 if env.d == 1 else np.zeros(env.d)))
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(replicas))
