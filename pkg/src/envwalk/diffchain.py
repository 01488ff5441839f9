"""Two-walk difference chains and their exit/excursion statistics.

``same_env`` runs two independent walks in one shared field and tracks
Y_k = X~_k - X_k: because the field correlates the walks whenever they are
close, Y is a Markov chain and not a free walk.  ``independent_env`` runs
the second walk in its own fresh field, which makes Ybar_k = Xhat_k - X_k a
genuine symmetric random walk; it is the comparison object for everything Y
does far from the origin.

The analytics quantify how long Y lingers near coincidence: first exit
times from centered boxes, lengths of excursions away from a box, total
occupation time of slowly growing boxes, and the probability of escaping a
box without first falling into an inner one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .environments import FULLY_CORRELATED, Environment, env_replica
from .families import has_fixed_support
from .stats import InsufficientDataError, ScanCurve, with_fit
from .streams import (
    TAG_ENV,
    TAG_WALK,
    derive_seeds_vec,
    lanes_for_cells,
    seed_lanes_vec,
    uniforms_at,
)
from .walks import _lattice_cells, _require_integer_shift, _row_atomic_index, simulate_quenched_path

__all__ = [
    "SAME_ENV",
    "INDEPENDENT_ENV",
    "DiffChainPath",
    "ExitRecord",
    "ExcursionRecord",
    "ExitTimeScan",
    "ExcursionScan",
    "EscapeEstimate",
    "simulate_diff_chain",
    "batch_diff_positions",
    "exit_time_scan",
    "excursion_record",
    "excursion_scan",
    "occupation_time",
    "exit_escape_probability",
]

SAME_ENV = "same_env"
INDEPENDENT_ENV = "independent_env"


@dataclass(frozen=True, eq=False)
class DiffChainPath:
    """Y_0..Y_N of one difference chain, shape (N+1, d)."""

    values: np.ndarray
    kind: str
    start: tuple[float, ...]


@dataclass(frozen=True)
class ExitRecord:
    """First exit of one replica from the box [-r, r]^d."""

    r: float
    steps: int
    capped: bool


@dataclass(frozen=True, eq=False)
class ExcursionRecord:
    """Alternating entrance/exit times of one replica around a box.

    ``entries[0] == 0`` (the chain starts inside); ``exits[j]`` is the j-th
    departure and ``entries[j+1]`` the following return, so excursion j has
    length ``entries[j+1] - exits[j] >= 1``.
    """

    entries: np.ndarray
    exits: np.ndarray

    @property
    def lengths(self) -> np.ndarray:
        k = min(len(self.entries) - 1, len(self.exits))
        return self.entries[1 : k + 1] - self.exits[:k]


def _pair_seeds(env_template: Environment, replicas: np.ndarray, kind: str):
    if kind == SAME_ENV:
        seeds = derive_seeds_vec(env_template.master_seed, replicas)
        return seeds, seeds
    if kind == INDEPENDENT_ENV:
        a = derive_seeds_vec(env_template.master_seed, replicas, np.zeros_like(replicas))
        b = derive_seeds_vec(env_template.master_seed, replicas, np.ones_like(replicas))
        return a, b
    raise ValueError(f"unknown difference-chain kind {kind!r}")


def _replica_envs(env_template: Environment, replica: int, kind: str):
    if kind == SAME_ENV:
        env = env_replica(env_template, replica)
        return env, env
    if kind == INDEPENDENT_ENV:
        return env_replica(env_template, replica, 0), env_replica(env_template, replica, 1)
    raise ValueError(f"unknown difference-chain kind {kind!r}")


def simulate_diff_chain(
    env_template: Environment, x0, n_steps: int, kind: str, replica: int
) -> DiffChainPath:
    """One difference-chain path: walk X from the origin, walk X~ from x0.

    Replica ``i`` uses its own fresh field(s); the two walks draw disjoint
    noise streams even when they share the field.
    """
    env_a, env_b = _replica_envs(env_template, replica, kind)
    pa = simulate_quenched_path(env_a, n_steps, walk_seed=replica, subcell=(0,))
    pb = simulate_quenched_path(env_b, n_steps, walk_seed=replica, subcell=(1,), x0=x0)
    values = pb.positions - pa.positions
    return DiffChainPath(values, kind, tuple(values[0]))


class _PairWalker:
    """Lockstep batch of (X, X~) pairs for d=1 fixed-support fields.

    Column 0 is the X walk (from 0), column 1 the X~ walk (from x0); all
    stream keys match the scalar :func:`simulate_diff_chain` draw for draw.
    """

    def __init__(self, env_template: Environment, replicas: np.ndarray, x0, kind: str):
        fam = env_template.family
        if env_template.d != 1 or not has_fixed_support(fam):
            raise ValueError("batched difference chains need a d=1 fixed-support family")
        self.env = env_template
        self.fam = fam
        self.support = fam.support[:, 0]
        self.shift_level, shift_pt = _require_integer_shift(env_template)
        self.shift_x = int(shift_pt[0])
        replicas = np.asarray(replicas, dtype=np.int64)
        seeds_a, seeds_b = _pair_seeds(env_template, replicas, kind)
        la, lb = seed_lanes_vec(seeds_a), seed_lanes_vec(seeds_b)
        self.base = (np.stack([la[0], lb[0]], axis=1), np.stack([la[1], lb[1]], axis=1))
        x0 = np.broadcast_to(np.asarray(x0, dtype=np.int64), replicas.shape)
        self.pos = np.stack([np.zeros_like(replicas), x0], axis=1)
        which = np.broadcast_to(np.array([0, 1], dtype=np.int64), (replicas.size, 2))
        self.wcells = np.stack([np.stack([replicas, replicas], axis=1), which], axis=2)
        self.k = 0

    @property
    def y(self) -> np.ndarray:
        return self.pos[:, 1] - self.pos[:, 0]

    def restrict(self, keep: np.ndarray) -> None:
        self.base = (self.base[0][keep], self.base[1][keep])
        self.pos = self.pos[keep]
        self.wcells = self.wcells[keep]

    def step(self) -> np.ndarray:
        env, fam = self.env, self.fam
        level = self.k + self.shift_level
        if env.kind == FULLY_CORRELATED:
            cells = np.zeros(self.pos.shape + (0,), dtype=np.int64)
        else:
            cells = _lattice_cells(env, level, self.pos + self.shift_x)[..., None]
        lanes = lanes_for_cells(self.base, level, TAG_ENV, cells)
        u_env = uniforms_at((lanes[0][..., None], lanes[1][..., None]), np.arange(fam.n_uniforms))
        w = fam.weight_table(u_env)
        wl = lanes_for_cells(self.base, self.k, TAG_WALK, self.wcells)
        u = uniforms_at(wl, 0)
        idx = _row_atomic_index(np.cumsum(w, axis=-1), u)
        self.pos = self.pos + self.support[idx]
        self.k += 1
        return self.y


def batch_diff_positions(
    env_template: Environment,
    n_steps: int,
    replicas: np.ndarray,
    x0=0,
    kind: str = SAME_ENV,
    record_steps=None,
    return_components: bool = False,
):
    """Vectorized difference chains; Y values at the recorded steps, (len, M).

    With ``return_components`` also returns the (X, X~) positions of shape
    (len, M, 2).
    """
    walker = _PairWalker(env_template, np.asarray(replicas, dtype=np.int64), x0, kind)
    record = np.arange(n_steps + 1) if record_steps is None else np.asarray(record_steps)
    wanted = {int(s): i for i, s in enumerate(record)}
    m = walker.pos.shape[0]
    out = np.empty((len(record), m), dtype=np.int64)
    comps = np.empty((len(record), m, 2), dtype=np.int64) if return_components else None
    if 0 in wanted:
        out[wanted[0]] = walker.y
        if comps is not None:
            comps[wanted[0]] = walker.pos
    for k in range(n_steps):
        y = walker.step()
        if k + 1 in wanted:
            out[wanted[k + 1]] = y
            if comps is not None:
                comps[wanted[k + 1]] = walker.pos
    if return_components:
        return record, out, comps
    return record, out


# ---------------------------------------------------------------------------
# Exit times, excursions, occupation, escape.
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ExitTimeScan:
    """Mean first-exit times versus box radius.

    Capped replicas (no exit within ``step_cap``) are excluded from the
    means and surfaced in ``capped_fraction``; radii where every replica
    capped report NaN.
    """

    curve: ScanCurve
    capped_fraction: np.ndarray
    exit_steps: np.ndarray
    step_cap: int

    def records(self) -> list[ExitRecord]:
        out = []
        for j, r in enumerate(np.asarray(self.curve.grid)):
            for s in self.exit_steps[j]:
                capped = s < 0
                out.append(ExitRecord(float(r), int(self.step_cap if capped else s), bool(capped)))
        return out


def exit_time_scan(
    env_template: Environment,
    r_grid,
    replicas: int,
    step_cap: int = 10**6,
    kind: str = SAME_ENV,
    x0: int = 0,
) -> ExitTimeScan:
    """First-exit times of Y from [-r, r] over a radius grid.

    One batch of chains serves every radius (exits from nested boxes are
    ordered); stepping stops once all replicas left the largest box or hit
    ``step_cap``.
    """
    r_grid = np.sort(np.asarray(r_grid, dtype=float))
    walker = _PairWalker(env_template, np.arange(replicas), x0, kind)
    alive = np.arange(replicas)
    exit_steps = np.full((len(r_grid), replicas), -1, dtype=np.int64)
    y0 = walker.y
    for j, r in enumerate(r_grid):
        exit_steps[j, np.abs(y0) > r] = 0
    k = 0
    while alive.size and k < step_cap:
        y = walker.step()
        k += 1
        ay = np.abs(y)
        for j, r in enumerate(r_grid):
            pending = exit_steps[j, alive] < 0
            newly = pending & (ay > r)
            exit_steps[j, alive[newly]] = k
        if k % 64 == 0:
            done = exit_steps[-1, alive] >= 0
            if done.any():
                walker.restrict(~done)
                alive = alive[~done]

    means = np.full(len(r_grid), np.nan)
    ses = np.full(len(r_grid), np.nan)
    capped_fraction = np.empty(len(r_grid))
    for j in range(len(r_grid)):
        steps = exit_steps[j]
        completed = steps[steps >= 0].astype(float)
        capped_fraction[j] = 1.0 - completed.size / replicas
        if completed.size >= 2:
            means[j] = completed.mean()
            ses[j] = completed.std(ddof=1) / math.sqrt(completed.size)
    curve = with_fit(ScanCurve(r_grid, means, ses))
    return ExitTimeScan(curve, capped_fraction, exit_steps, step_cap)


@dataclass(frozen=True, eq=False)
class ExcursionScan:
    """Excursion lengths of Y outside the box [-radius, radius].

    ``survival_curve`` tabulates P(length >= a) on dyadic a with binomial
    standard errors; ``tail_exponent`` is the fitted decay rate b of
    P(length >= a) ~ a^(-b) with its confidence interval.
    """

    box_radius: float
    eps: float
    horizon: int
    lengths: np.ndarray
    n_incomplete: int
    survival_curve: ScanCurve
    tail_exponent: float
    tail_ci: tuple[float, float]


def excursion_record(values: np.ndarray, radius: float) -> ExcursionRecord:
    """Entrance/exit times of one chain around the closed box [-radius, radius].

    ``values`` is a (N+1,) or (N+1, 1) trajectory starting inside the box.
    """
    y = np.abs(np.asarray(values, dtype=float).reshape(len(values), -1)).max(axis=1)
    if y[0] > radius:
        raise ValueError("excursion bookkeeping starts inside the box")
    entries, exits = [0], []
    outside = False
    for k in range(1, len(y)):
        if not outside and y[k] > radius:
            exits.append(k)
            outside = True
        elif outside and y[k] <= radius:
            entries.append(k)
            outside = False
    return ExcursionRecord(np.asarray(entries), np.asarray(exits))


def excursion_scan(
    env_template: Environment,
    horizon: int,
    eps: float,
    replicas: int,
    kind: str = SAME_ENV,
    tail_fit_max: float | None = None,
) -> ExcursionScan:
    """Excursion-length statistics for the box of radius horizon**eps.

    Runs every chain for ``horizon`` steps from Y_0 = 0, collects complete
    excursion lengths (exit to next entrance), and fits the survival tail
    on dyadic lengths up to ``tail_fit_max`` (default sqrt(horizon):
    dropping still-open excursions censors longer lengths and would bias
    the tail steep).  Fewer than 10 complete excursions raises
    InsufficientDataError.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    radius = float(horizon) ** eps
    if tail_fit_max is None:
        tail_fit_max = math.sqrt(horizon)
    walker = _PairWalker(env_template, np.arange(replicas), 0, kind)
    outside = np.zeros(replicas, dtype=bool)
    out_step = np.zeros(replicas, dtype=np.int64)
    lengths: list[np.ndarray] = []
    for k in range(1, horizon + 1):
        y = walker.step()
        ay = np.abs(y)
        leaving = ~outside & (ay > radius)
        returning = outside & (ay <= radius)
        if returning.any():
            lengths.append(k - out_step[returning])
        out_step[leaving] = k
        outside = (outside | leaving) & ~returning
    all_lengths = np.concatenate(lengths) if lengths else np.empty(0, dtype=np.int64)
    n_incomplete = int(outside.sum())
    if all_lengths.size < 10:
        raise InsufficientDataError(
            f"only {all_lengths.size} complete excursions (need >= 10); "
            f"radius={radius:.3g}, horizon={horizon}"
        )
    a_max = min(float(all_lengths.max()), float(tail_fit_max))
    a_grid = 2 ** np.arange(0, max(2, int(math.log2(a_max)) + 1))
    n = all_lengths.size
    surv = np.array([(all_lengths >= a).mean() for a in a_grid])
    ses = np.sqrt(np.clip(surv * (1.0 - surv), 0.0, None) / n)
    curve = with_fit(ScanCurve(a_grid.astype(float), surv, ses))
    if curve.fit is None:
        raise InsufficientDataError("excursion tail fit has too few usable points")
    tail = -curve.fit.exponent
    ci = (-curve.fit.ci_high, -curve.fit.ci_low)
    return ExcursionScan(radius, eps, horizon, all_lengths, n_incomplete, curve, tail, ci)


def occupation_time(
    env_template: Environment,
    n_grid,
    eps: float,
    replicas: int,
    kind: str = SAME_ENV,
) -> ScanCurve:
    """Mean time Y spends in [-n^eps, n^eps] during its first n steps.

    One batch serves the whole grid; per grid point n the box radius is
    n**eps, so the growth exponent of the curve is the occupation exponent.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    n_grid = np.sort(np.asarray(n_grid, dtype=np.int64))
    radii = n_grid.astype(float) ** eps
    walker = _PairWalker(env_template, np.arange(replicas), 0, kind)
    counts = np.zeros((len(n_grid), replicas), dtype=np.int64)
    y = walker.y
    for k in range(int(n_grid.max())):
        ay = np.abs(y)
        live = n_grid > k
        for j in np.nonzero(live)[0]:
            counts[j] += ay <= radii[j]
        y = walker.step()
    est = counts.mean(axis=1)
    ses = counts.std(axis=1, ddof=1) / math.sqrt(replicas)
    return with_fit(ScanCurve(n_grid.astype(float), est, ses))


@dataclass(frozen=True, eq=False)
class EscapeEstimate:
    """P(exit [-r, r] within the budget without entering [-r0, r0]).

    Estimated per deterministic start point on the shell; ``p_min`` is the
    worst start (the quantity bounded below by the shape alpha/r).
    """

    r: float
    r0: float
    time_budget: int
    starts: np.ndarray
    probs: np.ndarray
    ses: np.ndarray
    p_min: float
    p_mean: float


def exit_escape_probability(
    env_template: Environment,
    r: float,
    r0: float,
    time_budget: int,
    replicas: int,
    kind: str = SAME_ENV,
) -> EscapeEstimate:
    """Escape probability from the shell between boxes r0 < r.

    Starts are the integer points y with r0 < |y| <= r in ascending order;
    ``replicas`` is split evenly across them.  Boxes are closed: escape
    means |Y| > r, falling back means |Y| <= r0, both checked at integer
    steps; a start already outside the outer box escapes at time 0.
    """
    if not r0 < r:
        raise ValueError("need r0 < r")
    starts = np.array([y for y in range(-int(r), int(r) + 1) if r0 < abs(y) <= r])
    if starts.size == 0:
        raise ValueError("no integer start points in the shell")
    per = replicas // starts.size
    if per < 1:
        raise ValueError(f"need at least {starts.size} replicas (one per shell point)")
    x0 = np.repeat(starts, per)
    walker = _PairWalker(env_template, np.arange(starts.size * per), x0, kind)
    start_of_row = np.repeat(np.arange(starts.size), per)
    escaped = np.zeros(x0.size, dtype=bool)
    failed = np.zeros(x0.size, dtype=bool)
    alive = np.arange(x0.size)
    y0 = walker.y
    escaped[np.abs(y0) > r] = True
    k = 0
    while alive.size and k < time_budget:
        y = walker.step()
        k += 1
        ay = np.abs(y)
        esc = ay > r
        fail = ~esc & (ay <= r0)
        escaped[alive[esc]] = True
        failed[alive[fail]] = True
        settled = esc | fail
        if settled.any():
            walker.restrict(~settled)
            alive = alive[~settled]

    probs = np.empty(starts.size)
    ses = np.empty(starts.size)
    for i in range(starts.size):
        rows = escaped[start_of_row == i]
        p = rows.mean()
        probs[i] = p
        ses[i] = math.sqrt(max(p * (1.0 - p), 1.0 / per) / per)
    return EscapeEstimate(
        float(r), float(r0), int(time_budget), starts, probs, ses,
        float(probs.min()), float(probs.mean()),
    )
