"""Environment models: queryable, shiftable random fields of jump laws.

An :class:`Environment` is an immutable value ``(kind, family, master_seed,
shift)``; ``query(env, n, x)`` is a pure function of that value, so the same
field can be re-queried, shifted, and shared across workers with no caching
and no order sensitivity.  Four constructions:

* ``lattice_product``    -- i.i.d. law per (level, unit cell), with an
                            optional one-per-field uniform offset of the cell
                            grid, so laws are constant on shifted unit cubes.
* ``finite_range``       -- i.i.d. laws on a cell grid of spacing R; a point
                            takes the law of its nearest grid center (half-up
                            rounding, so ties break deterministically
                            upward).  Separations beyond R*sqrt(d) involve
                            distinct centers and are independent outright.
* ``fully_correlated``   -- one law per level shared by every x: maximal
                            spatial correlation, the no-mixing reference
                            model.
* ``dirac_field``        -- per-cell pointmass laws: given the field, the
                            walk is deterministic (the regularity-failure
                            reference model).

Levels never share stream keys, so distinct time levels are independent by
construction in every model.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .families import DiracSteps, LawFamily, has_fixed_support
from .jumplaws import JumpLaw
from .streams import (
    TAG_ENV,
    TAG_OFFSET,
    StreamKey,
    derive_seed,
    derive_stream,
    key_lanes,
    uniforms_at,
)

__all__ = [
    "Environment",
    "make_lattice_product",
    "make_finite_range",
    "make_fully_correlated",
    "make_dirac",
    "query",
    "shift",
    "env_replica",
    "offset_vector",
]

LATTICE_PRODUCT = "lattice_product"
FINITE_RANGE = "finite_range"
FULLY_CORRELATED = "fully_correlated"
DIRAC_FIELD = "dirac_field"


@dataclass(frozen=True)
class Environment:
    kind: str
    family: LawFamily
    master_seed: int
    d: int
    dependence_range: float | None = None
    uniform_offset: bool = False
    shift_level: int = 0
    shift_point: tuple[float, ...] = ()

    def __post_init__(self):
        if not self.shift_point:
            object.__setattr__(self, "shift_point", (0.0,) * self.d)


def make_lattice_product(
    master_seed: int, d: int, family: LawFamily, uniform_offset: bool = True
) -> Environment:
    """i.i.d. site laws on unit cells, optionally on a uniformly offset grid."""
    if family.d != d:
        raise ValueError(f"family dimension {family.d} != environment dimension {d}")
    return Environment(LATTICE_PRODUCT, family, int(master_seed), d, uniform_offset=uniform_offset)


def make_finite_range(master_seed: int, d: int, dependence_range: float, family: LawFamily) -> Environment:
    """i.i.d. cell laws on a grid of spacing ``dependence_range``."""
    if dependence_range <= 0:
        raise ValueError("dependence_range must be positive")
    if family.d != d:
        raise ValueError(f"family dimension {family.d} != environment dimension {d}")
    return Environment(FINITE_RANGE, family, int(master_seed), d, dependence_range=float(dependence_range))


def make_fully_correlated(master_seed: int, d: int, family: LawFamily) -> Environment:
    """One law per level, shared by every spatial point."""
    if family.d != d:
        raise ValueError(f"family dimension {family.d} != environment dimension {d}")
    return Environment(FULLY_CORRELATED, family, int(master_seed), d)


def make_dirac(master_seed: int, d: int, family: DiracSteps) -> Environment:
    """Per-cell pointmass laws; the quenched walk carries no randomness."""
    if not isinstance(family, DiracSteps):
        raise ValueError("dirac_field requires a DiracSteps family")
    if family.d != d:
        raise ValueError(f"family dimension {family.d} != environment dimension {d}")
    return Environment(DIRAC_FIELD, family, int(master_seed), d)


def offset_vector(env: Environment) -> np.ndarray:
    """The per-field uniform grid offset (zeros when disabled)."""
    if env.kind == LATTICE_PRODUCT and env.uniform_offset:
        stream = derive_stream(StreamKey(env.master_seed, 0, (), TAG_OFFSET))
        return stream.take(env.d)
    return np.zeros(env.d)


def absolute_coords(env: Environment, n: int, x) -> tuple[int, np.ndarray]:
    """Apply the accumulated shift: the field-frame (level, point)."""
    return n + env.shift_level, np.atleast_1d(np.asarray(x, dtype=float)) + np.asarray(env.shift_point)


def cell_index(env: Environment, x_abs: np.ndarray) -> np.ndarray:
    """Integer cell coordinates for field-frame points, shape (..., d).

    lattice_product / dirac_field: floor(x + U) per coordinate.
    finite_range: nearest center of the spacing-R grid, half-up rounding.
    fully_correlated: empty cell tuple (a single shared cell per level).
    """
    x_abs = np.asarray(x_abs, dtype=float)
    if env.kind == FULLY_CORRELATED:
        return np.zeros(x_abs.shape[:-1] + (0,), dtype=np.int64)
    if env.kind == FINITE_RANGE:
        return np.floor(x_abs / env.dependence_range + 0.5).astype(np.int64)
    return np.floor(x_abs + offset_vector(env)).astype(np.int64)


def law_uniforms(env: Environment, n: int, cells: np.ndarray) -> np.ndarray:
    """The family's uniforms for many cells at one level, shape (..., k).

    ``cells`` has shape (..., d); a 1-d array is read as a list of d=1 cells.
    """
    k = env.family.n_uniforms
    cells = np.asarray(cells)
    lanes = key_lanes(env.master_seed, n, TAG_ENV, cells)
    return uniforms_at((lanes[0][..., None], lanes[1][..., None]), np.arange(k))


def level_uniforms(env: Environment, n: int) -> np.ndarray:
    """Uniforms of the level-wide shared cell () -- fully correlated fields."""
    lanes = StreamKey(env.master_seed, n, (), TAG_ENV).lanes()
    return uniforms_at((lanes[0][..., None], lanes[1][..., None]), np.arange(env.family.n_uniforms))


def query(env: Environment, n: int, x) -> JumpLaw:
    """The jump law at time ``n`` and point ``x`` (walk frame)."""
    n_abs, x_abs = absolute_coords(env, n, x)
    cell = cell_index(env, x_abs)
    key = StreamKey(env.master_seed, n_abs, tuple(int(c) for c in cell), TAG_ENV)
    u = derive_stream(key).take(env.family.n_uniforms)
    return env.family.make(u)


def shift(env: Environment, m: int, y) -> Environment:
    """The environment as seen from (m, y): query(shifted, n, x) == query(env, n+m, x+y)."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    new_point = tuple(float(a + b) for a, b in zip(env.shift_point, y))
    return replace(env, shift_level=env.shift_level + int(m), shift_point=new_point)


def env_replica(env: Environment, *index: int) -> Environment:
    """Independent copy of the model with a replica-derived master seed.

    The template's parameters are kept; only the seed changes, so replicas
    are i.i.d. draws of the same environment law.
    """
    return replace(env, master_seed=derive_seed(env.master_seed, *index))


# ---------------------------------------------------------------------------
# Vectorized fast-path helpers (fixed-support families).
# ---------------------------------------------------------------------------


def weight_table_at(env: Environment, n: int, cells: np.ndarray) -> np.ndarray:
    """Atom-weight rows for integer cells at one field-frame level.

    ``cells`` has shape (..., d) (or (...,) treated as d=1); returns weights
    of shape (..., n_atoms).  For fully correlated fields the single level
    law is broadcast.
    """
    fam = env.family
    if not has_fixed_support(fam):
        raise ValueError("weight tables need a fixed-support family")
    if env.kind == FULLY_CORRELATED:
        w = fam.weight_table(level_uniforms(env, n))
        cells = np.asarray(cells)
        lead = cells.shape[:-1] if cells.ndim > 1 else cells.shape
        return np.broadcast_to(w, lead + w.shape[-1:])
    u = law_uniforms(env, n, cells)
    return fam.weight_table(u)


def drift_table_at(env: Environment, n: int, cells: np.ndarray) -> np.ndarray:
    """Local drifts (mean jumps) for integer cells at one level, shape (..., d)."""
    w = weight_table_at(env, n, cells)
    return w @ env.family.support.astype(float)
