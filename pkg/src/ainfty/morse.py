"""Rigid gradient flow trees on flat model manifolds.

Models are tori R^n / 2pi Z^n (n = 1, 2) with f(p) = sum_i cos(p_i) and the
flat metric, so every critical point has coordinates in {0, pi}, stable and
unstable manifolds are exact coordinate subtori, and the one-dimensional flow
theta' = sin(theta) has the closed form tan(theta/2) = tan(theta_0/2) e^t.

A tree problem is solved as a square shooting system in the spirit of the
fibre-product formulation: unknowns are the internal vertex positions plus
the internal edge lengths (log-parametrized); equations are the edge flow
matchings, the membership of each leaf's backward-flowed vertex point in the
input's unstable torus, and of the root's forward flow in the output's
stable torus.  The infinite external tails are absorbed exactly by those
membership conditions.  Flow lines (arity 1) carry an extra level-set
normalization removing the translation symmetry.

Each external and internal edge is perturbed by a bump-windowed constant
vector field, scaled down to zero inside a tiny radius of every critical
point and supported away from the tree's vertices, so distinct leaves with
equal endpoints become transverse.  The sign of a rigid solution is the sign
of the Jacobian determinant of the shooting map in the canonical ordering
(vertex coordinates then log-lengths against edge matchings, leaf conditions
in planar order, root conditions, level cut).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from .algebra import Generator, OperationTable
from .monoid import MonoidTable, ZERO_CLASS
from .novikov import EnergyCutoff
from .trees import Edge, RibbonTree, enumerate_trees

TWO_PI = 2.0 * math.pi
GOLDEN_ANGLE = 2.399963229728653


class MorseSolverError(RuntimeError):
    pass


class PerturbationInsufficientError(MorseSolverError):
    """A converged solution failed the rigidity bound."""


class StepUnderflowError(MorseSolverError):
    """Richardson refinement hit the step-count cap."""


def wrap_angle(x):
    return (x + math.pi) % TWO_PI - math.pi


@dataclass(frozen=True)
class CriticalPoint:
    name: str
    coords: tuple[float, ...]
    index: int

    @property
    def unstable_axes(self) -> tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.coords) if c == 0.0)

    @property
    def stable_axes(self) -> tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.coords) if c != 0.0)


class MorseModel:
    """Flat product model: f(p) = sum cos(p_i) on the n-torus."""

    def __init__(self, name: str, dim: int, criticals: Sequence[CriticalPoint]):
        self.name = name
        self.dim = dim
        self.criticals = tuple(criticals)
        self._by_name = {c.name: c for c in self.criticals}
        self._crit_coords = np.array([c.coords for c in self.criticals])

    def f(self, p) -> float:
        return float(np.sum(np.cos(np.asarray(p, dtype=float))))

    def minus_grad(self, p):
        """Negative gradient field, batched over leading axes."""
        return np.sin(p)

    def critical(self, name: str) -> CriticalPoint:
        try:
            return self._by_name[name]
        except KeyError:
            raise MorseSolverError(f"unknown critical point {name!r}")

    def generators(self) -> tuple[Generator, ...]:
        """Module generators graded by coindex, the cohomological degree."""
        return tuple(Generator(c.name, self.dim - c.index) for c in self.criticals)

    def degree(self, name: str) -> int:
        return self.dim - self.critical(name).index

    def crit_distance(self, p, exclude: Optional[str] = None):
        """Min wrapped distance from p (..., dim) to the critical set,
        optionally ignoring one critical point."""
        coords = self._crit_coords
        if exclude is not None:
            keep = [i for i, c in enumerate(self.criticals) if c.name != exclude]
            coords = coords[keep]
        diff = wrap_angle(p[..., None, :] - coords)
        return np.sqrt(np.sum(diff * diff, axis=-1)).min(axis=-1)

    def morse_smale_check(self) -> bool:
        """Stable/unstable tori intersect transversally or not at all.

        Two coordinate subtori fail transversality only by pinning the same
        coordinate to the same pole with excess dimension; with poles 0 for
        unstable and pi for stable constraints the joint constraints are
        always independent or contradictory.
        """
        for a in self.criticals:
            for b in self.criticals:
                # W^-(a) pins stable axes of a at pi; W^+(b) pins unstable
                # axes of b at 0.  A shared pinned coordinate forces 0 = pi,
                # i.e. the empty intersection, which is transverse.
                if set(a.stable_axes) & set(b.unstable_axes):
                    continue
                codim = len(a.stable_axes) + len(b.unstable_axes)
                if codim > self.dim:
                    return False
        return True


def circle_model() -> MorseModel:
    return MorseModel("circle", 1, [
        CriticalPoint("max", (0.0,), 1),
        CriticalPoint("min", (math.pi,), 0),
    ])


def torus_model() -> MorseModel:
    return MorseModel("flat_torus_2d", 2, [
        CriticalPoint("max", (0.0, 0.0), 2),
        CriticalPoint("sx", (0.0, math.pi), 1),
        CriticalPoint("sy", (math.pi, 0.0), 1),
        CriticalPoint("min", (math.pi, math.pi), 0),
    ])


_MODELS = {"circle": circle_model, "torus": torus_model,
           "flat_torus_2d": torus_model}


def get_model(name: str) -> MorseModel:
    try:
        return _MODELS[name]()
    except KeyError:
        raise MorseSolverError(
            f"unknown model {name!r}; choose from {sorted(_MODELS)}"
        )


# -- perturbation data ---------------------------------------------------------


@dataclass(frozen=True)
class EdgePerturbation:
    """Bump-windowed constant field added to the negative gradient.

    window is in the edge parameter, relative for internal edges (fractions
    of the length) and absolute for external ones.  The field is scaled to
    zero within dead_radius of every critical point except the edge's own
    asymptotic endpoint: a trajectory sitting at its limit point before the
    window must still feel the bump, or index-0 and index-n inputs would be
    pinned to ghost configurations.
    """

    amplitude: Fraction
    direction: tuple[float, ...]
    window: tuple[float, float]
    relative: bool = False
    exempt: Optional[str] = None


@dataclass(frozen=True)
class SolverSettings:
    amplitude: Fraction = Fraction(1, 1000)
    horizon: float = 2.5
    external_window: tuple[float, float] = (1.0, 2.0)  # distance from the vertex
    dead_radius: float = 1e-7
    ramp_radius: float = 3e-7
    steps_external: int = 36
    steps_internal: int = 28
    grid_per_axis: int = 6
    pole_offsets: tuple[float, ...] = (0.03, 0.3)
    length_seeds: tuple[float, ...] = (0.6, 1.4, 3.0, 6.0)
    max_newton: int = 40
    newton_tol: float = 1e-11
    max_seeds: int = 140
    rigidity_floor: float = 1e-6
    condition_bound: float = 1e9
    boundary_margin: float = 1e-8
    length_range: tuple[float, float] = (0.05, 40.0)
    dedupe_tol: float = 1e-5

    def scaled(self, factor: int) -> "SolverSettings":
        import dataclasses
        return dataclasses.replace(self, amplitude=self.amplitude * factor)


def edge_direction(dim: int, slot: int, tree_index: int, k: int) -> tuple[float, ...]:
    """Deterministic unit direction for one edge slot of one tree shape."""
    if dim == 1:
        return (1.0 if (slot + tree_index) % 2 == 0 else -1.0,)
    angle = GOLDEN_ANGLE * (slot + 1) + 0.71 * tree_index + 0.137 * k
    return (math.cos(angle), math.sin(angle))


def edge_perturbations(model: MorseModel, tree: Optional[RibbonTree],
                       tree_index: int, inputs: Sequence[str], output: str,
                       settings: SolverSettings) -> dict:
    """Per-edge bumps: slot 0 is the root edge, 1..k the leaves in planar
    order, then the internal edges in canonical order."""
    if tree is None:
        return {}
    k = len(inputs)
    a, b = settings.external_window
    perts = {"root": EdgePerturbation(
        settings.amplitude, edge_direction(model.dim, 0, tree_index, k), (a, b),
        exempt=output)}
    for i in range(k):
        perts[("leaf", i)] = EdgePerturbation(
            settings.amplitude, edge_direction(model.dim, i + 1, tree_index, k),
            (-b, -a), exempt=inputs[i])
    for j, edge in enumerate(tree.internal_edges()):
        perts[("internal", edge)] = EdgePerturbation(
            settings.amplitude, edge_direction(model.dim, k + 1 + j, tree_index, k),
            (1.0 / 3.0, 2.0 / 3.0), relative=True)
    return perts


# -- the tree problem -----------------------------------------------------------


@dataclass(frozen=True)
class TreeProblem:
    """One rigid-count problem: tree shape, inputs x_1..x_k, output x_0.

    tree is None for arity 1 (a bare flow line, no stable ribbon tree)."""

    model: MorseModel
    tree: Optional[RibbonTree]
    inputs: tuple[str, ...]
    output: str
    tree_index: int = 0
    settings: SolverSettings = field(default_factory=SolverSettings)

    @property
    def k(self) -> int:
        return len(self.inputs)

    def internal_edges(self) -> tuple[Edge, ...]:
        return () if self.tree is None else self.tree.internal_edges()

    def expected_dim(self) -> int:
        """deg(x_0) - sum deg(x_i) + |internal edges|, with the arity-1
        convention |internal| = -1 for the translation quotient."""
        model = self.model
        total = model.degree(self.output) - sum(model.degree(x) for x in self.inputs)
        if self.tree is None:
            if self.k != 1:
                raise MorseSolverError("only arity 1 may omit the tree")
            return total - 1
        return total + len(self.internal_edges())

    def unknown_count(self) -> int:
        if self.tree is None:
            return self.model.dim
        return self.model.dim * len(self.tree.internal_vertices) + len(
            self.internal_edges())


@dataclass(frozen=True, eq=False)
class GradientTreeSolution:
    """A rigid solution: rootward vertex point, lengths, trajectories, sign."""

    problem: TreeProblem
    root_point: np.ndarray
    vertex_points: dict
    lengths: dict
    trajectories: dict
    sign: int
    residual: float
    sigma_min: float


# -- integration ----------------------------------------------------------------


def _bump(u):
    w = np.clip(u, 0.0, 1.0)
    return 16.0 * w * w * (1.0 - w) * (1.0 - w)


def _smoothstep(t):
    w = np.clip(t, 0.0, 1.0)
    return w * w * (3.0 - 2.0 * w)


class _EdgeField:
    """Time-dependent field on one edge; batched over seed rows."""

    def __init__(self, model: MorseModel, pert: Optional[EdgePerturbation],
                 settings: SolverSettings, length=None):
        self.model = model
        self.pert = pert
        self.settings = settings
        self.length = length  # (S, 1) array for internal edges

    def __call__(self, p, s):
        out = self.model.minus_grad(p)
        pert = self.pert
        if pert is None:
            return out
        a, b = pert.window
        if pert.relative:
            a = a * self.length
            b = b * self.length
        chi = _bump((s - a) / (b - a))
        if np.all(chi == 0.0):
            return out
        st = self.settings
        # the critical set is {0, pi}^n, so the squared wrapped distance
        # factorizes per coordinate; the dead zone is tiny, so the slow
        # smoothstep path almost never runs
        w0 = wrap_angle(p)
        wp = wrap_angle(p - math.pi)
        d2 = np.sum(np.minimum(w0 * w0, wp * wp), axis=-1, keepdims=True)
        ramp2 = st.ramp_radius * st.ramp_radius
        near = d2 <= ramp2
        if not near.any():
            scale = float(pert.amplitude) * chi
        else:
            # exclude= makes the distance to the exempt point's own
            # neighborhood large, so rho is 1 there as required
            rho = _smoothstep(
                (self.model.crit_distance(p, exclude=pert.exempt)
                 - st.dead_radius) / (st.ramp_radius - st.dead_radius)
            )[..., None]
            scale = float(pert.amplitude) * chi * rho
        direction = np.array(pert.direction)
        return out + scale * direction


def _rk4(fieldfn, p0, s0, s1, steps):
    """Fixed-step RK4, batched; s0, s1 scalars or (S, 1) arrays."""
    h = (s1 - s0) / steps
    p = np.array(p0, dtype=float)
    s = s0 if isinstance(s0, np.ndarray) else np.full_like(
        p[..., :1], float(s0))
    if isinstance(h, np.ndarray):
        hh = h
    else:
        hh = np.full_like(p[..., :1], float(h))
    for _ in range(steps):
        k1 = fieldfn(p, s)
        k2 = fieldfn(p + 0.5 * hh * k1, s + 0.5 * hh)
        k3 = fieldfn(p + 0.5 * hh * k2, s + 0.5 * hh)
        k4 = fieldfn(p + hh * k3, s + hh)
        p = p + (hh / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        s = s + hh
    return p


def flow(model: MorseModel, p, duration: float, *, perturbation=None,
         settings: Optional[SolverSettings] = None, tol: float = 1e-10,
         max_refinements: int = 16):
    """Flow a point along the negative gradient for a non-negative duration.

    Fixed-step fourth-order integration accepted by Richardson step-halving:
    the step is halved until two consecutive endpoints agree within tol.
    """
    if duration < 0:
        raise MorseSolverError("duration must be non-negative")
    if duration == 0:
        return np.array(p, dtype=float)
    settings = settings or SolverSettings()
    fieldfn = _EdgeField(model, perturbation, settings)
    p0 = np.array(p, dtype=float)[None, :]
    steps = max(8, int(8 * duration))
    prev = _rk4(fieldfn, p0, 0.0, duration, steps)
    for _ in range(max_refinements):
        steps *= 2
        cur = _rk4(fieldfn, p0, 0.0, duration, steps)
        if float(np.max(np.abs(wrap_angle(cur - prev)))) < tol:
            return cur[0]
        prev = cur
    raise StepUnderflowError(
        f"no convergence after {steps} steps for duration {duration}"
    )


# -- the shooting system ----------------------------------------------------------


class _ShootingSystem:
    """Batched residual map for one TreeProblem, with the canonical layout."""

    def __init__(self, problem: TreeProblem, step_scale: int = 1):
        self.problem = problem
        self.model = problem.model
        self.settings = problem.settings
        self.dim = self.model.dim
        self.tree = problem.tree
        self.step_scale = step_scale
        self.perts = edge_perturbations(
            self.model, self.tree, problem.tree_index, problem.inputs,
            problem.output, self.settings)

        if self.tree is None:
            self.vertices = ()
            self.int_edges = ()
        else:
            self.vertices = self.tree.internal_vertices
            self.int_edges = self.tree.internal_edges()
        self.n_unknowns = problem.unknown_count()
        self._voffset = {v: i * self.dim for i, v in enumerate(self.vertices)}
        self._eoffset = {e: len(self.vertices) * self.dim + j
                         for j, e in enumerate(self.int_edges)}

    # layout helpers

    def vertex_slice(self, X, v):
        off = self._voffset[v]
        return X[:, off:off + self.dim]

    def lengths(self, X):
        if not self.int_edges:
            return {}
        return {e: np.exp(X[:, self._eoffset[e]:self._eoffset[e] + 1])
                for e in self.int_edges}

    def residual(self, X):
        st = self.settings
        model = self.model
        H = st.horizon
        n_ext = st.steps_external * self.step_scale
        n_int = st.steps_internal * self.step_scale
        blocks = []

        if self.tree is None:
            p = X
            x1 = model.critical(self.problem.inputs[0])
            x0 = model.critical(self.problem.output)
            q = _rk4(_EdgeField(model, None, st), p, 0.0, -H, n_ext)
            for axis in x1.stable_axes:
                blocks.append(wrap_angle(q[:, axis] - math.pi))
            r = _rk4(_EdgeField(model, None, st), p, 0.0, H, n_ext)
            for axis in x0.unstable_axes:
                blocks.append(wrap_angle(r[:, axis]))
            level = 0.5 * (model.f(x1.coords) + model.f(x0.coords))
            blocks.append(np.sum(np.cos(p), axis=1) - level)
            return np.stack(blocks, axis=1)

        lens = self.lengths(X)
        for e in self.int_edges:
            fieldfn = _EdgeField(model, self.perts[("internal", e)], st,
                                 length=lens[e])
            endpoint = _rk4(fieldfn, self.vertex_slice(X, e.child),
                            np.zeros_like(lens[e]), lens[e], n_int)
            diff = wrap_angle(endpoint - self.vertex_slice(X, e.parent))
            for axis in range(self.dim):
                blocks.append(diff[:, axis])

        leaf_edges = self.tree.leaf_edges()
        for i, name in enumerate(self.problem.inputs):
            crit = model.critical(name)
            w = leaf_edges[i].parent
            fieldfn = _EdgeField(model, self.perts[("leaf", i)], st)
            q = _rk4(fieldfn, self.vertex_slice(X, w), 0.0, -H, n_ext)
            for axis in crit.stable_axes:
                blocks.append(wrap_angle(q[:, axis] - math.pi))

        x0 = model.critical(self.problem.output)
        rootfield = _EdgeField(model, self.perts["root"], st)
        r = _rk4(rootfield, self.vertex_slice(X, self.tree.root_edge.child),
                 0.0, H, n_ext)
        for axis in x0.unstable_axes:
            blocks.append(wrap_angle(r[:, axis]))
        return np.stack(blocks, axis=1)

    def is_square(self) -> bool:
        probe = np.zeros((1, self.n_unknowns))
        return self.residual(probe).shape[1] == self.n_unknowns

    def jacobian(self, X):
        """Central-difference Jacobian, batched: (S, n_eq, n_unknowns).

        All 2n displaced copies ride through one residual call, so the
        integrator's per-call overhead is paid once."""
        h = 1e-6
        n = self.n_unknowns
        S = X.shape[0]
        shifts = np.concatenate([np.eye(n) * h, -np.eye(n) * h], axis=0)
        stacked = (X[None, :, :] + shifts[:, None, :]).reshape(2 * n * S, n)
        values = self.residual(stacked).reshape(2, n, S, -1)
        return np.transpose((values[0] - values[1]) / (2.0 * h), (1, 2, 0))

    # seeding

    def seeds(self) -> np.ndarray:
        """Grid the rootward vertex and the lengths; propagate the remaining
        vertex seeds by reversed flow down the internal edges, so the edge
        matching equations start near zero."""
        st = self.settings
        axis_values = list(
            (np.arange(st.grid_per_axis) + 0.5) * TWO_PI / st.grid_per_axis
        )
        for pole in (0.0, math.pi):
            for off in st.pole_offsets:
                axis_values.extend([pole - off, pole + off])
        axis_values = np.array(sorted(wrap_angle(np.array(axis_values)) % TWO_PI))

        point_axes = [axis_values] * self.dim
        length_axes = [np.log(np.array(st.length_seeds))] * len(self.int_edges)
        grids = np.meshgrid(*(point_axes + length_axes), indexing="ij")
        base = np.stack([g.ravel() for g in grids], axis=1)
        n_seeds = base.shape[0]

        X = np.zeros((n_seeds, self.n_unknowns))
        if self.tree is None:
            X[:, : self.dim] = base[:, : self.dim]
            return X
        anchor = self.tree.root_edge.child
        X[:, self._voffset[anchor]: self._voffset[anchor] + self.dim] = \
            base[:, : self.dim]
        for j, e in enumerate(self.int_edges):
            X[:, self._eoffset[e]] = base[:, self.dim + j]
        # walk edges in canonical (preorder) direction: parent seeds exist
        # before their children are derived
        n_int = st.steps_internal
        lens = self.lengths(X)
        for e in self.int_edges:
            fieldfn = _EdgeField(self.model, self.perts[("internal", e)],
                                 st, length=lens[e])
            child = _rk4(fieldfn, self.vertex_slice(X, e.parent),
                         lens[e], np.zeros_like(lens[e]), n_int)
            X[:, self._voffset[e.child]: self._voffset[e.child] + self.dim] = child
        return X

    # solving

    def solve(self) -> list[dict]:
        st = self.settings
        X = self.seeds()
        score = np.max(np.abs(self.residual(X)), axis=1)
        keep = np.argsort(score, kind="stable")[: st.max_seeds]
        X = X[keep]

        # damped Newton with an active set: converged rows are frozen,
        # stagnant or diverged rows dropped
        done = np.zeros(len(X), dtype=bool)
        for it in range(st.max_newton):
            active = ~done
            if not np.any(active):
                break
            Xa = X[active]
            res = self.residual(Xa)
            norms = np.max(np.abs(res), axis=1)
            newly = norms < st.newton_tol
            idx = np.where(active)[0]
            done[idx[newly]] = True
            stagnation = math.inf if it < 12 else 10.0 ** (3 - it / 2)
            work = ~newly & (norms < stagnation) & np.isfinite(norms)
            if not np.any(work):
                done[idx[~newly]] = True
                break
            Xw = Xa[work]
            J = self.jacobian(Xw)
            # a whisper of ridge keeps singular rows solvable; they produce
            # enormous steps and are culled as divergent
            ridge = 1e-13 * np.eye(self.n_unknowns)
            try:
                step = -np.linalg.solve(J + ridge, res[work][..., None])[..., 0]
            except np.linalg.LinAlgError:
                step = (-np.linalg.pinv(J) @ res[work][..., None])[..., 0]
            lim = np.maximum(1.0, np.max(np.abs(step), axis=1, keepdims=True)
                             / 0.7)
            X[idx[work]] = Xw + step / lim
            # rows that blew up or stalled stay non-converged; filtered below
            done[idx[~newly & ~work]] = True

        norms = np.max(np.abs(self.residual(X)), axis=1)
        converged = X[norms < st.newton_tol]
        if converged.size == 0:
            return []

        # canonicalize and dedupe
        found = {}
        npts = self.dim if self.tree is None else len(self.vertices) * self.dim
        for row in converged:
            canon = row.copy()
            canon[:npts] = canon[:npts] % TWO_PI
            key = tuple(
                0.0 if abs(v - TWO_PI) < 10 * st.dedupe_tol or abs(v) < 10 * st.dedupe_tol
                else round(v / st.dedupe_tol) * st.dedupe_tol
                for v in np.round(canon / st.dedupe_tol) * st.dedupe_tol
            )
            if key not in found:
                found[key] = canon
        return [self._qualify(row) for _, row in sorted(found.items())]

    def _qualify(self, row) -> dict:
        """Rigidity, boundary margins and the determinant sign for one root."""
        st = self.settings
        X = row[None, :]
        # roots at a collapsed or runaway internal edge sit on the stratum
        # boundary, not in the open moduli
        lo, hi = st.length_range
        for e in self.int_edges:
            ell = math.exp(row[self._eoffset[e]])
            if not (lo <= ell <= hi):
                return {"row": row, "sign": 0, "sigma_min": 0.0,
                        "residual": float(np.max(np.abs(self.residual(X)))),
                        "interior": False}
        J = self.jacobian(X)[0]
        svals = np.linalg.svd(J, compute_uv=False)
        sigma_min = float(svals[-1])
        if sigma_min < st.rigidity_floor or svals[0] / sigma_min > st.condition_bound:
            raise PerturbationInsufficientError(
                f"solution with sigma_min={sigma_min:.2e} (cond "
                f"{svals[0] / max(sigma_min, 1e-300):.2e}); enlarge the amplitude"
            )
        ok = self._margins_ok(X)
        sign = int(np.sign(np.linalg.det(J)))
        return {"row": row, "sign": sign, "sigma_min": sigma_min,
                "residual": float(np.max(np.abs(self.residual(X)))),
                "interior": ok}

    def _margins_ok(self, X) -> bool:
        """Backward/forward endpoints must sit in the open strata."""
        st = self.settings
        model = self.model
        H = st.horizon
        n_ext = st.steps_external * self.step_scale
        if self.tree is None:
            x1 = model.critical(self.problem.inputs[0])
            x0 = model.critical(self.problem.output)
            q = _rk4(_EdgeField(model, None, st), X, 0.0, -H, n_ext)
            for axis in x1.unstable_axes:
                if abs(wrap_angle(q[0, axis] - math.pi)) < st.boundary_margin:
                    return False
            r = _rk4(_EdgeField(model, None, st), X, 0.0, H, n_ext)
            for axis in x0.stable_axes:
                if abs(wrap_angle(r[0, axis])) < st.boundary_margin:
                    return False
            return True
        leaf_edges = self.tree.leaf_edges()
        for i, name in enumerate(self.problem.inputs):
            crit = model.critical(name)
            w = leaf_edges[i].parent
            fieldfn = _EdgeField(model, self.perts[("leaf", i)], st)
            q = _rk4(fieldfn, self.vertex_slice(X, w), 0.0, -H, n_ext)
            for axis in crit.unstable_axes:
                if abs(wrap_angle(q[0, axis] - math.pi)) < st.boundary_margin:
                    return False
        x0 = model.critical(self.problem.output)
        rootfield = _EdgeField(model, self.perts["root"], st)
        r = _rk4(rootfield, self.vertex_slice(X, self.tree.root_edge.child),
                 0.0, H, n_ext)
        for axis in x0.stable_axes:
            if abs(wrap_angle(r[0, axis])) < st.boundary_margin:
                return False
        return True


def _shuffle_parity(first: Sequence[int], second: Sequence[int]) -> int:
    word = list(first) + list(second)
    inversions = sum(
        1
        for i in range(len(word))
        for j in range(i + 1, len(word))
        if word[i] > word[j]
    )
    return -1 if inversions % 2 else 1


def unstable_first_parity(crit: CriticalPoint) -> int:
    """Sign relating the coordinate coframe of W^-(crit) to the coorientation
    induced by its oriented unstable frame written before the stable one."""
    return _shuffle_parity(crit.unstable_axes, crit.stable_axes)


def stable_first_parity(crit: CriticalPoint) -> int:
    """Same comparison with the conormal block written first."""
    return _shuffle_parity(crit.stable_axes, crit.unstable_axes)


def _sign_normalization(problem: TreeProblem) -> int:
    """Orientation gauge relating the raw determinant sign (coordinate-frame
    rows in slot order, log-lengths last) to the coherent operation sign.

    Unstable manifolds are oriented by the ascending coordinate eigenbasis.
    Each input slot i contributes its unstable-first shuffle parity times a
    Koszul factor (-1)^{deg(x_i) (i - 1 + n)}; the tree strata need no extra
    factor.  The gauge is pinned by requiring the relations to hold on both
    model manifolds and is re-validated by the relation suite.
    """
    n = problem.model.dim
    sign = 1
    for i, name in enumerate(problem.inputs, start=1):
        crit = problem.model.critical(name)
        sign *= unstable_first_parity(crit)
        if (len(crit.stable_axes) * (i - 1 + n)) % 2:
            sign = -sign
    return sign


def _solution_from_row(system: _ShootingSystem, info: dict) -> GradientTreeSolution:
    problem = system.problem
    row = info["row"]
    st = problem.settings
    model = problem.model
    if problem.tree is None:
        root_point = row[: model.dim]
        vertex_points = {}
        lengths = {}
    else:
        vertex_points = {
            v: row[system._voffset[v]: system._voffset[v] + model.dim]
            for v in system.vertices
        }
        lengths = {e: float(math.exp(row[system._eoffset[e]]))
                   for e in system.int_edges}
        root_point = vertex_points[problem.tree.root_edge.child]
    trajectories = _sample_trajectories(system, row)
    sign = info["sign"] * _sign_normalization(problem)
    return GradientTreeSolution(
        problem=problem, root_point=np.array(root_point),
        vertex_points=vertex_points, lengths=lengths,
        trajectories=trajectories, sign=sign,
        residual=info["residual"], sigma_min=info["sigma_min"],
    )


def _sample_trajectories(system: _ShootingSystem, row, samples: int = 64) -> dict:
    """Per-edge sample arrays for reporting and figures.

    External edges are integrated over the finite horizon; beyond it the
    trajectory follows the exact one-dimensional tails into the critical
    points, appended via the linearized (here exact-rate) flow.
    """
    st = system.settings
    model = system.model
    H = st.horizon
    X = row[None, :]
    out = {}

    def march(fieldfn, start, s0, s1):
        pts = [np.array(start[0])]
        cur = start
        ss = np.linspace(s0, s1, samples)
        for a, b in zip(ss[:-1], ss[1:]):
            cur = _rk4(fieldfn, cur, a, b, 4)
            pts.append(np.array(cur[0]))
        return np.stack(pts)

    def tail(point, direction, length=5.0, rate_steps=24):
        # exact linearized decay toward the nearest pole per coordinate
        pts = [np.array(point)]
        p = np.array(point)
        for t in np.linspace(0, length, rate_steps)[1:]:
            scale = math.exp(-t) if direction > 0 else math.exp(-t)
            moved = np.where(
                np.abs(wrap_angle(p)) < np.abs(wrap_angle(p - math.pi)),
                wrap_angle(p) * scale,
                math.pi + wrap_angle(p - math.pi) * scale,
            )
            pts.append(moved)
        return np.stack(pts)

    if system.tree is None:
        p = X
        unpert = _EdgeField(model, None, st)
        down = march(unpert, p, 0.0, H)
        up = march(unpert, p, 0.0, -H)
        out["line"] = np.concatenate([up[::-1], down[1:]])
        return out

    lens = system.lengths(X)
    for e in system.int_edges:
        fieldfn = _EdgeField(model, system.perts[("internal", e)], st,
                             length=lens[e])
        out[("internal", e)] = march(
            fieldfn, system.vertex_slice(X, e.child), 0.0, float(lens[e][0, 0]))
    leaf_edges = system.tree.leaf_edges()
    for i in range(system.problem.k):
        fieldfn = _EdgeField(model, system.perts[("leaf", i)], st)
        seg = march(fieldfn, system.vertex_slice(X, leaf_edges[i].parent),
                    0.0, -H)
        ext = tail(seg[-1], direction=-1)
        out[("leaf", i)] = np.concatenate([ext[::-1], seg[::-1][1:]])
    rootfield = _EdgeField(model, system.perts["root"], st)
    seg = march(rootfield,
                system.vertex_slice(X, system.tree.root_edge.child), 0.0, H)
    ext = tail(seg[-1], direction=1)
    out["root"] = np.concatenate([seg, ext[1:]])
    return out


def shoot_tree(problem: TreeProblem, seed) -> Optional[GradientTreeSolution]:
    """Newton from a single seed vector; None when it does not converge to a
    rigid interior solution."""
    system = _ShootingSystem(problem)
    if problem.expected_dim() != 0 or not system.is_square():
        raise MorseSolverError("shoot_tree requires an expected dimension 0 problem")
    st = problem.settings
    X = np.array(seed, dtype=float)[None, :]
    if X.shape[1] != system.n_unknowns:
        raise MorseSolverError(
            f"seed has {X.shape[1]} entries, expected {system.n_unknowns}")
    for _ in range(st.max_newton):
        res = system.residual(X)
        if float(np.max(np.abs(res))) < st.newton_tol:
            break
        J = system.jacobian(X)
        step = (-np.linalg.pinv(J) @ res[..., None])[..., 0]
        lim = max(1.0, float(np.max(np.abs(step))) / 0.7)
        X = X + step / lim
    if float(np.max(np.abs(system.residual(X)))) >= st.newton_tol:
        return None
    info = system._qualify(X[0])
    if not info["interior"]:
        return None
    return _solution_from_row(system, info)


def solve_problem(problem: TreeProblem, step_scale: int = 1
                  ) -> list[GradientTreeSolution]:
    """Grid-seeded batched Newton over one (tree, inputs, output) problem."""
    system = _ShootingSystem(problem, step_scale=step_scale)
    if not system.is_square():
        raise MorseSolverError("shooting system is not square")
    return [
        _solution_from_row(system, info)
        for info in system.solve()
        if info["interior"]
    ]


def count_trees(model: MorseModel, inputs: Sequence[str],
                settings: Optional[SolverSettings] = None,
                step_scale: int = 1) -> dict[str, int]:
    """Signed rigid tree count: sum over tree shapes and solutions, keyed by
    the output critical point."""
    settings = settings or SolverSettings()
    inputs = tuple(inputs)
    k = len(inputs)
    if k < 1:
        raise MorseSolverError("need at least one input")
    total_in = sum(model.degree(x) for x in inputs)
    out: dict[str, int] = {}

    for crit in model.criticals:
        deg0 = model.dim - crit.index
        # rigid tuples satisfy deg0 = sum(deg) + 2 - k on the top stratum
        if deg0 != total_in + 2 - k:
            continue
        signed = 0
        if k == 1:
            if inputs[0] == crit.name:
                continue
            problem = TreeProblem(model, None, inputs, crit.name,
                                  settings=settings)
            for sol in solve_problem(problem, step_scale):
                signed += sol.sign
        else:
            shapes = [t for t in enumerate_trees(k + 1) if t.is_trivalent()]
            for t_idx, tree in enumerate(shapes):
                problem = TreeProblem(model, tree, inputs, crit.name,
                                      tree_index=t_idx, settings=settings)
                if problem.expected_dim() != 0:
                    continue
                for sol in solve_problem(problem, step_scale):
                    signed += sol.sign
        if signed:
            out[crit.name] = signed
    return out


def build_morse_table(model: MorseModel, max_k: int,
                      settings: Optional[SolverSettings] = None,
                      verify_bound: Optional[int] = None) -> OperationTable:
    """Operation table of the zero class from rigid tree counts, k <= max_k.

    On a rigidity failure the perturbation amplitude is doubled, up to a cap.
    When verify_bound is set the relations restricted to the zero class are
    checked up to it and a failure raises.
    """
    from .algebra import verify as _verify

    if max_k < 1:
        raise MorseSolverError("max_k must be at least 1")
    settings = settings or SolverSettings()
    names = [g.name for g in model.generators()]
    entries = {}
    import itertools as _it

    for k in range(1, max_k + 1):
        for inputs in _it.product(names, repeat=k):
            attempt = settings
            for doubling in range(5):
                try:
                    combo = count_trees(model, inputs, attempt)
                    break
                except PerturbationInsufficientError:
                    if doubling == 4:
                        raise
                    attempt = attempt.scaled(2)
            if combo:
                entries[(k, ZERO_CLASS, tuple(inputs))] = combo

    table = OperationTable(
        model.generators(),
        MonoidTable([], EnergyCutoff(Fraction(0))),
        entries,
        max_arity=max_k,
    )
    if verify_bound is not None:
        reports = _verify(table, verify_bound,
                          beta_filter=lambda b: b.is_zero())
        bad = [r for r in reports if r.status == "defect"]
        if bad:
            raise MorseSolverError(
                f"computed table fails {len(bad)} relation(s); first at "
                f"k={bad[0].k}"
            )
    return table
