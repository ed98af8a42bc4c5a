"""Alternating constrained least squares for binary-outcome models.

Per sweep, all item like-effects are updated with user states fixed, then all
user states with items fixed. Each subproblem is solved inexactly by a few
projected-gradient steps with backtracking, so per-unit subobjectives never
increase. Target values are star ratings rescaled to [0, 1]; unknown entries
can be zero-filled for the leading sweeps (all sweeps when optimizing for
ranking) to counter the selection bias of observed ratings.

Zero-filled sweeps never materialize the dense user-item target matrix: the
all-pairs quadratic term is carried by a K x K Gram matrix of the frozen side
(K = D for vector models, D^2 for matrix models), built once per half-sweep.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from . import linalg
from .exceptions import InvalidInput, NumericalFailure, ParseError
from .models import NnmModel, QuantumModel, score_entries

__all__ = [
    "TrainConfig",
    "TrainHistory",
    "Targets",
    "init_quantum_users",
    "effective_targets",
    "objective",
    "user_objective",
    "user_gradient",
    "item_objective",
    "item_gradient",
    "update_users",
    "update_items",
    "constraint_residual",
    "train_quantum",
    "train_nnm",
]

MODES = ("mae", "recall")
FIELDS = ("real", "complex")
KINDS = ("quantum", "nnm")


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters.

    zero_fill_sweeps = None resolves to 2 in mae mode and to max_iter in
    recall mode. step_init scales the per-unit step estimate 1/L where L is
    the subproblem's curvature bound; backtracking multiplies the step by
    step_shrink until the subobjective does not increase, at most
    max_backtracks times (a unit that still fails keeps its current point).
    """

    D: int = 2
    max_iter: int = 16
    mode: str = "mae"
    zero_fill_sweeps: int | None = None
    step_init: float = 1.0
    step_shrink: float = 0.5
    max_backtracks: int = 30
    inner_iters: int = 5
    seed: int = 0
    field: str = "complex"
    z_star: int = 5
    kind: str = "quantum"

    def __post_init__(self):
        if self.D < 1:
            raise InvalidInput("TrainConfig: D must be at least 1")
        if self.max_iter < 0:
            raise InvalidInput("TrainConfig: max_iter must be nonnegative")
        if self.mode not in MODES:
            raise InvalidInput(f"TrainConfig: mode must be one of {MODES}")
        if self.zero_fill_sweeps is not None and not 0 <= self.zero_fill_sweeps <= self.max_iter:
            raise InvalidInput("TrainConfig: zero_fill_sweeps must lie in [0, max_iter]")
        if not (self.step_init > 0 and 0 < self.step_shrink < 1):
            raise InvalidInput("TrainConfig: step parameters must be positive (shrink in (0, 1))")
        if self.max_backtracks < 0 or self.inner_iters < 1:
            raise InvalidInput("TrainConfig: iteration counts must be positive")
        if self.field not in FIELDS:
            raise InvalidInput(f"TrainConfig: field must be one of {FIELDS}")
        if self.z_star < 2:
            raise InvalidInput("TrainConfig: z_star must be at least 2")
        if self.kind not in KINDS:
            raise InvalidInput(f"TrainConfig: kind must be one of {KINDS}")

    def resolved_zero_fill(self):
        if self.zero_fill_sweeps is not None:
            return self.zero_fill_sweeps
        if self.mode == "recall":
            return self.max_iter
        return min(2, self.max_iter)

    @classmethod
    def from_file(cls, path):
        """Load `key=value` lines; `#` starts a comment, blank lines skipped."""
        converters = {
            "D": int,
            "max_iter": int,
            "zero_fill_sweeps": int,
            "step_init": float,
            "step_shrink": float,
            "max_backtracks": int,
            "inner_iters": int,
            "seed": int,
            "z_star": int,
            "mode": lambda s: s.lower(),
            "field": lambda s: s.lower(),
            "kind": lambda s: s.lower(),
        }
        canonical = {name.lower(): name for name in converters}
        values = {}
        with open(path, "r", encoding="ascii") as fh:
            for ln, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                key, sep, val = (part.strip() for part in line.partition("="))
                if not sep or not key:
                    raise ParseError(f"{path} line {ln}: expected key=value")
                name = canonical.get(key.lower())
                if name is None:
                    raise ParseError(f"{path} line {ln}: unknown key {key!r}")
                try:
                    values[name] = converters[name](val)
                except ValueError:
                    raise ParseError(f"{path} line {ln}: bad value {val!r} for {key}") from None
        try:
            return cls(**values)
        except InvalidInput as exc:
            raise ParseError(f"{path}: {exc}") from None


@dataclass
class TrainHistory:
    """Per-sweep objective (on that sweep's targets), wall time, worst
    constraint residual, and which target phase the sweep used."""

    objective: list = field(default_factory=list)
    wall_time: list = field(default_factory=list)
    max_residual: list = field(default_factory=list)
    phase: list = field(default_factory=list)

    def append(self, obj, wall, residual, phase):
        self.objective.append(float(obj))
        self.wall_time.append(float(wall))
        self.max_residual.append(float(residual))
        self.phase.append(phase)

    def __len__(self):
        return len(self.objective)


@dataclass(eq=False)
class Targets:
    """Sparse target map. With zero_fill the map is conceptually defined on
    all (u, i) pairs, the listed entries carrying their values and every
    other pair carrying 0; otherwise only the listed entries exist."""

    uu: np.ndarray
    ii: np.ndarray
    values: np.ndarray
    zero_fill: bool
    U: int
    I: int

    def __post_init__(self):
        self.uu = np.asarray(self.uu, dtype=np.int64)
        self.ii = np.asarray(self.ii, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=float)
        if not (self.uu.shape == self.ii.shape == self.values.shape) or self.uu.ndim != 1:
            raise InvalidInput("Targets: entry arrays must be parallel 1-d arrays")

    @cached_property
    def user_order(self):
        return np.argsort(self.uu, kind="stable")

    @cached_property
    def user_indptr(self):
        return np.concatenate([[0], np.cumsum(np.bincount(self.uu, minlength=self.U))])

    @cached_property
    def item_order(self):
        return np.argsort(self.ii, kind="stable")

    @cached_property
    def item_indptr(self):
        return np.concatenate([[0], np.cumsum(np.bincount(self.ii, minlength=self.I))])

    @cached_property
    def _lookup(self):
        return {(int(u), int(i)): float(v) for u, i, v in zip(self.uu, self.ii, self.values)}

    def value(self, u, i):
        """Target for one pair; 0 for unlisted pairs when zero-filled."""
        got = self._lookup.get((u, i))
        if got is None:
            if self.zero_fill:
                return 0.0
            raise InvalidInput(f"Targets: pair ({u}, {i}) is not an observed entry")
        return got


def effective_targets(ds, zero_fill):
    """Targets R_ui / z_star on the observed entries, optionally zero-filled."""
    return Targets(
        uu=ds.uu,
        ii=ds.ii,
        values=ds.rr.astype(float) / ds.z_star,
        zero_fill=bool(zero_fill),
        U=ds.U,
        I=ds.I,
    )


def init_quantum_users(n_users, d, seed, field="complex"):
    """Rank-1 user states v v^dagger with v uniform on the unit sphere.

    Gaussian components normalized; complex by default. Reproducible from
    seed.
    """
    if n_users < 1 or d < 1:
        raise InvalidInput("init_quantum_users: need positive sizes")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((n_users, d))
    if field == "complex":
        v = v + 1j * rng.standard_normal((n_users, d))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return np.einsum("ua,ub->uab", v, np.conj(v))


def _binary_flats(m):
    """(users_flat, like_flat) for a binary-outcome model of either kind."""
    if isinstance(m, QuantumModel):
        return m.users.reshape(m.U, -1), m.items[:, 0].reshape(m.I, -1)
    if isinstance(m, NnmModel):
        return m.users, m.items[:, 0]
    raise InvalidInput(f"unsupported model type {type(m).__name__}")


def _require_binary(m):
    if m.Z != 2:
        raise InvalidInput("training operates on binary-outcome models (Z = 2)")


def objective(m, targets):
    """Sum over target pairs of (P[like] - target)^2, on unclamped scores."""
    uf, ef = _binary_flats(m)
    preds = score_entries(m, targets.uu, targets.ii)
    r = preds - targets.values
    if not targets.zero_fill:
        return float(np.dot(r, r))
    gram = uf.T @ np.conj(uf)
    quad = float(np.real(np.sum(np.conj(ef) * (ef @ np.conj(gram)))))
    cross = float(np.dot(targets.values, preds))
    const = float(np.dot(targets.values, targets.values))
    return quad - 2.0 * cross + const


def _unit_entries(targets, idx, side):
    if side == "user":
        order, indptr = targets.user_order, targets.user_indptr
        other = targets.ii
    else:
        order, indptr = targets.item_order, targets.item_indptr
        other = targets.uu
    sel = order[indptr[idx] : indptr[idx + 1]]
    return other[sel], targets.values[sel]


def _unit_objective(m, targets, idx, side):
    uf, ef = _binary_flats(m)
    own, fix = (uf, ef) if side == "user" else (ef, uf)
    other_idx, vals = _unit_entries(targets, idx, side)
    x = own[idx]
    if targets.zero_fill:
        preds = np.real(np.conj(fix) @ x)
        dense = np.zeros(fix.shape[0])
        dense[other_idx] = vals
        r = preds - dense
        return float(np.dot(r, r))
    preds = np.real(np.conj(fix[other_idx]) @ x)
    r = preds - vals
    return float(np.dot(r, r))


def _unit_gradient(m, targets, idx, side):
    uf, ef = _binary_flats(m)
    own, fix = (uf, ef) if side == "user" else (ef, uf)
    other_idx, vals = _unit_entries(targets, idx, side)
    x = own[idx]
    if targets.zero_fill:
        r = np.real(np.conj(fix) @ x)
        r[other_idx] -= vals
        g = 2.0 * (fix.T @ r)
    else:
        r = np.real(np.conj(fix[other_idx]) @ x) - vals
        g = 2.0 * (fix[other_idx].T @ r)
    if isinstance(m, QuantumModel):
        return linalg.hermitianize(g.reshape(m.D, m.D))
    return g


def user_objective(m, targets, u):
    """Subobjective of user u with items fixed."""
    return _unit_objective(m, targets, u, "user")


def user_gradient(m, targets, u):
    """Gradient 2 sum_i (P_like(u, i) - t_ui) E_i1 of user u's subobjective."""
    return _unit_gradient(m, targets, u, "user")


def item_objective(m, targets, i):
    """Subobjective of item i with users fixed."""
    return _unit_objective(m, targets, i, "item")


def item_gradient(m, targets, i):
    """Gradient 2 sum_u (P_like(u, i) - t_ui) rho_u of item i's subobjective."""
    return _unit_gradient(m, targets, i, "item")


def _concat_ranges(starts, stops):
    """Positions covered by [starts[k], stops[k]) plus the owning k per position."""
    counts = stops - starts
    total = int(counts.sum())
    owner = np.repeat(np.arange(len(starts)), counts)
    if total == 0:
        return np.empty(0, dtype=np.int64), owner
    offs = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    return np.repeat(starts, counts) + offs, owner


def _pair_scores(fix_flat, var_rows, fix_idx, row_of, chunk=1 << 18):
    """Re(conj(fix[fix_idx[k]]) . var_rows[row_of[k]]) per entry k, chunked."""
    out = np.empty(len(fix_idx))
    for s in range(0, len(fix_idx), chunk):
        sl = slice(s, s + chunk)
        out[sl] = np.einsum(
            "nk,nk->n", np.conj(fix_flat[fix_idx[sl]]), var_rows[row_of[sl]]
        ).real
    return out


def _update_side(var_flat, fix_flat, targets, cfg, side, project_rows):
    """One batch of projected-gradient inner iterations for every unit on one
    side, the other side frozen. Per-unit subobjectives never increase."""
    n_var = var_flat.shape[0]
    if side == "user":
        order, indptr = targets.user_order, targets.user_indptr
        fix_of_entry = targets.ii[order]
    else:
        order, indptr = targets.item_order, targets.item_indptr
        fix_of_entry = targets.uu[order]
    t_sorted = targets.values[order]
    var_of_entry = np.repeat(np.arange(n_var), np.diff(indptr))

    if targets.zero_fill:
        # gram[a, b] = sum_f conj(f_a) f_b, so (sum_f <f, x> f) per row is x @ gram.
        gram = np.conj(fix_flat).T @ fix_flat
        lam = float(np.linalg.eigvalsh(gram)[-1].real) if gram.size else 0.0
        lips = np.full(n_var, max(2.0 * lam, 1e-12))
        coef = sp.csr_matrix(
            (t_sorted.astype(fix_flat.dtype), fix_of_entry, indptr),
            shape=(n_var, fix_flat.shape[0]),
        )
        cvec = coef @ fix_flat
        const = np.bincount(var_of_entry, weights=t_sorted**2, minlength=n_var)

        def f_rows(rows_flat, rows):
            quad = np.real(np.sum(np.conj(rows_flat) * (rows_flat @ gram), axis=1))
            cross = np.real(np.sum(np.conj(cvec[rows]) * rows_flat, axis=1))
            return quad - 2.0 * cross + const[rows]

        def grad_all(v):
            return 2.0 * (v @ gram - cvec)

    else:
        sqn = np.real(np.sum(np.conj(fix_flat) * fix_flat, axis=1))
        lips = np.maximum(
            2.0 * np.bincount(var_of_entry, weights=sqn[fix_of_entry], minlength=n_var),
            1e-12,
        )

        def f_rows(rows_flat, rows):
            pos, owner = _concat_ranges(indptr[rows], indptr[rows + 1])
            r = _pair_scores(fix_flat, rows_flat, fix_of_entry[pos], owner) - t_sorted[pos]
            return np.bincount(owner, weights=r**2, minlength=len(rows))

        def grad_all(v):
            r = _pair_scores(fix_flat, v, fix_of_entry, var_of_entry) - t_sorted
            resid = sp.csr_matrix(
                (r.astype(fix_flat.dtype), fix_of_entry, indptr),
                shape=(n_var, fix_flat.shape[0]),
            )
            return 2.0 * (resid @ fix_flat)

    all_rows = np.arange(n_var)
    v = var_flat
    for _ in range(cfg.inner_iters):
        f0 = f_rows(v, all_rows)
        if not np.all(np.isfinite(f0)):
            raise NumericalFailure(f"{side} update: non-finite subobjective")
        g = grad_all(v)
        step = cfg.step_init / lips
        v_next = v.copy()
        remaining = all_rows
        for _ in range(cfg.max_backtracks + 1):
            if remaining.size == 0:
                break
            cand = project_rows(v[remaining] - step[remaining, None] * g[remaining])
            fc = f_rows(cand, remaining)
            ok = fc <= f0[remaining]
            v_next[remaining[ok]] = cand[ok]
            remaining = remaining[~ok]
            step = step * cfg.step_shrink
        v = v_next
    return v


def _project_density_rows(d):
    def proj(rows):
        return linalg.project_to_spectrahedron(rows.reshape(-1, d, d)).reshape(rows.shape)

    return proj


def _project_effect_rows(d):
    # Reduced form of the binary POVM projection: the dislike effect I - E
    # is maintained implicitly, so projecting the pair amounts to clamping
    # the like-effect's eigenvalues into [0, 1].
    def proj(rows):
        return linalg.project_to_effect(rows.reshape(-1, d, d)).reshape(rows.shape)

    return proj


def _rebuild_users(m, users_flat):
    if isinstance(m, QuantumModel):
        users = linalg.hermitianize(users_flat.reshape(m.U, m.D, m.D))
        return QuantumModel(users, m.items)
    return NnmModel(users_flat, m.items)


def _rebuild_items(m, like_flat):
    if isinstance(m, QuantumModel):
        e1 = linalg.hermitianize(like_flat.reshape(m.I, m.D, m.D))
        items = np.stack([e1, np.eye(m.D) - e1], axis=1)
        return QuantumModel(m.users, items)
    items = np.stack([like_flat, 1.0 - like_flat], axis=1)
    return NnmModel(m.users, items)


def update_users(m, targets, cfg):
    """Projected-gradient update of every user state, items fixed."""
    _require_binary(m)
    uf, ef = _binary_flats(m)
    if isinstance(m, QuantumModel):
        proj = _project_density_rows(m.D)
    else:
        proj = linalg.project_to_simplex_rows
    new_uf = _update_side(uf, ef, targets, cfg, "user", proj)
    return _rebuild_users(m, new_uf)


def update_items(m, targets, cfg):
    """Projected-gradient update of every item like-effect, users fixed.

    Only the like-effect enters the objective; the complementary effect is
    rebuilt as identity minus the like-effect.
    """
    _require_binary(m)
    uf, ef = _binary_flats(m)
    if isinstance(m, QuantumModel):
        proj = _project_effect_rows(m.D)
    else:
        proj = lambda rows: np.clip(rows, 0.0, 1.0)
    new_ef = _update_side(ef, uf, targets, cfg, "item", proj)
    return _rebuild_items(m, new_ef)


def constraint_residual(m):
    """Worst feasibility violation over all user and item constraints."""
    if isinstance(m, QuantumModel):
        res = float(np.max(np.abs(np.einsum("ukk->u", m.users).real - 1.0), initial=0.0))
        if m.users.size:
            res = max(res, -float(np.min(np.linalg.eigvalsh(m.users))))
        if m.items.size:
            res = max(res, -float(np.min(np.linalg.eigvalsh(m.items))))
        eye = np.eye(m.D)
        res = max(res, float(np.max(np.abs(m.items.sum(axis=1) - eye), initial=0.0)))
        return max(res, 0.0)
    res = float(np.max(np.abs(m.users.sum(axis=1) - 1.0), initial=0.0))
    res = max(res, -float(np.min(m.users, initial=0.0)), -float(np.min(m.items, initial=0.0)))
    res = max(res, float(np.max(np.abs(m.items.sum(axis=1) - 1.0), initial=0.0)))
    return max(res, 0.0)


def _init_model(ds, cfg):
    if cfg.kind == "quantum":
        users = init_quantum_users(ds.U, cfg.D, cfg.seed, field=cfg.field)
        eye = np.eye(cfg.D, dtype=users.dtype)
        items = np.tile(eye / 2.0, (ds.I, 2, 1, 1))
        return QuantumModel(users, items)
    rho = init_quantum_users(ds.U, cfg.D, cfg.seed, field="complex")
    users = np.einsum("uaa->ua", rho).real.copy()
    users /= users.sum(axis=1, keepdims=True)
    items = np.full((ds.I, 2, cfg.D), 0.5)
    return NnmModel(users, items)


def _train(ds, cfg):
    model = _init_model(ds, cfg)
    history = TrainHistory()
    zf = cfg.resolved_zero_fill()
    zero_targets = effective_targets(ds, True)
    gamma_targets = effective_targets(ds, False)
    for sweep in range(cfg.max_iter):
        in_zero = sweep < zf
        targets = zero_targets if in_zero else gamma_targets
        tic = time.perf_counter()
        model = update_items(model, targets, cfg)
        model = update_users(model, targets, cfg)
        wall = time.perf_counter() - tic
        obj = objective(model, targets)
        if not np.isfinite(obj):
            raise NumericalFailure(f"sweep {sweep + 1}: non-finite objective")
        history.append(obj, wall, constraint_residual(model), "zero_fill" if in_zero else "observed")
    return model, history


def train_quantum(ds, cfg):
    """Full alternating run for a quantum model: init, then max_iter sweeps of
    (items, users) updates with the configured zero-fill schedule."""
    if cfg.kind != "quantum":
        cfg = replace(cfg, kind="quantum")
    return _train(ds, cfg)


def train_nnm(ds, cfg):
    """Alternating run for the vector model; simplex and box projections
    replace the spectral ones."""
    if cfg.kind != "nnm":
        cfg = replace(cfg, kind="nnm")
    return _train(ds, cfg)
