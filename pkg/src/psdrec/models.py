"""Model containers and model-level operations.

Two interchangeable model families over a rating alphabet of Z outcomes:

* NnmModel: each user is a probability vector on the unit simplex, each item
  a tuple of Z nonnegative vectors summing to the all-ones vector; the
  probability of outcome z is a dot product.
* QuantumModel: each user is a density matrix (psd, unit trace), each item a
  POVM (psd effects summing to the identity); the probability of outcome z is
  a trace inner product.

Also here: the exact diagonal embedding of an NNM into a quantum model, the
dense perfect-fit construction, recovery of an NNM from a commuting quantum
model by simultaneous diagonalization, numerical rank profiles, and a
line-oriented text persistence format.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .exceptions import (
    InvalidInput,
    NotSimultaneouslyDiagonalizable,
    ParseError,
    RecoveryFailed,
)

__all__ = [
    "NnmModel",
    "QuantumModel",
    "RankProfile",
    "nnm_predict",
    "quantum_predict",
    "predict",
    "score_items",
    "score_entries",
    "embed_nnm",
    "overfit_model",
    "recover_nnm",
    "predicted_star",
    "rank_profile",
    "save_model",
    "load_model",
]


@dataclass(frozen=True, eq=False)
class NnmModel:
    """users: (U, D) rows on the simplex; items: (I, Z, D) with the Z vectors
    of every item summing to the all-ones vector entrywise."""

    users: np.ndarray
    items: np.ndarray

    def __post_init__(self):
        users = np.asarray(self.users, dtype=float)
        items = np.asarray(self.items, dtype=float)
        if users.ndim != 2 or items.ndim != 3 or items.shape[2] != users.shape[1]:
            raise InvalidInput(
                f"NnmModel: expected users (U, D) and items (I, Z, D), got {users.shape} and {items.shape}"
            )
        if items.shape[1] < 2:
            raise InvalidInput("NnmModel: need Z >= 2 outcomes")
        object.__setattr__(self, "users", users)
        object.__setattr__(self, "items", items)

    @property
    def U(self):
        return self.users.shape[0]

    @property
    def I(self):
        return self.items.shape[0]

    @property
    def D(self):
        return self.users.shape[1]

    @property
    def Z(self):
        return self.items.shape[1]

    def validate(self):
        """Check the simplex and sum-to-one invariants; raises InvalidInput."""
        if float(np.max(np.abs(self.users.sum(axis=1) - 1.0), initial=0.0)) > 1e-10:
            raise InvalidInput("NnmModel: a user vector does not sum to 1")
        if float(np.min(self.users, initial=0.0)) < -1e-10:
            raise InvalidInput("NnmModel: a user vector has a negative entry")
        if float(np.min(self.items, initial=0.0)) < -1e-10:
            raise InvalidInput("NnmModel: an item vector has a negative entry")
        if float(np.max(np.abs(self.items.sum(axis=1) - 1.0), initial=0.0)) > 1e-8:
            raise InvalidInput("NnmModel: item outcome vectors do not sum to the all-ones vector")


@dataclass(frozen=True, eq=False)
class QuantumModel:
    """users: (U, D, D) density matrices; items: (I, Z, D, D) POVMs."""

    users: np.ndarray
    items: np.ndarray

    def __post_init__(self):
        users = np.asarray(self.users)
        items = np.asarray(self.items)
        if (
            users.ndim != 3
            or items.ndim != 4
            or users.shape[1] != users.shape[2]
            or items.shape[2:] != users.shape[1:]
        ):
            raise InvalidInput(
                f"QuantumModel: expected users (U, D, D) and items (I, Z, D, D), got {users.shape} and {items.shape}"
            )
        if items.shape[1] < 2:
            raise InvalidInput("QuantumModel: need Z >= 2 outcomes")
        object.__setattr__(self, "users", users)
        object.__setattr__(self, "items", items)

    @property
    def U(self):
        return self.users.shape[0]

    @property
    def I(self):
        return self.items.shape[0]

    @property
    def D(self):
        return self.users.shape[1]

    @property
    def Z(self):
        return self.items.shape[1]

    def validate(self):
        """Check the density-matrix and POVM invariants; raises InvalidInput."""
        for name, stack in (("user", self.users), ("item", self.items)):
            dev = float(np.max(np.abs(stack - np.conj(np.swapaxes(stack, -1, -2))), initial=0.0))
            if dev > 1e-10:
                raise InvalidInput(f"QuantumModel: a {name} matrix is not Hermitian (deviation {dev:.3e})")
        traces = np.einsum("ukk->u", self.users).real
        if float(np.max(np.abs(traces - 1.0), initial=0.0)) > 1e-8:
            raise InvalidInput("QuantumModel: a user state does not have unit trace")
        if self.users.size and float(np.min(np.linalg.eigvalsh(self.users))) < -1e-8:
            raise InvalidInput("QuantumModel: a user state is not psd")
        if self.items.size and float(np.min(np.linalg.eigvalsh(self.items))) < -1e-8:
            raise InvalidInput("QuantumModel: an item effect is not psd")
        eye = np.eye(self.D)
        if float(np.max(np.abs(self.items.sum(axis=1) - eye), initial=0.0)) > 1e-8:
            raise InvalidInput("QuantumModel: item effects do not sum to the identity")


def _check_indices(m, u, i, z):
    if not (isinstance(u, (int, np.integer)) and 0 <= u < m.U):
        raise InvalidInput(f"user index {u} out of range [0, {m.U})")
    if not (isinstance(i, (int, np.integer)) and 0 <= i < m.I):
        raise InvalidInput(f"item index {i} out of range [0, {m.I})")
    if not (isinstance(z, (int, np.integer)) and 1 <= z <= m.Z):
        raise InvalidInput(f"outcome {z} out of range [1, {m.Z}]")


def nnm_predict(m, u, i, z):
    """P[user u rates item i as z] = E_iz . p_u, clamped to [0, 1].

    Outcomes z are 1-based rating values.
    """
    _check_indices(m, u, i, z)
    return float(np.clip(np.dot(m.items[i, z - 1], m.users[u]), 0.0, 1.0))


def quantum_predict(m, u, i, z):
    """P[user u rates item i as z] = tr(rho_u E_iz), clamped to [0, 1]."""
    _check_indices(m, u, i, z)
    return float(np.clip(linalg.trace_inner(m.users[u], m.items[i, z - 1]), 0.0, 1.0))


def predict(m, u, i, z):
    """Dispatch to nnm_predict or quantum_predict by model type."""
    if isinstance(m, QuantumModel):
        return quantum_predict(m, u, i, z)
    if isinstance(m, NnmModel):
        return nnm_predict(m, u, i, z)
    raise InvalidInput(f"predict: unsupported model type {type(m).__name__}")


def _flat_users(m):
    return m.users.reshape(m.U, -1)


def _flat_like_effects(m):
    return m.items[:, 0].reshape(m.I, -1)


def score_items(m, u):
    """Raw like scores (outcome 1, unclamped) of user u against every item."""
    if not (isinstance(u, (int, np.integer)) and 0 <= u < m.U):
        raise InvalidInput(f"user index {u} out of range [0, {m.U})")
    uf = np.conj(_flat_users(m)[u])
    return np.real(_flat_like_effects(m) @ uf)


def score_entries(m, uu, ii, chunk=1 << 18):
    """Raw like scores for paired index arrays (uu[k], ii[k])."""
    uu = np.asarray(uu)
    ii = np.asarray(ii)
    if uu.shape != ii.shape or uu.ndim != 1:
        raise InvalidInput(f"score_entries: index shapes differ: {uu.shape} vs {ii.shape}")
    if uu.size and (uu.min() < 0 or uu.max() >= m.U):
        raise InvalidInput(f"score_entries: user index out of range [0, {m.U})")
    if ii.size and (ii.min() < 0 or ii.max() >= m.I):
        raise InvalidInput(f"score_entries: item index out of range [0, {m.I})")
    uf = _flat_users(m)
    ef = _flat_like_effects(m)
    out = np.empty(uu.shape[0])
    for s in range(0, uu.shape[0], chunk):
        sl = slice(s, s + chunk)
        out[sl] = np.einsum("nk,nk->n", np.conj(uf[uu[sl]]), ef[ii[sl]]).real
    return out


def embed_nnm(m):
    """Embed an NNM as a diagonal quantum model with identical predictions."""
    if not isinstance(m, NnmModel):
        raise InvalidInput("embed_nnm: expected an NnmModel")
    d = m.D
    rng = np.arange(d)
    users = np.zeros((m.U, d, d))
    users[:, rng, rng] = m.users
    items = np.zeros((m.I, m.Z, d, d))
    items[:, :, rng, rng] = m.items
    return QuantumModel(users, items)


def overfit_model(ds):
    """Perfect-fit quantum model of dimension D = U built from basis projectors.

    Every user is the projector onto their own coordinate; the effect for
    outcome z of item i collects the coordinates of users who rated i as z,
    with users who did not rate i absorbed into the z = 1 effect. Fits every
    known rating with probability exactly 1, and for z >= 2 the rank of E_iz
    is at most the number of users who rated item i.
    """
    if len(ds) == 0:
        raise InvalidInput("overfit_model: empty dataset")
    u_n, i_n, z_n = ds.U, ds.I, ds.z_star
    rng = np.arange(u_n)
    users = np.zeros((u_n, u_n, u_n))
    users[rng, rng, rng] = 1.0
    items = np.zeros((i_n, z_n, u_n, u_n))
    items[:, 0, rng, rng] = 1.0
    items[ds.ii, 0, ds.uu, ds.uu] = 0.0
    items[ds.ii, ds.rr - 1, ds.uu, ds.uu] = 1.0
    return QuantumModel(users, items)


def _pairwise_commutator_norm(mats):
    prod = np.einsum("kab,lbc->klac", mats, mats, optimize=True)
    comm = prod - np.transpose(prod, (1, 0, 2, 3))
    return float(np.sqrt(np.max(np.sum(np.abs(comm) ** 2, axis=(2, 3)))))


def recover_nnm(m, tol=1e-6, *, seed=0):
    """Recover an NNM from a quantum model whose matrices all commute.

    Finds one unitary that diagonalizes every user state and item effect by
    eigendecomposing a random strictly-positive linear combination of all
    model matrices (near-degenerate eigenvalue blocks are refined with a
    second combination), then reads the NNM off the rotated diagonals. The
    recovered model reproduces all predictions within tol, up to a global
    coordinate permutation.

    Raises NotSimultaneouslyDiagonalizable if some pair of model matrices has
    commutator Frobenius norm above tol, and RecoveryFailed if the rotated
    matrices are not diagonal within tol.
    """
    if not isinstance(m, QuantumModel):
        raise InvalidInput("recover_nnm: expected a QuantumModel")
    d = m.D
    mats = np.concatenate([m.users, m.items.reshape(m.I * m.Z, d, d)])
    comm = _pairwise_commutator_norm(mats)
    if comm > tol:
        raise NotSimultaneouslyDiagonalizable(
            f"recover_nnm: max pairwise commutator norm {comm:.3e} exceeds tol {tol:.3e}"
        )

    rng = np.random.default_rng(seed)
    k = mats.shape[0]
    combo = linalg.hermitianize(np.tensordot(rng.uniform(0.5, 1.5, k), mats, axes=1))
    w, basis = np.linalg.eigh(combo)

    # Refine near-degenerate eigenvalue blocks with a second combination so
    # the basis also diagonalizes matrices that the first combination cannot
    # separate.
    gap_tol = 1e-7 * max(1.0, float(np.max(np.abs(w))))
    boundaries = np.nonzero(np.diff(w) > gap_tol)[0] + 1
    groups = np.split(np.arange(d), boundaries)
    if any(len(g) > 1 for g in groups):
        combo2 = linalg.hermitianize(np.tensordot(rng.uniform(0.5, 1.5, k), mats, axes=1))
        for g in groups:
            if len(g) < 2:
                continue
            sub = basis[:, g]
            block = linalg.hermitianize(np.conj(sub.T) @ combo2 @ sub)
            _, q = np.linalg.eigh(block)
            basis[:, g] = sub @ q

    rotated = np.einsum("ji,kjl,lm->kim", np.conj(basis), mats, basis, optimize=True)
    diags = np.einsum("kii->ki", rotated).real.copy()
    off = rotated.copy()
    idx = np.arange(d)
    off[:, idx, idx] = 0.0
    residual = float(np.sqrt(np.max(np.sum(np.abs(off) ** 2, axis=(1, 2)))))
    if residual > tol:
        raise RecoveryFailed(
            f"recover_nnm: off-diagonal residual {residual:.3e} exceeds tol {tol:.3e}",
            residual=residual,
        )

    users = linalg.project_to_simplex_rows(diags[: m.U])
    raw_items = diags[m.U :].reshape(m.I, m.Z, d)
    # Exact projection onto the item constraint set: per coordinate, the Z
    # outcome weights form a point on the unit simplex.
    cols = raw_items.transpose(0, 2, 1).reshape(m.I * d, m.Z)
    items = linalg.project_to_simplex_rows(cols).reshape(m.I, d, m.Z).transpose(0, 2, 1)
    return NnmModel(users, items)


def predicted_star(m, u, i, z_star):
    """Star-scale prediction clamp(z_star * P[like], 1, z_star).

    Expects a binary-outcome model where outcome 1 means "like"; z_star is
    the size of the star alphabet the ratings were drawn from.
    """
    p = predict(m, u, i, 1)
    return float(np.clip(z_star * p, 1.0, float(z_star)))


@dataclass(frozen=True)
class RankProfile:
    """Numerical ranks of item effects.

    effect_ranks[i, z] is the rank of effect z of item i (eigenvalues above
    tau_rank times the largest one). pivot_max[i, zp] is the maximum rank
    among the other effects when zp is designated the pivot outcome; the
    per-item diagnostic is the minimum of that row.
    """

    effect_ranks: np.ndarray
    pivot_max: np.ndarray
    tau_rank: float

    @property
    def item_rank(self):
        return self.pivot_max.min(axis=1)


def rank_profile(m, tau_rank=1e-8):
    """Numerical rank profile of a quantum model's item effects."""
    if not isinstance(m, QuantumModel):
        raise InvalidInput("rank_profile: expected a QuantumModel")
    ev = np.linalg.eigvalsh(m.items)
    lam_max = ev[..., -1]
    counts = np.count_nonzero(ev > tau_rank * lam_max[..., None], axis=-1)
    ranks = np.where(lam_max > 0.0, counts, 0)
    srt = np.sort(ranks, axis=1)
    top1 = srt[:, -1]
    top2 = srt[:, -2]
    n_top = np.count_nonzero(ranks == top1[:, None], axis=1)
    pivot_max = np.where(
        (ranks == top1[:, None]) & (n_top[:, None] == 1), top2[:, None], top1[:, None]
    )
    return RankProfile(effect_ranks=ranks, pivot_max=pivot_max, tau_rank=float(tau_rank))


# ---------------------------------------------------------------------------
# Persistence: line-oriented text format.
#
# Header:  PSDREC v1 | kind=quantum | D | U | I | Z | field=complex
# Records: "user <u> <entries>" and "item <i> <z> <entries>", one per line,
# entries row-major, z 1-based, reals with 17 significant digits, complex
# entries as "re,im".
# ---------------------------------------------------------------------------

FORMAT_MAGIC = "PSDREC v1"


def _fmt_entries(vec, complex_field):
    if complex_field:
        return " ".join(f"{x.real:.17g},{x.imag:.17g}" for x in vec)
    return " ".join(f"{float(x):.17g}" for x in vec)


def save_model(m, path):
    """Write a model to a text file; see load_model for the format."""
    if isinstance(m, QuantumModel):
        kind = "quantum"
    elif isinstance(m, NnmModel):
        kind = "nnm"
    else:
        raise InvalidInput(f"save_model: unsupported model type {type(m).__name__}")
    complex_field = bool(np.iscomplexobj(m.users) or np.iscomplexobj(m.items))
    field = "complex" if complex_field else "real"
    lines = [f"{FORMAT_MAGIC} | kind={kind} | {m.D} | {m.U} | {m.I} | {m.Z} | field={field}"]
    for u in range(m.U):
        lines.append(f"user {u} " + _fmt_entries(m.users[u].ravel(), complex_field))
    for i in range(m.I):
        for z in range(m.Z):
            lines.append(f"item {i} {z + 1} " + _fmt_entries(m.items[i, z].ravel(), complex_field))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_value(token, complex_field, path, ln):
    try:
        if complex_field:
            re_s, im_s = token.split(",")
            return complex(float(re_s), float(im_s))
        return float(token)
    except ValueError:
        raise ParseError(f"{path} line {ln}: bad numeric token {token!r}") from None


def load_model(path):
    """Read a model written by save_model; validates all invariants."""
    with open(path, "r", encoding="ascii") as fh:
        raw = fh.read().splitlines()
    if not raw:
        raise ParseError(f"{path}: empty model file")
    head = [part.strip() for part in raw[0].split("|")]
    if len(head) != 7 or head[0] != FORMAT_MAGIC:
        raise ParseError(f"{path} line 1: bad header {raw[0]!r}")
    try:
        kind = head[1].split("=", 1)[1]
        d, u_n, i_n, z_n = (int(x) for x in head[2:6])
        field = head[6].split("=", 1)[1]
    except (IndexError, ValueError):
        raise ParseError(f"{path} line 1: bad header {raw[0]!r}") from None
    if kind not in ("quantum", "nnm") or field not in ("real", "complex"):
        raise ParseError(f"{path} line 1: bad header {raw[0]!r}")
    if min(d, u_n, i_n) < 1 or z_n < 2:
        raise ParseError(f"{path} line 1: bad sizes in header")

    complex_field = field == "complex"
    dtype = complex if complex_field else float
    per_record = d * d if kind == "quantum" else d
    users = np.full((u_n, per_record), np.nan, dtype=dtype)
    items = np.full((i_n, z_n, per_record), np.nan, dtype=dtype)
    for ln, line in enumerate(raw[1:], start=2):
        if not line.strip():
            continue
        tokens = line.split()
        role = tokens[0]
        if role == "user":
            if len(tokens) != 2 + per_record:
                raise ParseError(f"{path} line {ln}: expected {per_record} entries")
            u = int(tokens[1])
            if not 0 <= u < u_n:
                raise ParseError(f"{path} line {ln}: user index {u} out of range")
            users[u] = [_parse_value(t, complex_field, path, ln) for t in tokens[2:]]
        elif role == "item":
            if len(tokens) != 3 + per_record:
                raise ParseError(f"{path} line {ln}: expected {per_record} entries")
            i, z = int(tokens[1]), int(tokens[2])
            if not (0 <= i < i_n and 1 <= z <= z_n):
                raise ParseError(f"{path} line {ln}: item record ({i}, {z}) out of range")
            items[i, z - 1] = [_parse_value(t, complex_field, path, ln) for t in tokens[3:]]
        else:
            raise ParseError(f"{path} line {ln}: unknown record {role!r}")
    if np.any(np.isnan(users)) or np.any(np.isnan(items)):
        raise ParseError(f"{path}: missing user or item records")

    if kind == "quantum":
        model = QuantumModel(users.reshape(u_n, d, d), items.reshape(i_n, z_n, d, d))
    else:
        model = NnmModel(users.real, items.real)
    model.validate()
    return model
