"""Hermitian linear algebra kernel.

Eigendecomposition plus exact Euclidean projections onto the constraint sets
used by the models: the unit simplex, the spectrahedron (density matrices),
the operator interval 0 <= E <= I, and the POVM set.

All functions are pure. Matrices may be real symmetric or complex Hermitian;
the dtype of the input is preserved. Functions documented as batched accept
arbitrary leading axes over the last two matrix axes.
"""

from __future__ import annotations

import numpy as np

from .exceptions import ConvergenceFailure, InvalidInput

__all__ = [
    "hermitianize",
    "project_to_simplex",
    "project_to_simplex_rows",
    "eigh",
    "project_to_spectrahedron",
    "project_to_effect",
    "project_to_binary_povm",
    "project_to_povm",
    "trace_inner",
]

# Relative tolerance for accepting an input matrix as Hermitian.
HERMITIAN_ATOL = 1e-8


def hermitianize(a):
    """Return (A + A^dagger) / 2 along the last two axes.

    Applied after arithmetic updates to suppress Hermitian drift.
    """
    a = np.asarray(a)
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def _as_square(a, op):
    a = np.asarray(a)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2] or a.shape[-1] == 0:
        raise InvalidInput(f"{op}: expected square matrices, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInput(f"{op}: non-finite entries")
    return a


def _require_hermitian(a, op, tol=HERMITIAN_ATOL):
    dev = float(np.max(np.abs(a - np.conj(np.swapaxes(a, -1, -2)))))
    scale = max(1.0, float(np.max(np.abs(a))))
    if dev > tol * scale:
        raise InvalidInput(f"{op}: matrix is not Hermitian (deviation {dev:.3e})")
    return hermitianize(a)


def project_to_simplex(v):
    """Euclidean projection of a real vector onto the unit simplex.

    Sort-and-threshold algorithm; exact and idempotent.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise InvalidInput(f"project_to_simplex: expected a nonempty vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InvalidInput("project_to_simplex: non-finite entries")
    return project_to_simplex_rows(v[None, :])[0]


def project_to_simplex_rows(v):
    """Row-wise simplex projection of a 2-d (or higher) real array."""
    v = np.asarray(v, dtype=float)
    d = v.shape[-1]
    u = -np.sort(-v, axis=-1)
    css = np.cumsum(u, axis=-1) - 1.0
    k = np.arange(1, d + 1)
    # The active-set condition u_k - css_k / k > 0 holds on a prefix.
    rho = np.count_nonzero(u * k > css, axis=-1)
    theta = np.take_along_axis(css, rho[..., None] - 1, axis=-1) / rho[..., None]
    return np.maximum(v - theta, 0.0)


def eigh(a):
    """Eigendecomposition of a Hermitian matrix.

    Returns (w, v) with eigenvalues w sorted descending and orthonormal
    eigenvector columns v[:, k] matching w[k], so a = v @ diag(w) @ v^dagger.
    """
    a = _as_square(a, "eigh")
    if a.ndim != 2:
        raise InvalidInput(f"eigh: expected a single matrix, got shape {a.shape}")
    a = _require_hermitian(a, "eigh")
    w, v = np.linalg.eigh(a)
    return w[::-1].copy(), v[:, ::-1].copy()


def _recompose(w, v):
    """Rebuild sum_k w_k v_k v_k^dagger from a (batched) eigensystem."""
    return hermitianize(np.einsum("...k,...ak,...bk->...ab", w, v, np.conj(v), optimize=True))


def project_to_spectrahedron(a):
    """Frobenius-nearest density matrix: psd with unit trace. Batched.

    Eigendecompose, project the eigenvalue vector onto the simplex, recompose.
    This is the exact Euclidean projection; idempotent.
    """
    a = _as_square(a, "project_to_spectrahedron")
    a = _require_hermitian(a, "project_to_spectrahedron")
    w, v = np.linalg.eigh(a)
    shape = w.shape
    w = project_to_simplex_rows(w.reshape(-1, shape[-1])).reshape(shape)
    return _recompose(w, v)


def project_to_effect(a):
    """Frobenius-nearest effect, 0 <= E <= I, by clamping eigenvalues. Batched."""
    a = _as_square(a, "project_to_effect")
    a = _require_hermitian(a, "project_to_effect")
    w, v = np.linalg.eigh(a)
    return _recompose(np.clip(w, 0.0, 1.0), v)


def project_to_binary_povm(a1, a2):
    """Frobenius-nearest two-outcome POVM (E, I - E) to the pair (a1, a2).

    Minimizing ||E - a1||^2 + ||(I - E) - a2||^2 over 0 <= E <= I has the
    closed form E = clamp((a1 - a2 + I) / 2). Batched.
    """
    a1 = np.asarray(a1)
    a2 = np.asarray(a2)
    if a1.shape != a2.shape:
        raise InvalidInput(f"project_to_binary_povm: shape mismatch {a1.shape} vs {a2.shape}")
    _as_square(a1, "project_to_binary_povm")
    eye = np.eye(a1.shape[-1])
    e = project_to_effect(hermitianize((a1 - a2 + eye) / 2.0))
    return e, eye - e


def _psd_part(a):
    """Clamp eigenvalues at zero along the last two axes."""
    w, v = np.linalg.eigh(a)
    return _recompose(np.maximum(w, 0.0), v)


def project_to_povm(es, *, max_rounds=500, tol=1e-8):
    """Project a tuple of Hermitian matrices onto the POVM set by Dykstra.

    Alternates between the product of psd cones and the affine set of tuples
    summing to the identity, with Dykstra correction terms, so the iterates
    converge to the Euclidean-nearest POVM. A valid POVM is returned unchanged
    within tolerance. Deterministic.

    Raises ConvergenceFailure carrying the last residual if max_rounds is
    exhausted before the residual drops below tol.
    """
    try:
        e = np.stack([np.asarray(x) for x in es])
    except ValueError as exc:
        raise InvalidInput(f"project_to_povm: mismatched shapes: {exc}") from None
    if e.shape[0] < 2:
        raise InvalidInput("project_to_povm: need at least two outcomes")
    e = _as_square(e, "project_to_povm")
    if e.ndim != 3:
        raise InvalidInput(f"project_to_povm: expected a tuple of matrices, got shape {e.shape}")
    z, d = e.shape[0], e.shape[-1]
    e = hermitianize(e.astype(np.result_type(e.dtype, float)))

    eye = np.eye(d, dtype=e.dtype)
    x = e.copy()
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    residual = np.inf
    for _ in range(max_rounds):
        y = _psd_part(x + p)
        p = x + p - y
        t = y + q
        x = t - (np.sum(t, axis=0) - eye) / z
        q = t - x
        # x sums to the identity exactly; check psd violation and the gap
        # between the two sets' iterates.
        wmin = float(np.min(np.linalg.eigvalsh(x)))
        gap = float(np.max(np.abs(x - y)))
        residual = max(0.0, -wmin, gap)
        if residual <= tol:
            return tuple(hermitianize(x))
    raise ConvergenceFailure(
        f"project_to_povm: residual {residual:.3e} after {max_rounds} rounds",
        residual=residual,
    )


def trace_inner(a, b):
    """tr(A^dagger B) = sum over j, k of conj(A_jk) B_jk.

    Real for Hermitian pairs; any imaginary residue is discarded.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or a.shape != b.shape or a.shape[0] != a.shape[1]:
        raise InvalidInput(f"trace_inner: dimension mismatch {a.shape} vs {b.shape}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise InvalidInput("trace_inner: non-finite entries")
    return float(np.real(np.sum(np.conj(a) * b)))
