"""Independent Dirichlet-Neumann reference: a finite-difference Laplace solve on the fluid strip.

The strip {-H < y < eta(x)} (one horizontal dimension, finite depth) is flattened by
y = s (1 + eta/H) + eta with s in [-H, 0].  In (x, s) the Laplace equation becomes

    u_xx + 2 q u_xs + (q^2 + 1/beta^2) u_ss + s_xx u_s = 0,
    beta = 1 + eta/H,  q = -(H + s) eta' / (H + eta),
    s_xx = -(H + s) (eta'' (H + eta) - 2 eta'^2) / (H + eta)^2,

with u = f on s = 0 and u_s = 0 on s = -H.  The surface normal derivative is
G f = u_s (1 + eta'^2) / beta - eta' f'.  Derivatives are fourth-order finite differences
in both directions (periodic in x, one-sided near the boundaries in s), so nothing here
shares code with the spectral expansion it checks.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

# centred fourth-order stencils, offsets -2..2
_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_D2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
# off-centred fourth-order stencils for the row next to the bottom
_D1_EDGE = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0         # offsets -1..3
_D2_EDGE = np.array([10.0, -15.0, -4.0, 14.0, -6.0, 1.0]) / 12.0   # offsets -1..4
# one-sided first derivative at the boundary point, offsets 0..4
_D1_ONE_SIDED = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0


def _periodic_derivative(values: np.ndarray, spacing: float, stencil: np.ndarray, power: int) -> np.ndarray:
    out = np.zeros_like(values)
    for offset, c in zip(range(-2, 3), stencil):
        out += c * np.roll(values, -offset)
    return out / spacing ** power


def _periodic_matrix(n: int, stencil: np.ndarray) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    for offset, c in zip(range(-2, 3), stencil):
        if c == 0:
            continue
        idx = np.arange(n)
        rows.append(idx)
        cols.append((idx + offset) % n)
        vals.append(np.full(n, c))
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))


def _vertical_matrices(ns: int, hs: float) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """First and second s-derivatives on nodes 0..ns (0 = bottom, ns = surface), rows 1..ns-1."""
    d1 = sp.lil_matrix((ns + 1, ns + 1))
    d2 = sp.lil_matrix((ns + 1, ns + 1))
    for i in range(1, ns):
        if i == 1:
            for off, c in zip(range(-1, 4), _D1_EDGE):
                d1[i, i + off] = c
            for off, c in zip(range(-1, 5), _D2_EDGE):
                d2[i, i + off] = c
        elif i == ns - 1:
            for off, c in zip(range(-3, 2), -_D1_EDGE[::-1]):
                d1[i, i + off] = c
            for off, c in zip(range(-4, 2), _D2_EDGE[::-1]):
                d2[i, i + off] = c
        else:
            for off, c in zip(range(-2, 3), _D1):
                d1[i, i + off] = c
            for off, c in zip(range(-2, 3), _D2):
                d2[i, i + off] = c
    return (d1.tocsr() / hs), (d2.tocsr() / hs ** 2)


def fd_dirichlet_neumann(eta: np.ndarray, f: np.ndarray, depth: float, vertical_points: int = 128) -> np.ndarray:
    """G(eta) f on the periodic grid x_k = 2 pi k / N, by a sparse fourth-order solve."""
    eta = np.asarray(eta, dtype=float)
    f = np.asarray(f, dtype=float)
    n = eta.size
    if f.shape != eta.shape or eta.ndim != 1:
        raise ValueError("eta and f must be 1-D arrays of equal length")
    if not np.isfinite(depth) or depth <= 0:
        raise ValueError("the strip oracle needs a finite positive depth")
    if eta.min() + depth <= 0:
        raise ValueError("surface touches the bottom")
    ns = int(vertical_points)
    if ns < 8:
        raise ValueError("need at least 8 vertical intervals")

    hx = 2 * np.pi / n
    hs = depth / ns
    s = np.linspace(-depth, 0.0, ns + 1)
    ex = _periodic_derivative(eta, hx, _D1, 1)
    exx = _periodic_derivative(eta, hx, _D2, 2)
    fx = _periodic_derivative(f, hx, _D1, 1)
    thick = depth + eta
    beta = thick / depth

    # unknowns: nodes i = 0..ns-1 in s (surface row is Dirichlet data), all x; index = i * n + k
    S, _ = np.meshgrid(s, np.arange(n), indexing="ij")
    q = -(depth + S) * ex[None, :] / thick[None, :]
    sxx = -(depth + S) * (exx * thick - 2 * ex ** 2)[None, :] / thick[None, :] ** 2
    css = q ** 2 + 1.0 / beta[None, :] ** 2

    Dx = _periodic_matrix(n, _D1) / hx
    Dxx = _periodic_matrix(n, _D2) / hx ** 2
    Ds, Dss = _vertical_matrices(ns, hs)
    Ix = sp.identity(n, format="csr")

    def diag(a: np.ndarray) -> sp.dia_matrix:
        return sp.diags(a.ravel())

    full = (sp.kron(sp.identity(ns + 1), Dxx)
            + 2 * diag(q) @ sp.kron(Ds, Dx)
            + diag(css) @ sp.kron(Dss, Ix)
            + diag(sxx) @ sp.kron(Ds, Ix)).tocsr()

    interior = np.arange(n, ns * n)  # rows 1..ns-1
    bottom_row = sp.kron(sp.csr_matrix((_D1_ONE_SIDED, ([0] * 5, list(range(5)))), shape=(1, ns + 1)), Ix)
    system = sp.vstack([bottom_row, full[interior]]).tocsr()
    unknown = np.arange(ns * n)
    surface = np.arange(ns * n, (ns + 1) * n)
    A = system[:, unknown]
    rhs = -system[:, surface] @ f
    u = np.empty((ns + 1) * n)
    u[unknown] = spsolve(A.tocsc(), rhs)
    u[surface] = f
    U = u.reshape(ns + 1, n)

    us_top = -(_D1_ONE_SIDED[None, :] @ U[ns - 4:][::-1]).ravel() / hs
    return us_top * (1.0 + ex ** 2) / beta - ex * fx
