"""Uniform cubic B-spline activations in closed (non-recursive) matrix form.

Each activation is a degree-k uniform B-spline over a grid domain [a, b]
split into ``omega`` equal intervals.  An input z is mapped to a bin index
and a local coordinate theta in [0, 1]; the value is then

    phi(z) = [w_p, ..., w_{p+k}] @ M @ [theta^k, ..., theta, 1]^T

with a fixed (k+1)x(k+1) coefficient matrix M.  The same window/matrix form
is used across the whole domain (no special edge segments), which makes
indexing into histogram bins and weight vectors trivial.  Outside [a, b]
the local coordinate is clamped, so the function extends as a constant.

Only k=3 is supported; the matrix for other degrees is not provided.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

# Coefficient matrix for uniform cubic segments, basis ordered so that row s
# multiplies weight w_{p+s} and columns multiply descending powers of theta.
M_CUBIC = np.array(
    [
        [-2.0, 6.0, -6.0, 2.0],
        [6.0, -12.0, 0.0, 8.0],
        [-6.0, 6.0, 6.0, 2.0],
        [2.0, 0.0, 0.0, 0.0],
    ]
) / 12.0


def basis_matrix(k: int) -> np.ndarray:
    """Return the segment coefficient matrix for degree k (k=3 only)."""
    if k != 3:
        raise NotImplementedError(f"only cubic splines (k=3) are supported, got k={k}")
    return M_CUBIC


@dataclass(frozen=True)
class GridDomain:
    """Interval [a, b] with ``omega`` uniform sub-intervals for a degree-k spline."""

    a: float
    b: float
    omega: int
    k: int = 3

    def __post_init__(self):
        if not np.isfinite(self.a) or not np.isfinite(self.b):
            raise ValueError("domain bounds must be finite")
        if self.a >= self.b:
            raise ValueError(f"need a < b, got [{self.a}, {self.b}]")
        if self.omega < 1:
            raise ValueError(f"need omega >= 1, got {self.omega}")
        if self.k < 1:
            raise ValueError(f"need k >= 1, got {self.k}")

    @property
    def d(self) -> float:
        """Width of one grid interval."""
        return (self.b - self.a) / self.omega

    @property
    def n_coef(self) -> int:
        """Number of weights per activation on this domain."""
        return self.omega + self.k

    def edges(self) -> np.ndarray:
        return np.linspace(self.a, self.b, self.omega + 1)

    def centers(self) -> np.ndarray:
        return self.a + (np.arange(self.omega) + 0.5) * self.d


def bin_index(z, dom: GridDomain):
    """Bin index of z: min(floor((z - a) / d), omega - 1), clamped to 0 below a."""
    u = np.floor((np.asarray(z, dtype=float) - dom.a) / dom.d)
    idx = np.clip(u, 0, dom.omega - 1).astype(np.int64)
    return idx if idx.ndim else int(idx)


def interp_value(z, dom: GridDomain):
    """Local coordinate of z inside its (clamped) bin.

    Equals the fractional part of (z - a)/d for z in [a, b); the right edge
    z = b maps to bin omega-1 with value 1 so evaluation stays continuous.
    Values outside [a, b] fall outside [0, 1] here; evaluation clamps them.
    """
    z = np.asarray(z, dtype=float)
    theta = (z - dom.a) / dom.d - bin_index(z, dom)
    return theta if theta.ndim else float(theta)


def _power_stack(theta: np.ndarray, k: int, order: int = 0) -> np.ndarray:
    """Columns of descending theta powers, differentiated ``order`` times."""
    cols = []
    for p in range(k, -1, -1):
        c = 1.0
        q = p
        for _ in range(order):
            c *= q
            q -= 1
        if q < 0:
            cols.append(np.zeros_like(theta))
        else:
            cols.append(c * theta**q)
    return np.stack(cols, axis=-1)


def locate(z, dom: GridDomain, clamp_theta: bool = True):
    """Vectorised (bins, theta, in-domain mask) for inputs z.

    The bin index is always clamped to [0, omega-1].  With ``clamp_theta``
    the local coordinate is clipped to [0, 1], extending the spline as a
    constant outside [a, b]; without it the edge segment's polynomial is
    extrapolated instead.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    bins = np.clip(np.floor((z - dom.a) / dom.d), 0, dom.omega - 1).astype(np.int64)
    theta = (z - dom.a) / dom.d - bins
    if clamp_theta:
        theta = np.clip(theta, 0.0, 1.0)
    inside = (z >= dom.a) & (z <= dom.b)
    return bins, theta, inside


def basis_values(z, dom: GridDomain, clamp_theta: bool = True):
    """Per-sample window basis: (bins, C) with C[s] multiplying w_{bin+s}."""
    M = basis_matrix(dom.k)
    bins, theta, _ = locate(z, dom, clamp_theta)
    C = _power_stack(theta, dom.k, order=0) @ M.T
    return bins, C


def basis_derivs(z, dom: GridDomain, order: int = 1):
    """Window basis of the order-th z derivative; zero outside [a, b]."""
    M = basis_matrix(dom.k)
    bins, theta, inside = locate(z, dom)
    C = _power_stack(theta, dom.k, order=order) @ M.T / dom.d**order
    C[~inside] = 0.0
    return bins, C


def _window_dot(w, bins: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Sum over the k+1 active weights: w may be (P,) or (m, P) rows."""
    idx = bins[:, None] + np.arange(C.shape[1])
    w = np.asarray(w, dtype=float)
    if w.ndim == 1:
        return (w[idx] * C).sum(axis=1)
    return np.einsum("mbs,bs->bm", w[:, idx], C)


def eval_activation(z, w_row, dom: GridDomain, clamp_theta: bool = True):
    """Evaluate the spline with weights ``w_row`` at z (scalar or array).

    Outside [a, b] the function extends as a constant; pass
    ``clamp_theta=False`` to extrapolate the edge segments instead (used
    when sampling a spline for refits).
    """
    w_row = np.asarray(w_row, dtype=float)
    if w_row.shape[-1] != dom.n_coef:
        raise ValueError(f"expected {dom.n_coef} weights, got {w_row.shape[-1]}")
    scalar = np.ndim(z) == 0
    bins, C = basis_values(z, dom, clamp_theta)
    out = _window_dot(w_row, bins, C)
    return float(out[0]) if scalar and out.ndim == 1 else (out[0] if scalar else out)


def activation_dz(z, w_row, dom: GridDomain):
    """Derivative of the spline w.r.t. z (right-limit at knots, 0 outside)."""
    w_row = np.asarray(w_row, dtype=float)
    scalar = np.ndim(z) == 0
    bins, C1 = basis_derivs(z, dom, order=1)
    out = _window_dot(w_row, bins, C1)
    return float(out[0]) if scalar and out.ndim == 1 else (out[0] if scalar else out)


def activation_dw(z, dom: GridDomain):
    """Gradient of the spline value w.r.t. its weights (dense, mostly zero)."""
    scalar = np.ndim(z) == 0
    bins, C = basis_values(z, dom)
    grad = np.zeros((len(bins), dom.n_coef))
    idx = bins[:, None] + np.arange(C.shape[1])
    np.put_along_axis(grad, idx, C, axis=1)
    return grad[0] if scalar else grad


def greville_abscissae(dom: GridDomain) -> np.ndarray:
    """Knot-average points where spline weights act like function samples.

    Knots extend uniformly beyond [a, b]; point i is the mean of the k
    interior knots t_{i+1}..t_{i+k}, which for uniform spacing collapses to
    a + (i - (k-1)/2) * d.  There are omega + k points, spaced by d.
    """
    i = np.arange(dom.n_coef)
    return dom.a + (i - (dom.k - 1) / 2.0) * dom.d


class RefitInfo(NamedTuple):
    """Diagnostics from a least-squares refit."""

    max_err: float
    rank: int
    rank_deficient: bool


# Samples per grid interval when fitting a spline to another curve; at least
# k+1 per interval keeps the normal equations well posed.
LSQ_SAMPLES_PER_INTERVAL = 10


def _design_matrix(z: np.ndarray, dom: GridDomain) -> np.ndarray:
    bins, C = basis_values(z, dom)
    A = np.zeros((len(z), dom.n_coef))
    idx = bins[:, None] + np.arange(C.shape[1])
    np.put_along_axis(A, idx, C, axis=1)
    return A


def fit_to_samples(z: np.ndarray, y: np.ndarray, dom: GridDomain):
    """Least-squares spline weights reproducing samples y at locations z.

    y may be (S,) for one activation or (S, m) for m activations sharing z.
    Singular systems fall back to the minimum-norm solution (SVD), flagged
    via ``rank_deficient``.
    """
    A = _design_matrix(z, dom)
    y2 = y if y.ndim == 2 else y[:, None]
    sol, _, rank, _ = np.linalg.lstsq(A, y2, rcond=None)
    max_err = float(np.abs(A @ sol - y2).max()) if y2.size else 0.0
    info = RefitInfo(max_err=max_err, rank=int(rank), rank_deficient=rank < dom.n_coef)
    w = sol.T
    return (w[0] if y.ndim == 1 else w), info


def refit_least_squares(old_weights, old_dom: GridDomain, new_dom: GridDomain):
    """Refit weights so the spline on new_dom reproduces the old spline.

    The old spline is sampled densely over the new domain and the new
    weights solve the resulting linear least-squares problem.  Outside the
    old bounds the old spline is evaluated by the same clamped-window
    formula, i.e. its edge segments extrapolate, so e.g. a linear spline
    stays linear across a stretch.
    """
    z = np.linspace(new_dom.a, new_dom.b, LSQ_SAMPLES_PER_INTERVAL * new_dom.omega)
    old_weights = np.asarray(old_weights, dtype=float)
    y = eval_activation(z, old_weights, old_dom, clamp_theta=False)
    return fit_to_samples(z, y, new_dom)


def refit_greville(old_weights, old_dom: GridDomain, new_dom: GridDomain):
    """Approximate refit: linearly interpolate weights over Greville points.

    Old weights are treated as samples at the old Greville abscissae and
    re-read at the new ones; queries past the old range clamp to the nearest
    old weight.  Much cheaper than the exact least-squares route.
    """
    g_old = greville_abscissae(old_dom)
    g_new = greville_abscissae(new_dom)
    old_weights = np.asarray(old_weights, dtype=float)
    if old_weights.ndim == 1:
        return np.interp(g_new, g_old, old_weights)
    return np.stack([np.interp(g_new, g_old, row) for row in old_weights])


def refine_grid(old_weights, old_dom: GridDomain, new_omega: int):
    """Re-express the spline on the same [a, b] with more grid intervals."""
    if new_omega <= old_dom.omega:
        raise ValueError(f"refinement needs new_omega > {old_dom.omega}, got {new_omega}")
    new_dom = GridDomain(old_dom.a, old_dom.b, new_omega, old_dom.k)
    new_w, info = refit_least_squares(old_weights, old_dom, new_dom)
    return new_w, new_dom, info
