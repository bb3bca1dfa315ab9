"""Smoothing semigroup P_t f(x) = E f(e^{-t} x + sqrt(1-e^{-2t}) Z) for f = e^{-V}.

One evaluator owns a potential and a quadrature scheme; every quantity at
a given (x, t) shares the same nodes so that ratios such as the drift
grad(-log f_t) benefit from correlated error cancellation.  Weighted sums
over the density are max-shifted in log space, so potentials unbounded
below (quadratic tails of the wrong sign) do not overflow.

Batched evaluation: x may be a single point of shape (dim,) or a batch
(N, dim); outputs follow suit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DensityUnderflowError, HermiteAtTimeZeroError
from .potentials import Potential, sym_eig_bounds
from .quadrature import QuadratureScheme

LOG_FLOOR_DEFAULT = 1e-300


def _as_batch(x: np.ndarray, dim: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1 and x.shape[0] == dim:
        return x[None, :], True
    if x.ndim == 2 and x.shape[1] == dim:
        return x, False
    raise ValueError(f"point batch must have shape (dim,) or (N, dim) with dim={dim}")


def ou_expectation(fn, x: np.ndarray, t: float, scheme: QuadratureScheme) -> np.ndarray:
    """E fn(e^{-t} x + sqrt(1-e^{-2t}) Z) for an arbitrary integrand fn.

    fn maps (..., dim) -> (...).  At t = 0 this is fn(x) exactly.
    """
    xb, single = _as_batch(x, scheme.dim)
    if t < 0:
        raise ValueError("time must be nonnegative")
    if t == 0.0:
        out = fn(xb)
        return out[0] if single else out
    e = np.exp(-t)
    s = np.sqrt(-np.expm1(-2.0 * t))
    nodes, w = scheme.nodes_weights()
    pts = e * xb[:, None, :] + s * nodes[None, :, :]
    out = fn(pts) @ w
    return out[0] if single else out


@dataclass(frozen=True)
class SemigroupEvaluator:
    """Evaluates f_t = P_t e^{-V}, its derivatives and the flow drift.

    floor: estimates at or below this density raise DensityUnderflowError
    rather than silently flushing to zero; the drift divides by f_t and a
    silent zero would poison trajectories.  Immutable, safe to share.
    """

    potential: Potential
    scheme: QuadratureScheme
    floor: float = LOG_FLOOR_DEFAULT

    def __post_init__(self):
        if self.scheme.dim != self.potential.dim:
            raise ValueError("scheme dimension must match potential dimension")
        nodes, w = self.scheme.nodes_weights()
        with np.errstate(divide="ignore"):
            logw = np.log(w)
        object.__setattr__(self, "_nodes", nodes)
        object.__setattr__(self, "_w", w)
        object.__setattr__(self, "_logw", logw)

    # -- core shifted-exponential pass ----------------------------------

    def _pts(self, xb: np.ndarray, t: float) -> tuple[np.ndarray, float, float]:
        e = float(np.exp(-t))
        s = float(np.sqrt(-np.expm1(-2.0 * t)))
        pts = e * xb[:, None, :] + s * self._nodes[None, :, :]
        return pts, e, s

    def _relative_density(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(u, m): u = w * f(pts) / e^m rowwise, m the rowwise log maximum."""
        a = self._logw[None, :] - self.potential.value(pts)
        m = np.max(a, axis=1)
        u = np.exp(a - m[:, None])
        return u, m

    def _check_floor(self, logf: np.ndarray):
        if np.any(logf <= np.log(self.floor)):
            raise DensityUnderflowError(
                "smoothed density at or below floor; quadrature range too "
                "small for the queried tail"
            )

    # -- public surface ---------------------------------------------------

    def log_pt_f(self, x: np.ndarray, t: float) -> np.ndarray:
        xb, single = _as_batch(x, self.potential.dim)
        if t < 0:
            raise ValueError("time must be nonnegative")
        if t == 0.0:
            out = -self.potential.value(xb)
        else:
            pts, _, _ = self._pts(xb, t)
            u, m = self._relative_density(pts)
            out = m + np.log(np.sum(u, axis=1))
        self._check_floor(out)
        return out[0] if single else out

    def pt_f(self, x: np.ndarray, t: float) -> np.ndarray:
        """f_t(x); exact f(x) at t = 0, quadrature estimate otherwise."""
        return np.exp(self.log_pt_f(x, t))

    def v_t(self, x: np.ndarray, t: float) -> np.ndarray:
        """-log f_t(x)."""
        return -self.log_pt_f(x, t)

    def grad_pt_f(self, x: np.ndarray, t: float) -> np.ndarray:
        """grad f_t(x) = -e^{-t} E[(f grad V)(e^{-t} x + s Z)], shared nodes."""
        xb, single = _as_batch(x, self.potential.dim)
        if t == 0.0:
            out = -self.potential.density(xb)[..., None] * self.potential.grad(xb)
            return out[0] if single else out
        pts, e, _ = self._pts(xb, t)
        u, m = self._relative_density(pts)
        gv = self.potential.grad(pts)
        out = -e * np.exp(m)[:, None] * np.einsum("nk,nkd->nd", u, gv)
        return out[0] if single else out

    def hess_pt_f(self, x: np.ndarray, t: float, route: str = "commute") -> np.ndarray:
        """Hessian of f_t by either route.

        route "commute": e^{-2t} E[(D^2 f)(pts)] with D^2 f = f (grad V grad V^T - D^2 V);
        needs Hessian access on the potential, valid at every t >= 0.
        route "hermite": E[(Z Z^T - Id) f(pts)] / (e^{2t} - 1); only samples V,
        so it works for rough potentials, but requires t > 0.
        """
        xb, single = _as_batch(x, self.potential.dim)
        dim = self.potential.dim
        if route == "hermite":
            if t <= 0.0:
                raise HermiteAtTimeZeroError("hermite route requires t > 0")
            pts, _, _ = self._pts(xb, t)
            u, m = self._relative_density(pts)
            outer = (self._nodes[:, :, None] * self._nodes[:, None, :]
                     - np.eye(dim)[None, :, :])
            out = np.einsum("nk,kde->nde", u, outer)
            out *= (np.exp(m) / np.expm1(2.0 * t))[:, None, None]
            return out[0] if single else out
        if route != "commute":
            raise ValueError(f"unknown hessian route {route!r}")
        if t == 0.0:
            f = self.potential.density(xb)
            g = self.potential.grad(xb)
            h = self.potential.hess(xb)
            out = f[..., None, None] * (g[..., :, None] * g[..., None, :] - h)
            return out[0] if single else out
        pts, e, _ = self._pts(xb, t)
        u, m = self._relative_density(pts)
        gv = self.potential.grad(pts)
        hv = self.potential.hess(pts)
        d2f = gv[..., :, None] * gv[..., None, :] - hv
        out = (e * e) * np.exp(m)[:, None, None] * np.einsum("nk,nkde->nde", u, d2f)
        return out[0] if single else out

    def drift(self, x: np.ndarray, t: float) -> np.ndarray:
        """grad V_t(x) = -grad f_t / f_t, from one shared-node pass.

        Uses the gradient-commutation form, whose quadrature value obeys
        |drift| <= e^{-t} sup|grad V| identically (positive weights average
        grad V pointwise), and which stays finite in the t -> 0 limit.
        """
        xb, single = _as_batch(x, self.potential.dim)
        if t == 0.0:
            out = self.potential.grad(xb)
            return out[0] if single else out
        pts, e, _ = self._pts(xb, t)
        u, m = self._relative_density(pts)
        den = np.sum(u, axis=1)
        self._check_floor(m + np.log(den))
        gv = self.potential.grad(pts)
        num = np.einsum("nk,nkd->nd", u, gv)
        out = e * num / den[:, None]
        return out[0] if single else out

    def drift_and_hess_vt(self, x: np.ndarray, t: float,
                          hess_route: str = "auto") -> tuple[np.ndarray, np.ndarray]:
        """(grad V_t, D^2 V_t) sharing a single quadrature pass.

        D^2 V_t = -D^2 f_t / f_t + (grad f_t / f_t) (grad f_t / f_t)^T.
        Route "auto" picks hermite for t > 0 (only samples V, correct for
        rough potentials whose pointwise Hessian misses kink curvature) and
        commute at t = 0.
        """
        xb, single = _as_batch(x, self.potential.dim)
        dim = self.potential.dim
        if hess_route == "auto":
            hess_route = "hermite" if t > 0.0 else "commute"
        if t == 0.0:
            g = self.potential.grad(xb)
            h = self.potential.hess(xb)
            return (g[0], h[0]) if single else (g, h)
        pts, e, _ = self._pts(xb, t)
        u, m = self._relative_density(pts)
        den = np.sum(u, axis=1)
        self._check_floor(m + np.log(den))
        gv = self.potential.grad(pts)
        grad_ratio = -e * np.einsum("nk,nkd->nd", u, gv) / den[:, None]
        if hess_route == "hermite":
            outer = (self._nodes[:, :, None] * self._nodes[:, None, :]
                     - np.eye(dim)[None, :, :])
            hess_ratio = np.einsum("nk,kde->nde", u, outer)
            hess_ratio /= (den * np.expm1(2.0 * t))[:, None, None]
        else:
            hv = self.potential.hess(pts)
            d2f = gv[..., :, None] * gv[..., None, :] - hv
            hess_ratio = (e * e) * np.einsum("nk,nkde->nde", u, d2f) / den[:, None, None]
        drift = -grad_ratio
        hess_vt = -hess_ratio + grad_ratio[..., :, None] * grad_ratio[..., None, :]
        return (drift[0], hess_vt[0]) if single else (drift, hess_vt)

    def log_concavity(self, x: np.ndarray, t: float, route: str = "auto") -> np.ndarray:
        """Largest eigenvalue of D^2 log f_t(x) = -D^2 V_t(x) pointwise."""
        _, hess_vt = self.drift_and_hess_vt(x, t, hess_route=route)
        _, top = sym_eig_bounds(-hess_vt)
        return top


def concavity_profile(e: SemigroupEvaluator, grid, t: float,
                      route: str = "auto") -> float:
    """lam_hat(t): sup over the grid of the top eigenvalue of D^2 log f_t.

    f_t is -lam_hat(t)-log-concave on the grid.  `grid` may be a GridSpec
    or an (N, dim) array of points.
    """
    pts = grid.points() if hasattr(grid, "points") else np.asarray(grid, float)
    return float(np.max(e.log_concavity(pts, t, route=route)))
