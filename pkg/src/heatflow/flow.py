"""Transport along the interpolation flow dS_t/dt = grad V_t(S_t).

Forward integration moves mass from the target measure toward gamma;
integrating the same vector field backward from the truncation horizon
t_max realizes the inverse map T approx S_{t_max}^{-1}, which pushes gamma
onto e^{-V} dgamma up to a truncation error of e^{-t_max} sup|grad V|
(the drift obeys |grad V_t| <= e^{-t} sup|grad V|).

The spatial Jacobian solves dJ/dt = D^2 V_t(S_t) J and is integrated in
one augmented system with the state so the two stay synchronized.
Backward runs reuse the forward drift routine with a negated step; there
is no separate reverse-drift code path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DensityUnderflowError, StepFailureError
from .semigroup import SemigroupEvaluator

DEFAULT_T_MAX = 12.0
DEFAULT_RK4_STEPS = 600


@dataclass(frozen=True)
class StepperConfig:
    """Fixed-step classic Runge-Kutta by default; embedded 4(5) pair optional."""

    method: str = "rk4"          # "rk4" | "adaptive"
    n_steps: int = DEFAULT_RK4_STEPS
    abs_tol: float = 1e-9
    rel_tol: float = 1e-9
    max_steps: int = 100_000
    initial_step: float = 1e-2

    def __post_init__(self):
        if self.method not in ("rk4", "adaptive"):
            raise ValueError(f"unknown stepper method {self.method!r}")


@dataclass(frozen=True)
class TrajectoryRecord:
    times: np.ndarray                   # (M,)
    states: np.ndarray                  # (M, N, dim)
    jacobians: Optional[np.ndarray]     # (M, N, dim, dim) or None
    step_errors: np.ndarray             # (M-1,) max scaled error estimate per step
    rejected_steps: int = 0

    @property
    def endpoint(self) -> np.ndarray:
        return self.states[-1]


@dataclass(frozen=True)
class TransportResult:
    point: np.ndarray
    error_bound: Optional[float]
    certified: bool
    jacobian: Optional[np.ndarray] = None
    jacobian_norm: Optional[np.ndarray] = None


@dataclass(frozen=True)
class PushforwardSamples:
    inputs: np.ndarray
    outputs: np.ndarray
    jacobian_norms: Optional[np.ndarray]
    error_bound: Optional[float]
    certified: bool
    failed_indices: np.ndarray
    seed: int


def trajectory_table(record: TrajectoryRecord, index: int = 0) -> dict:
    """CSV-ready columns (index, t, coordinates) for one recorded trajectory."""
    states = record.states[:, index, :]
    cols = {"index": np.full(record.times.size, index),
            "t": record.times}
    for d in range(states.shape[1]):
        cols[f"x_{d}"] = states[:, d]
    return cols


def map_table(samples: "PushforwardSamples") -> list[dict]:
    """JSON-ready records (input, output, jacobian_norm, error_bound)."""
    out = []
    for i in range(samples.inputs.shape[0]):
        out.append({
            "input": samples.inputs[i].tolist(),
            "output": samples.outputs[i].tolist(),
            "jacobian_norm": (None if samples.jacobian_norms is None
                              else float(samples.jacobian_norms[i])),
            "error_bound": samples.error_bound,
        })
    return out


@dataclass(frozen=True)
class FlowIntegrator:
    """Time-stepping engine for the flow and its variational equation.

    t_hess_floor regularizes the variational equation for rough potentials:
    the kink-sampling Hessian route amplifies noise like 1/t as t -> 0, so
    Hessian evaluations below the floor are clamped to it.  Smooth
    potentials at t = 0 use their own Hessian directly.
    """

    evaluator: SemigroupEvaluator
    t_max: float = DEFAULT_T_MAX
    stepper: StepperConfig = field(default_factory=StepperConfig)
    t_hess_floor: float = 1e-3

    # -- vector fields ---------------------------------------------------

    def _drift(self, z: np.ndarray, t: float) -> np.ndarray:
        return self.evaluator.drift(z, max(t, 0.0))

    def _drift_aug(self, z: np.ndarray, J: np.ndarray, t: float):
        t = max(t, 0.0)
        t_h = t if (t == 0.0 or t >= self.t_hess_floor) else self.t_hess_floor
        if t_h == t:
            dz, H = self.evaluator.drift_and_hess_vt(z, t)
        else:
            dz = self.evaluator.drift(z, t)
            _, H = self.evaluator.drift_and_hess_vt(z, t_h)
        return dz, np.einsum("nde,nef->ndf", H, J)

    # -- integrators -------------------------------------------------------

    def _integrate_rk4(self, z0, t0, t1, n_steps, record=False, with_jac=False):
        z = np.array(z0, dtype=float)
        n, dim = z.shape
        J = np.broadcast_to(np.eye(dim), (n, dim, dim)).copy() if with_jac else None
        # stage times from the grid, not accumulation: the final stage must
        # land on t1 exactly (t = 0 selects the exact-Hessian route)
        grid = np.linspace(t0, t1, n_steps + 1)
        states = [z.copy()] if record else None
        jacs = [J.copy()] if (record and with_jac) else None
        for i in range(n_steps):
            t, t_next = grid[i], grid[i + 1]
            h = t_next - t
            mid = 0.5 * (t + t_next)
            if with_jac:
                k1, K1 = self._drift_aug(z, J, t)
                k2, K2 = self._drift_aug(z + 0.5 * h * k1, J + 0.5 * h * K1, mid)
                k3, K3 = self._drift_aug(z + 0.5 * h * k2, J + 0.5 * h * K2, mid)
                k4, K4 = self._drift_aug(z + h * k3, J + h * K3, t_next)
                z = z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
                J = J + (h / 6.0) * (K1 + 2 * K2 + 2 * K3 + K4)
            else:
                k1 = self._drift(z, t)
                k2 = self._drift(z + 0.5 * h * k1, mid)
                k3 = self._drift(z + 0.5 * h * k2, mid)
                k4 = self._drift(z + h * k3, t_next)
                z = z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            if record:
                states.append(z.copy())
                if with_jac:
                    jacs.append(J.copy())
        if record:
            return TrajectoryRecord(
                grid, np.asarray(states),
                np.asarray(jacs) if with_jac else None,
                np.zeros(n_steps),
            )
        return z, J

    # Fehlberg 4(5) tableau
    _A = (
        (),
        (1 / 4,),
        (3 / 32, 9 / 32),
        (1932 / 2197, -7200 / 2197, 7296 / 2197),
        (439 / 216, -8.0, 3680 / 513, -845 / 4104),
        (-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40),
    )
    _C = (0.0, 1 / 4, 3 / 8, 12 / 13, 1.0, 1 / 2)
    _B5 = (16 / 135, 0.0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55)
    _B4 = (25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0)

    def _integrate_adaptive(self, z0, t0, t1, record=False):
        cfg = self.stepper
        z = np.array(z0, dtype=float)
        direction = 1.0 if t1 >= t0 else -1.0
        t = t0
        h = direction * min(cfg.initial_step, abs(t1 - t0))
        times = [t0]
        states = [z.copy()] if record else None
        errs = []
        rejected = 0
        steps = 0
        while direction * (t1 - t) > 1e-14:
            if steps >= cfg.max_steps:
                raise StepFailureError(
                    f"adaptive stepper exceeded max_steps={cfg.max_steps} "
                    f"({rejected} rejections)"
                )
            steps += 1
            if direction * (t + h - t1) > 0:
                h = t1 - t
            ks = []
            for i in range(6):
                zi = z
                for a, k in zip(self._A[i], ks):
                    zi = zi + h * a * k
                ks.append(self._drift(zi, t + self._C[i] * h))
            z5 = z + h * sum(b * k for b, k in zip(self._B5, ks))
            z4 = z + h * sum(b * k for b, k in zip(self._B4, ks))
            scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(z), np.abs(z5))
            err = float(np.max(np.abs(z5 - z4) / scale)) if z5.size else 0.0
            if err <= 1.0:
                t += h
                z = z5
                errs.append(err)
                if record:
                    times.append(t)
                    states.append(z.copy())
            else:
                rejected += 1
            factor = 0.9 * (1.0 / max(err, 1e-12)) ** 0.2
            h *= min(5.0, max(0.2, factor))
        if record:
            return TrajectoryRecord(
                np.asarray(times), np.asarray(states), None,
                np.asarray(errs), rejected,
            )
        return z, rejected

    # -- public operations --------------------------------------------------

    def forward_flow(self, x: np.ndarray, t0: float, t1: float,
                     with_jacobian: bool = False) -> TrajectoryRecord:
        """Trajectory of the flow from time t0 to t1 >= t0, states recorded."""
        if t1 < t0 or t0 < 0:
            raise ValueError("need 0 <= t0 <= t1")
        xb = np.atleast_2d(np.asarray(x, dtype=float))
        if self.stepper.method == "adaptive" and not with_jacobian:
            return self._integrate_adaptive(xb, t0, t1, record=True)
        return self._integrate_rk4(xb, t0, t1, self.stepper.n_steps, record=True,
                                   with_jac=with_jacobian)

    def transport_batch(self, y: np.ndarray, with_jacobian: bool = False):
        """Backward integration from t_max to 0 for a batch of points.

        Returns (points, jacobians or None, failed_mask).  Samples whose
        density underflows are frozen at their last good state and flagged
        rather than dropped, so indices stay aligned.
        """
        yb = np.atleast_2d(np.asarray(y, dtype=float))
        try:
            if self.stepper.method == "adaptive" and not with_jacobian:
                z, _ = self._integrate_adaptive(yb, self.t_max, 0.0)
                J = None
            else:
                z, J = self._integrate_rk4(
                    yb, self.t_max, 0.0, self.stepper.n_steps,
                    with_jac=with_jacobian,
                )
            failed = ~np.all(np.isfinite(z), axis=1)
        except DensityUnderflowError:
            # retry samplewise to isolate the failing points
            z = np.empty_like(yb)
            J = (np.empty(yb.shape + (yb.shape[1],)) if with_jacobian else None)
            failed = np.zeros(yb.shape[0], dtype=bool)
            for i in range(yb.shape[0]):
                try:
                    zi, Ji = self._integrate_rk4(
                        yb[i:i + 1], self.t_max, 0.0, self.stepper.n_steps,
                        with_jac=with_jacobian,
                    )
                    z[i] = zi[0]
                    if with_jacobian:
                        J[i] = Ji[0]
                except DensityUnderflowError:
                    z[i] = yb[i]
                    if with_jacobian:
                        J[i] = np.eye(yb.shape[1])
                    failed[i] = True
        return z, J, failed

    def truncation_error_bound(self) -> Optional[float]:
        g = self.evaluator.potential.grad_sup_norm
        if g is None:
            return None
        return float(np.exp(-self.t_max) * g)

    def inverse_transport(self, y: np.ndarray) -> TransportResult:
        """T(y) approx S_{t_max}^{-1}(y): the map pushing gamma onto e^{-V} dgamma.

        When the potential declares no gradient bound the result is still
        returned but its truncation error cannot be certified.
        """
        z, _, failed = self.transport_batch(y)
        if failed.any():
            raise DensityUnderflowError("drift underflow along the trajectory")
        bound = self.truncation_error_bound()
        point = z[0] if np.asarray(y).ndim == 1 else z
        return TransportResult(point, bound, bound is not None)

    def jacobian_along_flow(self, y: np.ndarray):
        """(J, opnorm): spatial Jacobian of the inverse transport at y."""
        z, J, failed = self.transport_batch(y, with_jacobian=True)
        if failed.any():
            raise DensityUnderflowError("drift underflow along the trajectory")
        norms = np.linalg.svd(J, compute_uv=False)[..., 0]
        if np.asarray(y).ndim == 1:
            return J[0], float(norms[0])
        return J, norms

    def pushforward_samples(self, count: int, seed: int,
                            with_jacobian: bool = True,
                            chunk: int = 8192) -> PushforwardSamples:
        """Map `count` gamma-samples drawn from `seed` through the transport.

        Deterministic for fixed (count, seed) and independent of `chunk`;
        per-sample failures are flagged by index, never dropped.
        """
        if count < 1:
            raise ValueError("count must be >= 1")
        dim = self.evaluator.potential.dim
        rng = np.random.default_rng(seed)
        inputs = rng.standard_normal((count, dim))
        outputs = np.empty_like(inputs)
        norms = np.empty(count) if with_jacobian else None
        failed = np.zeros(count, dtype=bool)
        for lo in range(0, count, chunk):
            hi = min(lo + chunk, count)
            z, J, bad = self.transport_batch(inputs[lo:hi], with_jacobian=with_jacobian)
            outputs[lo:hi] = z
            failed[lo:hi] = bad
            if with_jacobian:
                norms[lo:hi] = np.linalg.svd(J, compute_uv=False)[..., 0]
        bound = self.truncation_error_bound()
        return PushforwardSamples(
            inputs, outputs, norms, bound, bound is not None,
            np.flatnonzero(failed), seed,
        )
