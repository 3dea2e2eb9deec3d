"""Adaptive explicit Runge-Kutta integration of the truncated system.

The default method is the Dormand-Prince 5(4) pair: fifth-order propagation,
embedded fourth-order error estimate, first-same-as-last.  Sample times are
served by cubic Hermite interpolation between accepted step endpoints, so
sampling never changes the step sequence.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, HorizonError, StiffnessError, ValidationError
from .kernel import KernelSpec
from .rhs import make_rhs
from .state import ClusterDistribution, SampleDiagnostics, Trajectory

METHODS = ("dopri54", "rk4")

# Dormand-Prince 5(4)
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
# fifth-order weights minus embedded fourth-order weights
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0


class StepDecision(enum.Enum):
    ACCEPT = "accept"
    REJECT_HALVE = "reject_halve"


def _uniform_samples(t_end: float, count: int = 101) -> list[float]:
    return [t_end * k / (count - 1) for k in range(count)]


@dataclass
class SolverConfig:
    t_end: float
    rtol: float = 1e-8
    atol: float = 1e-12
    sample_times: Optional[Sequence[float]] = None
    max_steps: int = 10_000_000
    neg_floor: float = 1e-14
    fixed_step: Optional[float] = None
    method: str = "dopri54"

    def __post_init__(self):
        if not (isinstance(self.t_end, (int, float)) and self.t_end > 0 and math.isfinite(self.t_end)):
            raise ValidationError(f"t_end must be a positive finite number, got {self.t_end!r}")
        self.t_end = float(self.t_end)
        if not self.rtol > 0:
            raise ValidationError(f"rtol must be > 0, got {self.rtol}")
        if not self.atol > 0:
            raise ValidationError(f"atol must be > 0, got {self.atol}")
        if not self.neg_floor >= 0:
            raise ValidationError(f"neg_floor must be >= 0, got {self.neg_floor}")
        if int(self.max_steps) < 1:
            raise ValidationError(f"max_steps must be >= 1, got {self.max_steps}")
        self.max_steps = int(self.max_steps)
        if self.method not in METHODS:
            raise ValidationError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.fixed_step is not None and not self.fixed_step > 0:
            raise ValidationError(f"fixed_step must be > 0, got {self.fixed_step}")
        if self.method == "rk4" and self.fixed_step is None:
            raise ValidationError("rk4 has no error estimate; set fixed_step")
        if self.sample_times is None:
            self.sample_times = _uniform_samples(self.t_end)
        ts = [float(t) for t in self.sample_times]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValidationError("sample_times must be strictly increasing")
        if ts and (ts[0] < 0 or ts[-1] > self.t_end):
            raise ValidationError("sample_times must lie in [0, t_end]")
        if not ts or ts[0] != 0.0:
            ts.insert(0, 0.0)
        self.sample_times = ts

    def to_dict(self) -> dict:
        return {
            "t_end": self.t_end,
            "rtol": self.rtol,
            "atol": self.atol,
            "sample_times": list(self.sample_times),
            "max_steps": self.max_steps,
            "neg_floor": self.neg_floor,
            "fixed_step": self.fixed_step,
            "method": self.method,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SolverConfig":
        if not isinstance(d, dict):
            raise ConfigError("solver: expected an object")
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"solver: unknown field(s) {sorted(unknown)}")
        if "t_end" not in d:
            raise ConfigError("solver.t_end: required")
        try:
            return cls(**d)
        except (TypeError, ValidationError) as exc:
            raise ConfigError(f"solver: {exc}") from exc


@dataclass
class StepDiagnostics:
    accepted: int = 0
    rejected: int = 0
    mass_drift: float = 0.0
    min_component: float = math.inf


def error_norm(err: np.ndarray, y0: np.ndarray, y1: np.ndarray, rtol: float, atol: float) -> float:
    """Scaled max norm ``max_i |e_i| / (atol + rtol*max(|y0_i|, |y1_i|))``."""
    scale = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.max(np.abs(err) / scale))


def step_accept_policy(proposed_state: np.ndarray, error_estimate: float, cfg: SolverConfig) -> StepDecision:
    """Reject on scaled error above 1 or any component below ``-neg_floor``."""
    if not error_estimate <= 1.0:
        return StepDecision.REJECT_HALVE
    if proposed_state.size and float(np.min(proposed_state)) < -cfg.neg_floor:
        return StepDecision.REJECT_HALVE
    return StepDecision.ACCEPT


def clamp_small_negatives(y: np.ndarray, neg_floor: float) -> bool:
    """Zero components in ``[-neg_floor, 0)`` in place; return whether any changed."""
    mask = (y < 0.0) & (y >= -neg_floor)
    if mask.any():
        y[mask] = 0.0
        return True
    return False


def _hermite(y0, f0, y1, f1, h, theta):
    # increment form: exact for constant solutions
    t2 = theta * theta
    t3 = t2 * theta
    return y0 + (
        (3 * t2 - 2 * t3) * (y1 - y0)
        + ((t3 - 2 * t2 + theta) * h) * f0
        + ((t3 - t2) * h) * f1
    )


class _Stepper:
    def __init__(self, f, n, method):
        self.f = f
        self.method = method
        self.k = np.empty((7, n))
        self.tmp = np.empty(n)

    def dopri(self, y, fy, h):
        k, f, tmp = self.k, self.f, self.tmp
        k[0] = fy
        for s in range(1, 7):
            np.copyto(tmp, y)
            for j, a in enumerate(_A[s]):
                if a:
                    tmp += (h * a) * k[j]
            f(tmp, k[s])
        y_new = tmp.copy()  # stage 7 argument is the fifth-order solution
        err = np.zeros_like(y)
        for j, e in enumerate(_E):
            if e:
                err += (h * e) * k[j]
        return y_new, k[6].copy(), err

    def rk4(self, y, fy, h):
        k, f = self.k, self.f
        k[0] = fy
        f(y + (0.5 * h) * k[0], k[1])
        f(y + (0.5 * h) * k[1], k[2])
        f(y + h * k[2], k[3])
        y_new = y + (h / 6.0) * (k[0] + 2.0 * k[1] + 2.0 * k[2] + k[3])
        f_new = f(y_new, np.empty_like(y))
        return y_new, f_new, None

    def step(self, y, fy, h):
        return self.dopri(y, fy, h) if self.method == "dopri54" else self.rk4(y, fy, h)


def solve_system(f, y0: np.ndarray, cfg: SolverConfig):
    """Drive ``f(y, out)`` from ``y0`` and sample it at ``cfg.sample_times``.

    Returns ``(times, states, counts)`` where ``counts[k]`` is the
    ``(accepted, rejected)`` step tally when sample ``k`` was taken.  Samples
    are clamped copies; the caller owns them.
    """
    y = np.array(y0, dtype=np.float64)
    n = y.size
    stepper = _Stepper(f, n, cfg.method)
    fy = f(y, np.empty(n))

    t_end = cfg.t_end
    samples = cfg.sample_times
    snap_tol = 1e-12 * t_end
    diag = StepDiagnostics()
    times, states, counts = [], [], []

    def emit(ts, state):
        state = np.array(state)
        if np.any(state < -cfg.neg_floor):
            raise AssertionError("negative sample escaped the policy")
        clamp_small_negatives(state, cfg.neg_floor)
        times.append(ts)
        states.append(state)
        counts.append((diag.accepted, diag.rejected))

    si = 0
    while si < len(samples) and samples[si] <= snap_tol:
        emit(samples[si], y)
        si += 1

    fixed = cfg.fixed_step
    if fixed is not None:
        h = fixed
        n_fixed = max(1, math.ceil(t_end / fixed - 1e-9))
    else:
        h = min(1e-3, cfg.rtol ** 0.2 / max(1.0, float(np.max(np.abs(fy))) if n else 1.0), t_end)
    h_min = 1e-15 * t_end
    t = 0.0

    while t < t_end and si < len(samples):
        if diag.accepted >= cfg.max_steps:
            raise HorizonError(f"max_steps={cfg.max_steps} exhausted at t={t:.6g}", t_reached=t)
        if fixed is not None:
            t_next = t_end if diag.accepted + 1 >= n_fixed else (diag.accepted + 1) * fixed
        else:
            t_next = t + h
            if t_next > t_end - snap_tol:
                t_next = t_end
        h_try = t_next - t
        y_new, f_new, err = stepper.step(y, fy, h_try)
        err_val = 0.0 if (err is None or fixed is not None) else error_norm(err, y, y_new, cfg.rtol, cfg.atol)
        decision = step_accept_policy(y_new, err_val, cfg)
        if decision is StepDecision.REJECT_HALVE:
            diag.rejected += 1
            if fixed is not None:
                raise StiffnessError(
                    f"fixed step {fixed} drives a component below -neg_floor at t={t:.6g}", t_reached=t
                )
            factor = 0.5 if not err_val > 1.0 else min(0.5, max(_MIN_FACTOR, _SAFETY * err_val ** -0.2))
            h = h_try * factor
            if h < h_min:
                raise StiffnessError(f"step size underflow (h={h:.3g}) at t={t:.6g}", t_reached=t)
            continue
        if clamp_small_negatives(y_new, cfg.neg_floor):
            f(y_new, f_new)
        diag.accepted += 1

        while si < len(samples) and samples[si] <= t_next + snap_tol:
            ts = samples[si]
            if abs(ts - t_next) <= snap_tol:
                emit(ts, y_new)
            else:
                ys = _hermite(y, fy, y_new, f_new, h_try, (ts - t) / h_try)
                if np.any(ys < -cfg.neg_floor):
                    ys = _solve_to(stepper, y, fy, ts - t, cfg)
                emit(ts, ys)
            si += 1

        t, y, fy = t_next, y_new, f_new
        if fixed is None and t_next < t_end:
            factor = _MAX_FACTOR if err_val == 0.0 else min(_MAX_FACTOR, max(_MIN_FACTOR, _SAFETY * err_val ** -0.2))
            h = h_try * factor
    return times, states, counts


def _trajectory(times, states, counts) -> Trajectory:
    n = states[0].size
    sizes = np.arange(1, n + 1, dtype=np.float64)
    mass0 = math.fsum(sizes * states[0])
    diags, worst = [], 0.0
    for state, (acc, rej) in zip(states, counts):
        mass = math.fsum(sizes * state)
        drift = abs(mass - mass0) / mass0 if mass0 > 0 else abs(mass - mass0)
        diags.append(SampleDiagnostics(
            mass=mass, mu0=math.fsum(state), step_count=acc,
            rejected_steps=rej, mass_drift=drift, min_component=float(state.min()),
        ))
    return Trajectory(np.array(times), [ClusterDistribution(s) for s in states], diags)


def _check_initial(initial: ClusterDistribution) -> np.ndarray:
    y = np.array(initial.psi, dtype=np.float64)
    if np.any(y < 0):
        raise ValidationError("initial data must be non-negative")
    return y


def integrate(kernel: KernelSpec, initial: ClusterDistribution, cfg: SolverConfig,
              backend: Optional[str] = None) -> Trajectory:
    """Advance ``initial`` to ``cfg.t_end`` and return states at ``cfg.sample_times``."""
    y = _check_initial(initial)
    f = make_rhs(kernel, y.size, backend)
    return _trajectory(*solve_system(f, y, cfg))


def integrate_pair(kernel: KernelSpec, first: ClusterDistribution, second: ClusterDistribution,
                   cfg: SolverConfig, backend: Optional[str] = None) -> tuple[Trajectory, Trajectory]:
    """Integrate two truncations as one stacked system under a single step controller.

    Both trajectories see the same step sequence, so their difference reflects
    the systems themselves rather than two independent error-control histories.
    """
    y1, y2 = _check_initial(first), _check_initial(second)
    n1 = y1.size
    f1 = make_rhs(kernel, n1, backend)
    f2 = make_rhs(kernel, y2.size, backend)

    def f(y, out):
        f1(y[:n1], out[:n1])
        f2(y[n1:], out[n1:])
        return out

    times, states, counts = solve_system(f, np.concatenate([y1, y2]), cfg)
    return (_trajectory(times, [s[:n1].copy() for s in states], counts),
            _trajectory(times, [s[n1:].copy() for s in states], counts))


def _solve_to(stepper: _Stepper, y0, f0, span, cfg: SolverConfig):
    """Integrate a short span with full step control; used when the dense
    interpolant undershoots zero between two accepted endpoints."""
    y, fy, done, h = y0, f0, 0.0, span
    while span - done > 1e-14 * span:
        h = min(h, span - done)
        y_new, f_new, err = stepper.step(y, fy, h)
        err_val = 0.0 if err is None else error_norm(err, y, y_new, cfg.rtol, cfg.atol)
        if step_accept_policy(y_new, err_val, cfg) is StepDecision.REJECT_HALVE:
            h *= 0.5
            if h < 1e-15 * cfg.t_end:
                raise StiffnessError("step size underflow while sampling", t_reached=None)
            continue
        if clamp_small_negatives(y_new, cfg.neg_floor):
            stepper.f(y_new, f_new)
        y, fy, done = y_new, f_new, done + h
    return y
