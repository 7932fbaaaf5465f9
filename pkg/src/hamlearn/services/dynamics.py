"""Symplectic matrix action, fixed-step RK4 and the builtin Hamiltonian systems."""

import logging
import math
from typing import Callable, Optional, Union

import numpy as np

from ..errors import (
    ArgumentError,
    DimensionError,
    DomainError,
    IntegrationError,
    UnknownSystemError,
)
from ..schemas.basis import DomainBox
from ..schemas.phase import (
    HamiltonianSystem,
    IntegratorConfig,
    ScalarField,
    StateVector,
    Trajectory,
    VectorField,
)

logger = logging.getLogger(__name__)


def _phase_array(values, name: str, dims: Optional[int] = None) -> np.ndarray:
    if isinstance(values, StateVector):
        values = values.values
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] == 0 or arr.shape[-1] % 2:
        raise DimensionError(f"{name} must have an even, positive last dimension")
    if dims is not None and arr.shape[-1] != dims:
        raise DimensionError(f"{name} has {arr.shape[-1]} entries, expected {dims}")
    return arr


def apply_j(xdot, dims: Optional[int] = None) -> np.ndarray:
    """Return J xdot with J = [[0, I], [-I, 0]], i.e. (qdot, -pdot).

    Works on the last axis, so stacks of vectors are transformed at once.
    """
    x = _phase_array(xdot, "xdot", dims)
    d = x.shape[-1] // 2
    return np.concatenate([x[..., d:], -x[..., :d]], axis=-1)


def apply_j_inverse(grad, dims: Optional[int] = None) -> np.ndarray:
    """Return J^{-1} grad = (-grad_q, grad_p)."""
    g = _phase_array(grad, "grad", dims)
    d = g.shape[-1] // 2
    return np.concatenate([-g[..., d:], g[..., :d]], axis=-1)


def _evaluate(
    rhs: VectorField, u: np.ndarray, time: float, step_index: Optional[int]
) -> np.ndarray:
    try:
        k = np.asarray(rhs(u), dtype=float)
    except DomainError as exc:
        raise IntegrationError(f"vector field left its domain: {exc}", time, step_index) from exc
    if not np.all(np.isfinite(k)):
        raise IntegrationError("non-finite stage evaluation", time, step_index)
    return k


def rk4_step(
    rhs: VectorField,
    u,
    step: float,
    time: float = 0.0,
    step_index: Optional[int] = None,
) -> np.ndarray:
    """Advance u by one classical fourth-order Runge-Kutta step.

    Args:
        rhs: Autonomous vector field, vectorised over leading axes
        u: Current state (or a stack of states)
        step: Time step tau
        time: Time of u, only used in error messages
        step_index: Step counter, only used in error messages

    Returns:
        The state after one step

    Raises:
        IntegrationError: A stage evaluation was non-finite or left the field's domain
    """
    if not step > 0:
        raise ArgumentError("step must be positive")
    x = _phase_array(u, "u")
    half = 0.5 * step
    k1 = _evaluate(rhs, x, time, step_index)
    k2 = _evaluate(rhs, x + half * k1, time + half, step_index)
    k3 = _evaluate(rhs, x + half * k2, time + half, step_index)
    k4 = _evaluate(rhs, x + step * k3, time + step, step_index)
    out = x + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise IntegrationError("non-finite state", time + step, step_index)
    return out


def step_count(step: float, horizon: float) -> int:
    """Number of fixed steps so that the final time is >= horizon - step / 2."""
    if not step > 0:
        raise ArgumentError("step must be positive")
    if horizon < 0:
        raise ArgumentError("horizon must be nonnegative")
    ratio = horizon / step
    if not math.isfinite(ratio):
        raise ArgumentError("horizon / step is not finite")
    return max(0, math.ceil(ratio - 0.5))


def integrate(
    rhs: VectorField,
    u0,
    step: Union[float, IntegratorConfig],
    horizon: float,
    substeps: int = 1,
) -> Trajectory:
    """Integrate du/dt = rhs(u) from t=0 with fixed RK4 steps.

    ``step`` is a plain tau or an IntegratorConfig.

    Samples are recorded every ``step``; each recorded step is split into
    ``substeps`` RK4 substeps of size step / substeps, which gives a finer
    reference solution on the same time grid.

    Raises:
        IntegrationError: With the failing step index and the partial trajectory
    """
    if isinstance(step, IntegratorConfig):
        step = step.step
    if substeps < 1:
        raise ArgumentError("substeps must be at least 1")
    x = _phase_array(u0, "u0")
    if x.ndim != 1:
        raise DimensionError("u0 must be a single state")
    if not np.all(np.isfinite(x)):
        raise ArgumentError("u0 entries must be finite")
    n = step_count(step, horizon)
    times = np.arange(n + 1, dtype=float) * step
    states = np.empty((n + 1, x.shape[0]))
    states[0] = x
    h = step / substeps
    for i in range(n):
        try:
            for s in range(substeps):
                x = rk4_step(rhs, x, h, time=times[i] + s * h, step_index=i)
        except IntegrationError as exc:
            logger.debug("integration stopped at step %d (t=%.6g)", i, exc.time)
            partial = Trajectory(times=times[: i + 1], states=states[: i + 1])
            raise IntegrationError(
                "integration failed", exc.time, step_index=i, trajectory=partial
            ) from exc
        states[i + 1] = x
    return Trajectory(times=times, states=states)


def hamiltonian_deviation(traj: Trajectory, h: ScalarField) -> list[tuple[float, float]]:
    """Pairs (t, H(u(t)) - H(u(t0))) along a trajectory; the first entry is exactly 0."""
    if len(traj) == 0:
        raise ArgumentError("trajectory must not be empty")
    values = np.asarray(h(traj.states), dtype=float)
    deviation = values - values[0]
    deviation[0] = 0.0
    return [(float(t), float(v)) for t, v in zip(traj.times, deviation)]


# Builtin systems. Every callable maps (..., 2d) to (...) or (..., 2d).


def _pendulum(length: float = 1.0, gravity: float = 9.8) -> HamiltonianSystem:
    def hamiltonian(x):
        p, q = x[..., 0], x[..., 1]
        return p**2 / (2.0 * length**2) + gravity * length * (1.0 - np.cos(q))

    def rhs(x):
        p, q = x[..., 0], x[..., 1]
        return np.stack([-gravity * length * np.sin(q), p / length**2], axis=-1)

    return HamiltonianSystem(
        name="pendulum",
        dim_d=1,
        hamiltonian=hamiltonian,
        rhs=rhs,
        default_domain=DomainBox(lower=(-2 * math.pi, -math.pi), upper=(2 * math.pi, math.pi)),
        parameters={"length": length, "gravity": gravity},
    )


def _exp_quartic(alpha1: float = 1.0, alpha2: float = 1.1) -> HamiltonianSystem:
    def hamiltonian(x):
        p, q = x[..., 0], x[..., 1]
        return np.exp(-alpha1 * p**2 - alpha2 * q**4)

    def rhs(x):
        p, q = x[..., 0], x[..., 1]
        e = np.exp(-alpha1 * p**2 - alpha2 * q**4)
        return np.stack([4.0 * alpha2 * q**3 * e, -2.0 * alpha1 * p * e], axis=-1)

    return HamiltonianSystem(
        name="exp_quartic",
        dim_d=1,
        hamiltonian=hamiltonian,
        rhs=rhs,
        default_domain=DomainBox.cube(-1.0, 1.0, 2),
        parameters={"alpha1": alpha1, "alpha2": alpha2},
    )


def _henon_heiles() -> HamiltonianSystem:
    def hamiltonian(x):
        p1, p2, q1, q2 = (x[..., i] for i in range(4))
        return 0.5 * (p1**2 + p2**2) + 0.5 * (q1**2 + q2**2) + q1**2 * q2 - q2**3 / 3.0

    def rhs(x):
        p1, p2, q1, q2 = (x[..., i] for i in range(4))
        return np.stack([-q1 - 2.0 * q1 * q2, -q2 - q1**2 + q2**2, p1, p2], axis=-1)

    return HamiltonianSystem(
        name="henon_heiles",
        dim_d=2,
        hamiltonian=hamiltonian,
        rhs=rhs,
        default_domain=DomainBox.cube(-1.0, 1.0, 4),
    )


def _cherry() -> HamiltonianSystem:
    def hamiltonian(x):
        p1, p2, q1, q2 = (x[..., i] for i in range(4))
        return (
            0.5 * (q1**2 + p1**2)
            - (q2**2 + p2**2)
            + 0.5 * p2 * (p1**2 - q1**2)
            - q1 * q2 * p1
        )

    def rhs(x):
        p1, p2, q1, q2 = (x[..., i] for i in range(4))
        return np.stack(
            [
                -q1 + p2 * q1 + q2 * p1,
                2.0 * q2 + q1 * p1,
                p1 + p2 * p1 - q1 * q2,
                -2.0 * p2 + 0.5 * (p1**2 - q1**2),
            ],
            axis=-1,
        )

    return HamiltonianSystem(
        name="cherry",
        dim_d=2,
        hamiltonian=hamiltonian,
        rhs=rhs,
        default_domain=DomainBox(lower=(-2.0, -1.0, -2.0, -1.0), upper=(2.0, 2.0, 1.0, 1.0)),
    )


def _double_pendulum(
    m1: float = 1.0,
    m2: float = 1.0,
    l1: float = 1.0,
    l2: float = 1.0,
    gravity: float = 9.8,
) -> HamiltonianSystem:
    def kinetic_numerator(p1, p2, delta):
        return (
            m2 * l2**2 * p1**2
            + (m1 + m2) * l1**2 * p2**2
            - 2.0 * m2 * l1 * l2 * p1 * p2 * np.cos(delta)
        )

    def coupling(delta):
        return m1 + m2 * np.sin(delta) ** 2

    def c1(p1, p2, delta):
        return p1 * p2 * np.sin(delta) / (l1 * l2 * coupling(delta))

    def c2(p1, p2, delta):
        # squared denominator: this is the form consistent with -dH/dq
        return kinetic_numerator(p1, p2, delta) / (2.0 * l1**2 * l2**2 * coupling(delta) ** 2)

    def hamiltonian(x):
        p1, p2, q1, q2 = (x[..., i] for i in range(4))
        delta = q1 - q2
        kinetic = kinetic_numerator(p1, p2, delta) / (
            2.0 * m2 * l1**2 * l2**2 * coupling(delta)
        )
        return kinetic - (m1 + m2) * gravity * l1 * np.cos(q1) - m2 * gravity * l2 * np.cos(q2)

    def rhs(x):
        p1, p2, q1, q2 = (x[..., i] for i in range(4))
        delta = q1 - q2
        s = coupling(delta)
        a = c1(p1, p2, delta)
        b = c2(p1, p2, delta) * np.sin(2.0 * delta)
        return np.stack(
            [
                -(m1 + m2) * gravity * l1 * np.sin(q1) - a + b,
                -m2 * gravity * l2 * np.sin(q2) + a - b,
                (l2 * p1 - l1 * p2 * np.cos(delta)) / (l1**2 * l2 * s),
                (-m2 * l2 * p1 * np.cos(delta) + (m1 + m2) * l1 * p2) / (m2 * l1 * l2**2 * s),
            ],
            axis=-1,
        )

    return HamiltonianSystem(
        name="double_pendulum",
        dim_d=2,
        hamiltonian=hamiltonian,
        rhs=rhs,
        default_domain=DomainBox(lower=(-5.0, -4.0, -1.0, -1.0), upper=(5.0, 4.0, 1.0, 1.0)),
        parameters={"m1": m1, "m2": m2, "l1": l1, "l2": l2, "gravity": gravity},
    )


def _harmonic_oscillator() -> HamiltonianSystem:
    def hamiltonian(x):
        return 0.5 * (x[..., 0] ** 2 + x[..., 1] ** 2)

    def rhs(x):
        return np.stack([-x[..., 1], x[..., 0]], axis=-1)

    return HamiltonianSystem(
        name="harmonic_oscillator",
        dim_d=1,
        hamiltonian=hamiltonian,
        rhs=rhs,
        default_domain=DomainBox.cube(-1.0, 1.0, 2),
    )


BUILTIN_SYSTEMS: dict[str, Callable[[], HamiltonianSystem]] = {
    "pendulum": _pendulum,
    "exp_quartic": _exp_quartic,
    "henon_heiles": _henon_heiles,
    "cherry": _cherry,
    "double_pendulum": _double_pendulum,
    "harmonic_oscillator": _harmonic_oscillator,
}


def builtin_system(name: str) -> HamiltonianSystem:
    """Look up a builtin benchmark system by name.

    Raises:
        UnknownSystemError: If the name is not registered
    """
    try:
        factory = BUILTIN_SYSTEMS[name]
    except KeyError:
        raise UnknownSystemError(name, sorted(BUILTIN_SYSTEMS)) from None
    return factory()


def system_gradient(system: HamiltonianSystem) -> VectorField:
    """grad H of a system, recovered as J rhs."""

    def gradient(x):
        return apply_j(system.rhs(np.asarray(x, dtype=float)))

    return gradient
