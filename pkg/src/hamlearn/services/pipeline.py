"""Synthetic burst generation, noise, derivative estimation and pair assembly."""

import hashlib
import logging
from typing import Optional, Sequence, Union

import numpy as np

from ..errors import ArgumentError, DimensionError, EmptyDataError
from ..schemas.basis import DomainBox
from ..schemas.data import (
    BurstPlan,
    BurstSet,
    DataPairSet,
    DenoiseConfig,
    DerivativeMethod,
    NoiseSpec,
    PairProvenance,
)
from ..schemas.phase import HamiltonianSystem, Trajectory, VectorField
from .basis import legendre_table
from .streams import INITIAL_STATE_STREAM, NOISE_STREAM, rng_stream

logger = logging.getLogger(__name__)

Bursts = Union[BurstSet, Sequence[Trajectory]]


def sample_initial_states(plan: BurstPlan, box: DomainBox) -> np.ndarray:
    """M i.i.d. uniform draws from the box, shape (M, dims); fixed by plan.seed."""
    rng = rng_stream(plan.seed, INITIAL_STATE_STREAM)
    return rng.uniform(box.lower_array, box.upper_array, size=(plan.trajectories, box.dims))


def _rk4_batch(rhs: VectorField, x: np.ndarray, h: float) -> np.ndarray:
    half = 0.5 * h
    k1 = rhs(x)
    k2 = rhs(x + half * k1)
    k3 = rhs(x + half * k2)
    k4 = rhs(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def generate_bursts(
    system: HamiltonianSystem,
    plan: BurstPlan,
    box: DomainBox,
    initial_states: Optional[np.ndarray] = None,
) -> BurstSet:
    """Integrate M short trajectories with RK4 at substep dt / fine_ratio.

    Every fine_ratio-th substep is recorded, so each burst holds
    steps_per_burst + 1 samples spaced dt apart. All bursts advance together
    as one (M, 2d) batch. Bursts that blow up are dropped and listed in
    ``dropped``; bursts that leave the box are kept and listed in ``exited``.
    """
    if box.dim_d != system.dim_d:
        raise DimensionError(f"box has dimension {box.dims}, system needs {2 * system.dim_d}")
    if initial_states is None:
        initial_states = sample_initial_states(plan, box)
    x = np.array(initial_states, dtype=float)
    if x.ndim != 2 or x.shape[1] != box.dims:
        raise DimensionError(f"initial states must have shape (M, {box.dims})")
    m = x.shape[0]
    samples = plan.steps_per_burst + 1
    states = np.empty((m, samples, box.dims))
    states[:, 0] = x
    h = plan.substep
    with np.errstate(all="ignore"):
        for j in range(1, samples):
            for _ in range(plan.fine_ratio):
                x = _rk4_batch(system.rhs, x, h)
            states[:, j] = x
    finite = np.all(np.isfinite(states), axis=(1, 2))
    ids = np.arange(m)
    dropped = tuple(int(i) for i in ids[~finite])
    if dropped:
        logger.warning("dropped %d of %d bursts after non-finite states", len(dropped), m)
    inside = np.all(box.contains(states), axis=1)
    exited = tuple(int(i) for i in ids[finite & ~inside])
    if exited:
        logger.warning("%d bursts left the domain and are kept", len(exited))
    times = np.arange(samples, dtype=float) * plan.dt
    return BurstSet(
        times=times,
        states=states[finite],
        trajectory_ids=ids[finite],
        dropped=dropped,
        exited=exited,
    )


def _noisy(states: np.ndarray, spec: NoiseSpec, rng: np.random.Generator) -> np.ndarray:
    eta = rng.uniform(-spec.amplitude, spec.amplitude, size=states.shape)
    return states * (1.0 + eta)


def add_noise(bursts, spec: NoiseSpec, seed: int):
    """Multiply every state entry by (1 + eta), eta ~ U[-amplitude, amplitude].

    Accepts a Trajectory, a list of trajectories or a BurstSet and returns
    the same type. Zero amplitude returns the input unchanged.
    """
    if spec.amplitude == 0:
        return bursts
    rng = rng_stream(seed, NOISE_STREAM)
    if isinstance(bursts, Trajectory):
        return Trajectory(times=bursts.times, states=_noisy(bursts.states, spec, rng))
    if isinstance(bursts, list):
        return [Trajectory(times=t.times, states=_noisy(t.states, spec, rng)) for t in bursts]
    return bursts.with_states(_noisy(bursts.states, spec, rng))


def _uniform_spacing(times: np.ndarray) -> float:
    if times.shape[0] < 3:
        raise ArgumentError("central differences need at least three samples")
    steps = np.diff(times)
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
        raise ArgumentError("central differences need uniformly spaced samples")
    return float(steps[0])


def central_diff_array(times, states) -> np.ndarray:
    """Second-order differences along the sample axis of (..., S, dims) states."""
    times = np.asarray(times, dtype=float)
    x = np.asarray(states, dtype=float)
    dt = _uniform_spacing(times)
    out = np.empty_like(x)
    out[..., 1:-1, :] = (x[..., 2:, :] - x[..., :-2, :]) / (2.0 * dt)
    out[..., 0, :] = (-3.0 * x[..., 0, :] + 4.0 * x[..., 1, :] - x[..., 2, :]) / (2.0 * dt)
    out[..., -1, :] = (3.0 * x[..., -1, :] - 4.0 * x[..., -2, :] + x[..., -3, :]) / (2.0 * dt)
    return out


def central_diff(traj: Trajectory) -> np.ndarray:
    """Time derivatives of a uniformly sampled trajectory, shape (S, 2d)."""
    return central_diff_array(traj.times, traj.states)


def lsfit_arrays(times, states, cfg: DenoiseConfig) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares Legendre-in-time fit of (..., S, dims) states on shared times.

    Returns fitted values and analytic derivatives at the sample times.
    """
    times = np.asarray(times, dtype=float)
    x = np.asarray(states, dtype=float)
    if times.shape[0] < cfg.degree + 1:
        raise ArgumentError(
            f"degree {cfg.degree} fit needs at least {cfg.degree + 1} samples, got {times.shape[0]}"
        )
    span = times[-1] - times[0]
    if not span > 0:
        raise ArgumentError("fit times must span a positive interval")
    tau = 2.0 * (times - times[0]) / span - 1.0
    design, ddesign = legendre_table(cfg.degree, tau)
    if np.linalg.matrix_rank(design) < cfg.degree + 1:
        raise ArgumentError("rank-deficient time fit (repeated sample times?)")
    coeffs = np.einsum("ks,...sd->...kd", np.linalg.pinv(design), x)
    fitted = np.einsum("sk,...kd->...sd", design, coeffs)
    derivs = np.einsum("sk,...kd->...sd", ddesign, coeffs) * (2.0 / span)
    return fitted, derivs


def lsfit_denoise(traj: Trajectory, cfg: DenoiseConfig) -> tuple[Trajectory, np.ndarray]:
    """De-noise one burst; states are replaced by the fit only when cfg.apply_filter."""
    fitted, derivs = lsfit_arrays(traj.times, traj.states, cfg)
    filtered = Trajectory(times=traj.times, states=fitted) if cfg.apply_filter else traj
    return filtered, derivs


def _pair_group(
    times: np.ndarray,
    states: np.ndarray,
    method: DerivativeMethod,
    denoise: Optional[DenoiseConfig],
    truth: Optional[HamiltonianSystem],
) -> tuple[np.ndarray, np.ndarray]:
    if method == "central_diff":
        return states, central_diff_array(times, states)
    if method == "lsfit":
        cfg = denoise or DenoiseConfig()
        fitted, derivs = lsfit_arrays(times, states, cfg)
        return (fitted if cfg.apply_filter else states), derivs
    if method == "exact":
        if truth is None:
            raise ArgumentError("exact derivatives need the true system")
        return states, np.asarray(truth.rhs(states), dtype=float)
    raise ArgumentError(f"unknown derivative method {method!r}")


def pair_digest(states: np.ndarray, derivatives: np.ndarray) -> str:
    """SHA-256 over the little-endian float64 bytes of both pair arrays."""
    digest = hashlib.sha256()
    for arr in (states, derivatives):
        digest.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return digest.hexdigest()


def assemble_pairs(
    bursts: Bursts,
    method: DerivativeMethod,
    box: Optional[DomainBox] = None,
    restrict_to_box: bool = False,
    denoise: Optional[DenoiseConfig] = None,
    truth: Optional[HamiltonianSystem] = None,
) -> DataPairSet:
    """Flatten bursts into (x_k, xdot_k) pairs in burst order, then sample order.

    Args:
        bursts: A BurstSet or a list of trajectories (times may differ per trajectory)
        method: central_diff, lsfit or exact
        box: Domain used for restriction
        restrict_to_box: Drop pairs whose state lies outside box
        denoise: Fit settings for lsfit
        truth: True system; enables exact derivatives and the tau_bound measurement

    Raises:
        EmptyDataError: If no pair remains
    """
    if restrict_to_box and box is None:
        raise ArgumentError("restrict_to_box needs a box")
    dropped: list[int] = []
    exited: list[int] = []
    if isinstance(bursts, BurstSet):
        if len(bursts) == 0:
            raise EmptyDataError("no bursts to pair")
        x, xdot = _pair_group(bursts.times, bursts.states, method, denoise, truth)
        count, samples = bursts.states.shape[:2]
        states = x.reshape(-1, bursts.dims)
        derivatives = xdot.reshape(-1, bursts.dims)
        ids = np.repeat(bursts.trajectory_ids, samples)
        times = np.tile(bursts.times, count)
        dropped, exited = list(bursts.dropped), list(bursts.exited)
    else:
        if not bursts:
            raise EmptyDataError("no bursts to pair")
        groups = [_pair_group(t.times, t.states, method, denoise, truth) for t in bursts]
        states = np.concatenate([g[0] for g in groups])
        derivatives = np.concatenate([g[1] for g in groups])
        ids = np.concatenate([np.full(len(t), m) for m, t in enumerate(bursts)])
        times = np.concatenate([t.times for t in bursts])
        lengths = {len(t) for t in bursts}
        count, samples = len(bursts), (lengths.pop() if len(lengths) == 1 else 0)
    removed = 0
    if restrict_to_box:
        keep = box.contains(states)
        removed = int(np.count_nonzero(~keep))
        states, derivatives, ids, times = states[keep], derivatives[keep], ids[keep], times[keep]
    if states.shape[0] == 0:
        raise EmptyDataError("no data pairs remain after restriction to the domain")
    tau_bound = None
    if truth is not None:
        residual = derivatives - np.asarray(truth.rhs(states), dtype=float)
        tau_bound = float(np.max(np.linalg.norm(residual, axis=1)))
    provenance = PairProvenance(
        method=method,
        bursts=count,
        samples_per_burst=samples,
        dropped_bursts=dropped,
        exited_bursts=exited,
        restricted=restrict_to_box,
        removed_outside=removed,
        digest=pair_digest(states, derivatives),
    )
    logger.debug("assembled %d pairs from %d bursts (%s)", states.shape[0], count, method)
    return DataPairSet(
        states=states,
        derivatives=derivatives,
        trajectory_ids=ids,
        times=times,
        tau_bound=tau_bound,
        provenance=provenance,
    )
