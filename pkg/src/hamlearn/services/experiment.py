"""End-to-end benchmark runs: data, fit, simulation, metrics and diagnostics."""

import logging
import math
import time
from contextlib import contextmanager
from functools import partial
from pathlib import Path
from typing import Iterator, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.integrate import trapezoid

from ..config import Settings
from ..errors import (
    ConfigError,
    DimensionError,
    EmptyDataError,
    IntegrationError,
    RankDeficiencyError,
    StageError,
)
from ..schemas.data import BurstSet, DataPairSet
from ..schemas.experiment import (
    ComparisonReport,
    ConvergenceStudy,
    ExperimentConfig,
    ExperimentReport,
    FilterComparison,
)
from ..schemas.phase import HamiltonianSystem, IntegratorConfig, Trajectory, VectorField
from .basis import TotalDegreeBasis, check_stability, kn_empirical, kn_estimate
from .diagnostics import alignment_offset, diagnose, symplectic_defect
from .dynamics import builtin_system, hamiltonian_deviation, integrate
from .files import read_trajectory_file
from .learner import HamiltonianModel, NonSPModel, assemble, fit_nonsp, solve
from .outputs import emit_comparison, emit_convergence, emit_outputs
from .pipeline import add_noise, assemble_pairs, generate_bursts
from .streams import DIAGNOSTICS_STREAM, rng_stream

logger = logging.getLogger(__name__)

RELATIVE_ERROR_FLOOR = 1e-12
ALIGNMENT_SAMPLES = 4096
DEFAULT_STEPS = (8e-3, 4e-3, 2e-3, 1e-3, 5e-4)


@contextmanager
def _stage(name: str, timings: dict[str, float]) -> Iterator[None]:
    """Tag any failure with the stage name and record the stage's wall time."""
    start = time.perf_counter()
    logger.info("stage %s", name)
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc
    finally:
        timings[name] = timings.get(name, 0.0) + time.perf_counter() - start
        logger.debug("stage %s took %.3fs", name, timings[name])


class TrainingRun(BaseModel):
    """Everything produced before evaluation from u0*."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    config: ExperimentConfig
    system: HamiltonianSystem
    basis: TotalDegreeBasis
    bursts: Union[BurstSet, list[Trajectory]]
    pairs: DataPairSet
    model: HamiltonianModel


def _simulate(
    field: VectorField, u0, integrator: IntegratorConfig, horizon: float
) -> tuple[Trajectory, Optional[float]]:
    """Integrate a learned field, keeping the prefix computed before a blow-up or exit from D."""
    try:
        return integrate(field, u0, integrator, horizon), None
    except IntegrationError as exc:
        logger.warning("learned trajectory diverged at t=%.6g", exc.time)
        return exc.trajectory, float(exc.time)


def relative_error(learned: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """|u~ - u| / max(|u|, floor) row by row."""
    n = learned.shape[0]
    norm = np.maximum(np.linalg.norm(truth[:n], axis=1), RELATIVE_ERROR_FLOOR)
    return np.linalg.norm(learned - truth[:n], axis=1) / norm


def deviation_norms(times: np.ndarray, deviation: np.ndarray) -> tuple[float, float, float]:
    """L-infinity, trapezoidal L2 and total variation of a deviation series."""
    linf = float(np.max(np.abs(deviation))) if deviation.size else 0.0
    l2 = math.sqrt(float(trapezoid(deviation**2, times))) if deviation.size > 1 else 0.0
    tv = float(np.sum(np.abs(np.diff(deviation))))
    return linf, l2, tv


def observed_orders(steps: Sequence[float], errors: Sequence[float]) -> list[Optional[float]]:
    """log(e_i / e_i+1) / log(tau_i / tau_i+1); None first and wherever an error is zero."""
    orders: list[Optional[float]] = [None]
    for (s0, e0), (s1, e1) in zip(zip(steps, errors), zip(steps[1:], errors[1:])):
        if e0 > 0 and e1 > 0:
            orders.append(math.log(e0 / e1) / math.log(s0 / s1))
        else:
            orders.append(None)
    return orders


class ExperimentService:
    """Runs configured experiments and writes their outputs."""

    def __init__(self, settings: Optional[Settings] = None):
        """Initialize the service.

        Args:
            settings: Process settings. If not provided, reads HAMLEARN_* env vars.
        """
        self.settings = settings or Settings.from_env()

    def prepare(self, cfg: ExperimentConfig) -> ExperimentConfig:
        """Apply process-level overrides that change results, so they enter the config hash."""
        if self.settings.fine_ratio is not None and self.settings.fine_ratio != cfg.fine_ratio:
            cfg = ExperimentConfig.model_validate(
                {**cfg.model_dump(), "fine_ratio": self.settings.fine_ratio}
            )
        return cfg

    def output_dir(self, cfg: ExperimentConfig) -> Path:
        return Path(cfg.output_dir or self.settings.output_dir)

    def train(self, cfg: ExperimentConfig, timings: dict[str, float]) -> TrainingRun:
        """Generate data, estimate derivatives and fit the Hamiltonian."""
        chunk = self.settings.chunk_size
        with _stage("generate", timings):
            system = builtin_system(cfg.system)
            box = system.default_domain
            if cfg.trajectory_file:
                bursts, _, _ = read_trajectory_file(cfg.trajectory_file)
                if not bursts:
                    raise EmptyDataError(f"{cfg.trajectory_file} holds no trajectories")
                if bursts[0].states.shape[1] != box.dims:
                    raise DimensionError(
                        f"{cfg.trajectory_file} has {bursts[0].states.shape[1]} state columns, "
                        f"{cfg.system} needs {box.dims}"
                    )
                logger.info("read %d trajectories from %s", len(bursts), cfg.trajectory_file)
            else:
                bursts = generate_bursts(system, cfg.burst_plan, box)
        with _stage("noise", timings):
            noisy = add_noise(bursts, cfg.noise, cfg.seed)
        with _stage("differentiate", timings):
            with_truth = cfg.report_tau or cfg.derivative_method == "exact"
            pairs = assemble_pairs(
                noisy,
                cfg.derivative_method,
                box=box,
                restrict_to_box=cfg.restrict_to_box,
                denoise=cfg.denoise,
                truth=system if with_truth else None,
            )
        with _stage("assemble", timings):
            basis = TotalDegreeBasis(cfg.degree, box, domain_policy=cfg.domain_policy)
            problem = assemble(pairs, basis, chunk)
        with _stage("solve", timings):
            model = solve(problem, cfg.solver_rel_tol)
        return TrainingRun(
            config=cfg, system=system, basis=basis, bursts=noisy, pairs=pairs, model=model
        )

    def _stability(self, run: TrainingRun):
        cfg, basis, pairs = run.config, run.basis, run.pairs
        if pairs.count <= 1:
            return None
        kn = kn_estimate(basis, cfg.kn_grid_points, True, cfg.seed, self.settings.chunk_size)
        try:
            kn_data = kn_empirical(basis, pairs.states, True, self.settings.chunk_size)
        except RankDeficiencyError as exc:
            logger.warning("empirical K_N unavailable: %s", exc)
            kn_data = None
        return check_stability(kn, pairs.count, cfg.stability_r, basis.dim_v, kn_data)

    def evaluate(self, run: TrainingRun, timings: dict[str, float]) -> ExperimentReport:
        """Simulate truth and reconstruction from u0* and compute every metric."""
        cfg, system, model = run.config, run.system, run.model
        with _stage("simulate", timings):
            truth = integrate(
                system.rhs,
                cfg.test_initial_state,
                cfg.integrator,
                cfg.horizon,
                substeps=cfg.truth_substeps,
            )
            learned, diverged_time = _simulate(
                model.field, cfg.test_initial_state, cfg.integrator, cfg.horizon
            )
            n = len(learned)
            domain = run.basis.domain
            rng = rng_stream(cfg.seed, DIAGNOSTICS_STREAM)
            samples = rng.uniform(
                domain.lower_array, domain.upper_array, size=(ALIGNMENT_SAMPLES, domain.dims)
            )
            offset = alignment_offset(model, system.hamiltonian, samples)
            deviation = [v for _, v in hamiltonian_deviation(learned, model.evaluate)]
        diagnostics = stability = None
        if cfg.diagnostics:
            with _stage("diagnose", timings):
                diagnostics = diagnose(
                    model,
                    run.pairs,
                    system,
                    quadrature_points=cfg.gauss_points,
                    defect_samples=cfg.defect_samples,
                    stability_r=cfg.stability_r,
                    seed=cfg.seed,
                    chunk_size=self.settings.chunk_size,
                )
                stability = self._stability(run)
        return ExperimentReport(
            config=cfg,
            times=learned.times.tolist(),
            relative_error=relative_error(learned.states, truth.states).tolist(),
            hamiltonian_true=np.asarray(system.hamiltonian(truth.states[:n])).tolist(),
            hamiltonian_learned=(model.evaluate(learned.states) + offset).tolist(),
            deviation=deviation,
            diverged=diverged_time is not None,
            diverged_time=diverged_time,
            pair_count=run.pairs.count,
            pair_provenance=run.pairs.provenance,
            tau_bound=run.pairs.tau_bound if cfg.report_tau else None,
            alignment_constant=offset,
            diagnostics=diagnostics,
            stability=stability,
            model=model.to_record(),
            truth_states=truth.states.tolist(),
            learned_states=learned.states.tolist(),
            timings=timings,
        )

    def _emit(self, writer, payload, cfg: ExperimentConfig, timings: dict[str, float]):
        with _stage("emit", timings):
            paths = writer(payload, self.output_dir(cfg))
        logger.info("wrote %s", ", ".join(str(p) for p in paths))
        return paths

    def run(self, cfg: ExperimentConfig, emit: bool = True) -> ExperimentReport:
        """Generate, fit, simulate, measure and (optionally) write outputs."""
        cfg = self.prepare(cfg)
        timings: dict[str, float] = {}
        run = self.train(cfg, timings)
        report = self.evaluate(run, timings)
        if emit:
            pairs = run.pairs if cfg.emit_pairs else None
            self._emit(partial(emit_outputs, pairs=pairs), report, cfg, timings)
        logger.info(
            "run %s finished: mean relative error %.3g", cfg.system, report.mean_relative_error
        )
        return report

    def compare(self, cfg: ExperimentConfig, emit: bool = True) -> ComparisonReport:
        """Fit the SP model and the non-SP baseline on identical data and simulate both."""
        if not cfg.baseline_nonsp:
            raise ConfigError("the non-SP comparison is disabled (baseline_nonsp = false)")
        cfg = self.prepare(cfg)
        timings: dict[str, float] = {}
        run = self.train(cfg, timings)
        report = self.evaluate(run, timings)
        with _stage("baseline", timings):
            baseline: NonSPModel = fit_nonsp(
                run.pairs, run.basis, cfg.solver_rel_tol, self.settings.chunk_size
            )
            nonsp, nonsp_diverged_time = _simulate(
                baseline.field, cfg.test_initial_state, cfg.integrator, cfg.horizon
            )
            truth = np.asarray(report.truth_states)
            box = run.basis.domain
            comparison = ComparisonReport(
                sp=report,
                nonsp_relative_error=relative_error(nonsp.states, truth).tolist(),
                nonsp_diverged=nonsp_diverged_time is not None,
                nonsp_diverged_time=nonsp_diverged_time,
                sp_symplectic_defect=symplectic_defect(
                    run.model.field, box, cfg.defect_samples, cfg.seed
                ),
                nonsp_symplectic_defect=symplectic_defect(
                    baseline.field, box, cfg.defect_samples, cfg.seed
                ),
                nonsp_model=baseline.to_record(),
                nonsp_states=nonsp.states.tolist(),
            )
        if emit:
            self._emit(emit_comparison, comparison, cfg, timings)
        return comparison

    def compare_filter(self, cfg: ExperimentConfig, emit: bool = False) -> FilterComparison:
        """The same noisy data fitted with and without replacing states by the de-noising fit."""
        if cfg.derivative_method != "lsfit":
            raise ConfigError("the filter comparison needs derivative_method = 'lsfit'")
        base = cfg.model_dump()
        filtered = ExperimentConfig.model_validate({**base, "apply_filter": True})
        unfiltered = ExperimentConfig.model_validate({**base, "apply_filter": False})
        return FilterComparison(
            filtered=self.run(filtered, emit=emit),
            unfiltered=self.run(unfiltered, emit=emit),
        )

    def converge(
        self,
        cfg: ExperimentConfig,
        steps: Sequence[float] = DEFAULT_STEPS,
        emit: bool = True,
    ) -> ConvergenceStudy:
        """Hamiltonian deviation norms of the learned model over decreasing RK4 steps."""
        steps = [float(s) for s in steps]
        if not steps or any(s <= 0 for s in steps):
            raise ConfigError("steps must be positive")
        if any(b >= a for a, b in zip(steps, steps[1:])):
            raise ConfigError("steps must be strictly decreasing")
        cfg = self.prepare(cfg)
        timings: dict[str, float] = {}
        model = self.train(cfg, timings).model
        linf, l2, tv = [], [], []
        with _stage("simulate", timings):
            for tau in steps:
                integrator = IntegratorConfig(step=tau)
                traj = integrate(model.field, cfg.test_initial_state, integrator, cfg.horizon)
                deviation = np.array([v for _, v in hamiltonian_deviation(traj, model.evaluate)])
                norms = deviation_norms(traj.times, deviation)
                linf.append(norms[0])
                l2.append(norms[1])
                tv.append(norms[2])
                logger.info("tau=%.3g: max |dH| = %.4g", tau, norms[0])
        study = ConvergenceStudy(
            system=cfg.system,
            model_digest=model.provenance_digest,
            steps=steps,
            linf=linf,
            l2=l2,
            total_variation=tv,
            linf_order=observed_orders(steps, linf),
            l2_order=observed_orders(steps, l2),
            total_variation_order=observed_orders(steps, tv),
        )
        if emit:
            self._emit(emit_convergence, (cfg, study), cfg, timings)
        return study


def run_experiment(
    cfg: ExperimentConfig, settings: Optional[Settings] = None, emit: bool = True
) -> ExperimentReport:
    return ExperimentService(settings).run(cfg, emit=emit)


def run_convergence_study(
    cfg: ExperimentConfig,
    steps: Sequence[float] = DEFAULT_STEPS,
    settings: Optional[Settings] = None,
    emit: bool = True,
) -> ConvergenceStudy:
    return ExperimentService(settings).converge(cfg, steps, emit=emit)


def run_nonsp_comparison(
    cfg: ExperimentConfig, settings: Optional[Settings] = None, emit: bool = True
) -> ComparisonReport:
    return ExperimentService(settings).compare(cfg, emit=emit)


def run_filter_comparison(
    cfg: ExperimentConfig, settings: Optional[Settings] = None, emit: bool = False
) -> FilterComparison:
    return ExperimentService(settings).compare_filter(cfg, emit=emit)
