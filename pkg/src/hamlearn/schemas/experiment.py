"""Pydantic schemas for experiment configuration and reports."""

import hashlib
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.integrate import trapezoid

from .basis import DomainPolicy, StabilityDiagnostic
from .data import BurstPlan, DenoiseConfig, DerivativeMethod, NoiseSpec, PairProvenance
from .model import DiagnosticsReport, ModelRecord, dense_gauss_points
from .phase import IntegratorConfig


class ExperimentConfig(BaseModel):
    """Flat, declarative description of one benchmark run.

    Defaults reproduce the pendulum benchmark.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    system: str = Field(default="pendulum", description="Builtin system name")
    degree: int = Field(default=6, ge=1, description="Total polynomial degree n")
    trajectories: int = Field(default=500, ge=1, description="Number of bursts M")
    steps_per_burst: int = Field(default=40, ge=1, description="Intervals per burst")
    dt: float = Field(default=0.01, gt=0, description="Observation spacing")
    fine_ratio: int = Field(default=10_000, ge=1, description="Reference substeps per interval")
    noise_amplitude: float = Field(default=0.08, ge=0, description="Relative noise level")
    derivative_method: DerivativeMethod = Field(default="lsfit", description="Derivative estimator")
    denoise_degree: int = Field(default=5, ge=1, description="De-noising polynomial degree Q")
    apply_filter: bool = Field(default=True, description="Replace states by the de-noising fit")
    test_initial_state: list[float] = Field(
        default_factory=lambda: [-3.876, -1.193], description="Evaluation initial state u0*"
    )
    horizon: float = Field(default=20.0, ge=0, description="Evaluation horizon T")
    eval_step: float = Field(default=1e-3, gt=0, description="RK4 step tau for evaluation runs")
    truth_substeps: int = Field(
        default=1, ge=1, description="Reference substeps per tau for the true system"
    )
    seed: int = Field(default=0, ge=0, description="Root random seed")
    baseline_nonsp: bool = Field(default=True, description="Also fit the non-SP baseline")
    baseline_no_filter: bool = Field(default=False, description="Also run without de-noising")
    stability_r: float = Field(default=1.0, gt=0, description="Exponent r of the stability check")
    output_dir: Optional[str] = Field(default=None, description="Directory for emitted files")
    domain_policy: DomainPolicy = Field(
        default="strict", description="Basis behaviour for points outside D"
    )
    restrict_to_box: bool = Field(default=True, description="Drop pairs outside D")
    trajectory_file: Optional[str] = Field(
        default=None, description="Trajectory file used as data instead of generated bursts"
    )
    emit_pairs: bool = Field(default=False, description="Also write the training pairs")
    report_tau: bool = Field(default=False, description="Measure tau_inf against the truth")
    diagnostics: bool = Field(default=True, description="Compute the diagnostics report")
    kn_grid_points: int = Field(default=21, ge=2, description="Grid points per axis for K_N")
    quadrature_points: Optional[int] = Field(
        default=None, ge=1, description="Gauss points per axis for L2 diagnostics"
    )
    defect_samples: int = Field(default=200, ge=1, description="Points for the symplecticity test")
    solver_rel_tol: float = Field(default=1e-10, gt=0, description="Eigenvalue cutoff ratio")

    @model_validator(mode="after")
    def _check_against_system(self) -> "ExperimentConfig":
        from ..services.dynamics import builtin_system

        try:
            system = builtin_system(self.system)
        except KeyError as exc:
            raise ValueError(str(exc)) from exc
        if len(self.test_initial_state) != 2 * system.dim_d:
            raise ValueError(
                f"test_initial_state needs {2 * system.dim_d} entries for {self.system}"
            )
        if self.derivative_method == "central_diff" and self.steps_per_burst < 2:
            raise ValueError("central differences need steps_per_burst >= 2")
        if self.derivative_method == "lsfit" and self.denoise_degree > self.steps_per_burst:
            raise ValueError("denoise_degree must not exceed steps_per_burst")
        return self

    @property
    def denoise(self) -> Optional[DenoiseConfig]:
        if self.derivative_method != "lsfit":
            return None
        return DenoiseConfig(degree=self.denoise_degree, apply_filter=self.apply_filter)

    @property
    def burst_plan(self) -> BurstPlan:
        return BurstPlan(
            trajectories=self.trajectories,
            steps_per_burst=self.steps_per_burst,
            dt=self.dt,
            fine_ratio=self.fine_ratio,
            seed=self.seed,
        )

    @property
    def noise(self) -> NoiseSpec:
        return NoiseSpec(amplitude=self.noise_amplitude)

    @property
    def integrator(self) -> IntegratorConfig:
        return IntegratorConfig(step=self.eval_step)

    @property
    def gauss_points(self) -> int:
        return self.quadrature_points or dense_gauss_points(self.degree)

    def config_hash(self) -> str:
        """Stable short hash of everything that influences results."""
        payload = self.model_dump_json(exclude={"output_dir"})
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]


def _time_average(times: list[float], values: list[float]) -> float:
    if len(times) < 2:
        return float(values[0]) if values else 0.0
    t = np.asarray(times)
    return float(trapezoid(values, t) / (t[-1] - t[0]))


class ExperimentReport(BaseModel):
    """Metrics of one learned model evaluated from u0*."""

    config: ExperimentConfig = Field(description="Configuration echo")
    times: list[float] = Field(description="Shared evaluation time grid")
    relative_error: list[float] = Field(description="|u~ - u| / |u| per time")
    hamiltonian_true: list[float] = Field(description="H(u(t))")
    hamiltonian_learned: list[float] = Field(description="H~0(u~(t)) + C_align")
    deviation: list[float] = Field(description="H~(u~(t)) - H~(u~(0))")
    diverged: bool = Field(default=False, description="Learned trajectory stopped early")
    diverged_time: Optional[float] = Field(default=None, description="Time of the failure")
    pair_count: int = Field(ge=0, description="Number of training pairs K")
    pair_provenance: PairProvenance = Field(description="Training data metadata")
    tau_bound: Optional[float] = Field(default=None, description="Measured tau_inf")
    alignment_constant: float = Field(default=0.0, description="C used in hamiltonian_learned")
    diagnostics: Optional[DiagnosticsReport] = Field(default=None, description="Diagnostics")
    stability: Optional[StabilityDiagnostic] = Field(default=None, description="Stability check")
    model: ModelRecord = Field(exclude=True, description="Learned model, written separately")
    truth_states: list[list[float]] = Field(default_factory=list, exclude=True)
    learned_states: list[list[float]] = Field(default_factory=list, exclude=True)
    timings: dict[str, float] = Field(default_factory=dict, exclude=True)

    @model_validator(mode="after")
    def _check_grid(self) -> "ExperimentReport":
        n = len(self.times)
        for name in ("relative_error", "hamiltonian_true", "hamiltonian_learned", "deviation"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} does not share the time grid")
        return self

    @property
    def mean_relative_error(self) -> float:
        return _time_average(self.times, self.relative_error)

    @property
    def max_deviation(self) -> float:
        return float(np.max(np.abs(self.deviation))) if self.deviation else 0.0


class ComparisonReport(BaseModel):
    """SP model and non-SP baseline fitted on identical data."""

    sp: ExperimentReport = Field(description="Structure-preserving run")
    nonsp_relative_error: list[float] = Field(description="Baseline error on sp.times prefix")
    nonsp_diverged: bool = Field(default=False, description="Baseline trajectory stopped early")
    nonsp_diverged_time: Optional[float] = Field(default=None, description="Baseline failure time")
    sp_symplectic_defect: float = Field(ge=0, description="Defect of the SP field")
    nonsp_symplectic_defect: float = Field(ge=0, description="Defect of the baseline field")
    nonsp_model: ModelRecord = Field(exclude=True, description="Baseline coefficients")
    nonsp_states: list[list[float]] = Field(default_factory=list, exclude=True)

    @property
    def nonsp_mean_relative_error(self) -> float:
        n = len(self.nonsp_relative_error)
        return _time_average(self.sp.times[:n], self.nonsp_relative_error)


class FilterComparison(BaseModel):
    """The same experiment with and without the de-noising filter."""

    filtered: ExperimentReport = Field(description="States replaced by the fit")
    unfiltered: ExperimentReport = Field(description="Raw noisy states")


class ConvergenceStudy(BaseModel):
    """Hamiltonian deviation norms of one learned model over decreasing RK4 steps."""

    system: str = Field(description="Builtin system the model was learned from")
    model_digest: str = Field(description="Training pair digest of the model")
    steps: list[float] = Field(description="Strictly decreasing steps tau_i")
    linf: list[float] = Field(description="max_t |dH~|")
    l2: list[float] = Field(description="Trapezoidal L2 norm of dH~")
    total_variation: list[float] = Field(description="sum |dH~(t_i+1) - dH~(t_i)|")
    linf_order: list[Optional[float]] = Field(description="Observed orders, first entry None")
    l2_order: list[Optional[float]] = Field(description="Observed orders, first entry None")
    total_variation_order: list[Optional[float]] = Field(description="Observed orders")

    @model_validator(mode="after")
    def _check_steps(self) -> "ConvergenceStudy":
        if any(b >= a for a, b in zip(self.steps, self.steps[1:])):
            raise ValueError("steps must be strictly decreasing")
        return self
