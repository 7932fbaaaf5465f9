"""MCP tool implementations for Hamiltonian learning experiments."""

import asyncio
from typing import Optional

import numpy as np
from mcp.server.fastmcp import FastMCP

from .config import load_experiment_config
from .presets import PRESETS, preset_values
from .services.dynamics import BUILTIN_SYSTEMS, builtin_system
from .services.experiment import DEFAULT_STEPS, ExperimentService
from .services.outputs import report_summary


def register_tools(mcp: FastMCP) -> None:
    """Register all Hamiltonian learning tools with the MCP server."""

    @mcp.tool()
    async def run_experiment(
        preset: str = "pendulum",
        seed: Optional[int] = None,
        overrides: Optional[dict] = None,
        write_outputs: bool = False,
    ) -> dict:
        """Learn a Hamiltonian from generated data and evaluate the reconstruction.

        Use when you want the relative error, energy deviation and diagnostics of
        one learned model simulated from the test initial state.

        Args:
            preset: Named preset used as the base configuration
            seed: Root random seed
            overrides: Extra ExperimentConfig fields, e.g. {"degree": 4}
            write_outputs: Also write series, trajectory, summary and model files

        Returns:
            The experiment report with its time series and scalar metrics
        """
        cfg = load_experiment_config(preset=preset, overrides={**(overrides or {}), "seed": seed})
        service = ExperimentService()
        report = await asyncio.to_thread(service.run, cfg, write_outputs)
        return report_summary(report)

    @mcp.tool()
    async def run_convergence_study(
        preset: str = "pendulum",
        steps: Optional[list[float]] = None,
        seed: Optional[int] = None,
        overrides: Optional[dict] = None,
    ) -> dict:
        """Measure how the learned Hamiltonian's drift shrinks with the RK4 step.

        Use when you want observed convergence orders of the energy deviation.

        Args:
            preset: Named preset used as the base configuration
            steps: Strictly decreasing RK4 steps
            seed: Root random seed
            overrides: Extra ExperimentConfig fields

        Returns:
            L-infinity, L2 and total-variation norms per step with observed orders
        """
        cfg = load_experiment_config(preset=preset, overrides={**(overrides or {}), "seed": seed})
        service = ExperimentService()
        study = await asyncio.to_thread(service.converge, cfg, steps or list(DEFAULT_STEPS), False)
        return study.model_dump()

    @mcp.tool()
    async def compare_models(
        preset: str = "pendulum",
        seed: Optional[int] = None,
        overrides: Optional[dict] = None,
    ) -> dict:
        """Fit the structure-preserving model and an unconstrained baseline on the same data.

        Use for checking whether the learned dynamics is Hamiltonian and how
        both reconstructions track the true trajectory.

        Args:
            preset: Named preset used as the base configuration
            seed: Root random seed
            overrides: Extra ExperimentConfig fields

        Returns:
            Both error series, divergence flags and symplectic defects
        """
        cfg = load_experiment_config(preset=preset, overrides={**(overrides or {}), "seed": seed})
        service = ExperimentService()
        comparison = await asyncio.to_thread(service.compare, cfg, False)
        return {
            "sp": report_summary(comparison.sp),
            **comparison.model_dump(exclude={"sp"}),
            "nonsp_mean_relative_error": comparison.nonsp_mean_relative_error,
        }

    @mcp.tool()
    async def list_presets() -> dict:
        """List the named experiment presets and their configuration values.

        Returns:
            Preset name mapped to the config keys it sets
        """
        return {"presets": {name: preset_values(name) for name in PRESETS}}

    @mcp.tool()
    async def builtin_hamiltonian(name: str, states: list[list[float]]) -> dict:
        """Evaluate a builtin Hamiltonian and its vector field at phase-space points.

        Args:
            name: Builtin system name
            states: Points (p-block then q-block), one per row

        Returns:
            H(u) and du/dt per point, plus the system's default domain
        """
        system = builtin_system(name)
        points = np.asarray(states, dtype=float).reshape(-1, 2 * system.dim_d)
        hamiltonian = system.hamiltonian(points)
        field = system.rhs(points)
        domain = system.default_domain
        return {
            "name": system.name,
            "dim_d": system.dim_d,
            "hamiltonian": [float(v) for v in hamiltonian],
            "field": [[float(v) for v in row] for row in field],
            "domain": domain.model_dump() if domain is not None else None,
            "known_systems": sorted(BUILTIN_SYSTEMS),
        }
