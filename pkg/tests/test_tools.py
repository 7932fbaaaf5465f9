"""Tests for MCP tools."""

import pytest
from unittest.mock import patch

from mcp.server.fastmcp import FastMCP

from hamlearn.tools import register_tools

SMALL_OVERRIDES = {
    "system": "harmonic_oscillator",
    "degree": 2,
    "trajectories": 20,
    "steps_per_burst": 4,
    "fine_ratio": 5,
    "noise_amplitude": 0.0,
    "derivative_method": "exact",
    "test_initial_state": [0.5, 0.3],
    "horizon": 0.5,
    "eval_step": 0.01,
    "diagnostics": False,
}


@pytest.fixture
def tools() -> dict:
    mcp = FastMCP("test")
    register_tools(mcp)
    return {t.name: t.fn for t in mcp._tool_manager._tools.values()}


class TestToolRegistration:
    """Tests for tool registration."""

    def test_all_tools_registered(self, tools):
        """Test that all 5 tools are registered."""
        expected_tools = [
            "run_experiment",
            "run_convergence_study",
            "compare_models",
            "list_presets",
            "builtin_hamiltonian",
        ]

        for tool in expected_tools:
            assert tool in tools, f"Tool {tool} not registered"


class TestListPresets:
    """Tests for list_presets tool."""

    @pytest.mark.asyncio
    async def test_list_presets_returns_values(self, tools):
        """Test that every preset is listed with its config keys."""
        result = await tools["list_presets"]()
        assert "pendulum" in result["presets"]
        assert result["presets"]["henon_heiles"]["degree"] == 3


class TestBuiltinHamiltonian:
    """Tests for builtin_hamiltonian tool."""

    @pytest.mark.asyncio
    async def test_oscillator_values(self, tools):
        """Test H and the vector field at two points."""
        result = await tools["builtin_hamiltonian"]("harmonic_oscillator", [[1.0, 0.0], [0.0, 2.0]])
        assert result["dim_d"] == 1
        assert result["hamiltonian"] == pytest.approx([0.5, 2.0])
        assert result["field"][1] == pytest.approx([-2.0, 0.0])
        assert "pendulum" in result["known_systems"]

    @pytest.mark.asyncio
    async def test_unknown_system(self, tools):
        """Test that an unknown name raises."""
        with pytest.raises(KeyError):
            await tools["builtin_hamiltonian"]("lorenz", [[0.0, 0.0]])


class TestRunExperiment:
    """Tests for run_experiment tool."""

    @pytest.mark.asyncio
    async def test_run_experiment_returns_dict(self, tools, tmp_path):
        """Test that a small run returns the report summary without writing files."""
        with patch.dict("os.environ", {"HAMLEARN_OUTPUT_DIR": str(tmp_path)}):
            result = await tools["run_experiment"](preset="pendulum", overrides=SMALL_OVERRIDES)
        assert result["config"]["system"] == "harmonic_oscillator"
        assert result["relative_error"][0] == 0.0
        assert result["mean_relative_error"] < 1e-6
        assert list(tmp_path.iterdir()) == []


class TestConvergenceAndCompare:
    """Tests for run_convergence_study and compare_models tools."""

    @pytest.mark.asyncio
    async def test_convergence_study(self, tools):
        """Test that explicit steps are echoed back."""
        result = await tools["run_convergence_study"](
            preset="pendulum", steps=[0.02, 0.01], overrides=SMALL_OVERRIDES
        )
        assert result["steps"] == [0.02, 0.01]
        assert result["linf_order"][0] is None

    @pytest.mark.asyncio
    async def test_compare_models(self, tools):
        """Test that both models are reported."""
        result = await tools["compare_models"](preset="pendulum", seed=3, overrides=SMALL_OVERRIDES)
        assert result["sp"]["config"]["seed"] == 3
        assert "nonsp_symplectic_defect" in result
        assert "nonsp_model" not in result
