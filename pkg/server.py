#!/usr/bin/env python3
"""hamlearn MCP Server.

Learn Hamiltonian systems from trajectory data and evaluate the reconstructed
dynamics. Exposes the experiment runner, convergence study and SP/non-SP
comparison as tools.
"""

import os
import sys

from dotenv import load_dotenv
from mcp.server.fastmcp import FastMCP

# Load environment variables
load_dotenv()

# Add src to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "src"))

from hamlearn.config import Settings, configure_logging
from hamlearn.tools import register_tools


def create_server() -> FastMCP:
    """Create and configure the MCP server."""
    configure_logging(Settings.from_env())
    mcp = FastMCP("hamlearn")

    # Register all tools
    register_tools(mcp)

    return mcp


# Create server instance
mcp = create_server()

if __name__ == "__main__":
    mcp.run()
