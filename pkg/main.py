#!/usr/bin/env python3
"""
TetMesh DB - Main Application
Data management for unstructured tetrahedral finite-element meshes
"""

from core.config import configure_logging
from cli import cli


def main():
    """Main application entry point"""
    # Commands reconfigure the level from --verbose or the configuration file
    configure_logging("INFO")
    cli(prog_name="tetmesh-db")


if __name__ == "__main__":
    main()
