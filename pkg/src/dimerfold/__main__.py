"""
dimerfold - Main Entry Point.

Enables running the package as a module:
    python -m dimerfold [command] [options]

This is equivalent to running the CLI directly:
    dimerfold [command] [options]

Version: 0.1.0
"""

from dimerfold.services.cli import main

if __name__ == "__main__":
    main()
