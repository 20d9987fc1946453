"""
dimerfold Services Layer.

- cli: command-line interface (Typer + Rich)
- reports: manifests, CSV and JSON writers
- render: SVG rendering of configurations
"""

__all__ = ["cli", "render", "reports"]
