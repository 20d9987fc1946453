"""Packaged data: the small-graph oracle corpus (``corpus.yaml``)."""
