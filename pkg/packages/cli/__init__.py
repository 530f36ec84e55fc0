"""Experiment runner: config schema, pipelines, CSV series and the gl-duality command."""
