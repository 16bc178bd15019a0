"""Benchmark metrics, baselines and reporting."""
