"""Batch figure rendering for squidbell CSV/JSON artifacts."""

from .core import FigureJob, load_job, render

__version__ = "0.1.0"
