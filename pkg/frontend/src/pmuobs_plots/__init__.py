"""Batch figure rendering for simulator/observer CSV artifacts.

Reads the CSVs written by ``pmuobs run`` (its only interface to the
simulator) and renders static images: true-vs-estimated state traces and
parameter-convergence panels. Scripts are read-only over their inputs and
reruns are idempotent.
"""

from pmuobs_plots.figures import FigureSpec, plot_parameters, plot_states

__all__ = ["FigureSpec", "plot_states", "plot_parameters"]
