"""Toolkit for building character-decision-point datasets from CYOA game
graphs and for segmenting long narrative texts at detected branching points.
"""

__version__ = "0.1.0"
