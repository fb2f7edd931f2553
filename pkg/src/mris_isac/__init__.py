"""Simulator and optimization toolkit for secure ISAC with a movable
reflecting surface.

Subpackages cover scenario/geometry setup, channel synthesis, surface
pattern combinatorics, eavesdropper-CSI uncertainty bounding, rate metrics,
the WMMSE surrogate, robust constraint assembly, the conic solver blocks,
and the alternating-optimization driver, plus a small experiment CLI.
"""

__version__ = "0.1.0"
