"""Sampling of moving fronts in spacetime by a marching scheme.

The front is followed as a surface in (x, y, t): points are added in order
of increasing time, each child placed at a controlled distance from two
accepted parents, so the method also handles speeds that change sign.
"""
from .march import FrontGraph, march
from .speeds import get_field

__all__ = ["FrontGraph", "march", "get_field"]
