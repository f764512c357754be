"""Numerical laboratory for a bilinear circular Radon transform.

Modules: :mod:`grid` (sampled fields), :mod:`transforms` (the operators),
:mod:`discrete` (unit-distance configurations), :mod:`sharpness` (extremal
families and scaling sweeps), :mod:`typeset` (exact exponent polytopes),
:mod:`conditions` (curvature and rank hypotheses), :mod:`acceptance` and
:mod:`cli`.
"""

from .grid import GridSpec, SampledField, integrate, lp_norm, measure, sample
from .transforms import CircleQuadrature, bilinear_field, bilinear_theta

__version__ = "0.1.0"

__all__ = [
    "GridSpec", "SampledField", "sample", "integrate", "lp_norm", "measure",
    "CircleQuadrature", "bilinear_theta", "bilinear_field",
]
