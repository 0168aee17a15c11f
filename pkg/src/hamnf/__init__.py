"""Birkhoff normal forms for perturbed harmonic oscillators."""

from .frequencies import FrequencyModel, small_divisor
from .normal_form import (NormalFormResult, Strategy, birkhoff_normal_form,
                          lie_transform_poly, solve_homological, verify_normal_form)
from .poly import Polynomial, eta, harmonic, poisson, q, xi

__all__ = [
    "FrequencyModel", "NormalFormResult", "Polynomial", "Strategy", "birkhoff_normal_form",
    "eta", "harmonic", "lie_transform_poly", "poisson", "q", "small_divisor",
    "solve_homological", "verify_normal_form", "xi",
]
