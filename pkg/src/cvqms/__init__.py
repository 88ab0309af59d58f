"""Sobolev-preserving bosonic dynamics: symbolic ladder algebra, truncated GKSL
simulation and numerical certificates for moment-growth and perturbation bounds."""
from .ccr import OperatorPolynomial, adjoint, degree, gksl_G, multiply
from .fock import DensityMatrix, FockBasisSpec, TruncatedOperator, realize
from .generator import GkslGenerator, TimeDependentGenerator, apply, adjoint_apply, build, catalog, realize_generator
from .dynamics import IntegratorConfig, evolve, evolve_td, semigroup_difference
from .sobolev import sobolev_norm, trace_norm

__version__ = "0.1.0"
