"""Minimal forward/backward engine and layers for the model stack."""

from .tensor import Parameter, Rng, Tensor  # noqa: F401
