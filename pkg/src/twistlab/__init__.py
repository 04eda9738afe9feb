"""Numerical laboratory for twisted central values of the discriminant form over a coset of characters mod p^3."""

__version__ = "0.1.0"
