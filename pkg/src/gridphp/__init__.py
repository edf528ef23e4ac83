"""Domino tilings, local consistency on grid graphs and pigeonhole proofs."""

__version__ = "0.1.0"
