"""Anytime-valid selective acting: certify score cutoffs online and release only below them."""

__version__ = "1.0.0"
