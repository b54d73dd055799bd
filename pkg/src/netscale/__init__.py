"""Intrinsic scale of networks."""
