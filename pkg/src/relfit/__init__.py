"""Relative-fit and SigClust tests for Gaussian mixture clustering."""
