"""Shared exception base so callers can catch package errors uniformly."""


class RegionRankError(Exception):
    """Base class for every error raised by this package."""
