"""Roundtable: orchestration service for equal-time, image-supported group sessions."""

__version__ = "0.1.0"
