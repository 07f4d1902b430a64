"""Execution-time modelling and cost/performance deployment planning for IaaS instance types."""

__version__ = "0.1.0"
