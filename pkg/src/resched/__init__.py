"""Phase-based online scheduling with exact desk-scale oracles and LP audits."""

__version__ = "0.1.0"
