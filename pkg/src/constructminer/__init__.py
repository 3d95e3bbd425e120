"""Mine structural constructs of smart-home activities from CASAS sensor logs."""

__version__ = "0.1.0"
