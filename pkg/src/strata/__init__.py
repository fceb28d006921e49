"""strata: region-adaptive error-bounded compression for spatiotemporal fields."""

__version__ = "0.1.0"
