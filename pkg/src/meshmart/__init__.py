"""meshmart: desk-scale multi-tenant data platform and data-product marketplace."""

__version__ = "0.1.0"
