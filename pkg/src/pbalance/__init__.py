"""Balancedness of exchangeable random partitions.

Gibbs-type and ESC partition models, exhaustive EPPF checks, balancedness
classification, and an entity-resolution sampler built on ESC priors.
"""

__version__ = "0.1.0"
