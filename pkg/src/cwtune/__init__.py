"""Distributed contention-window learning for proportional-fair WiFi airtime.

The package bundles a closed-form saturation throughput model, a
proportional-fair reference solver, a two-point Kiefer-Wolfowitz learner,
an event-driven CSMA/CA simulator and an experiment harness that ties them
together.
"""

__version__ = "0.1.0"


class ParameterError(ValueError):
    """Raised for out-of-domain arguments and inconsistent configurations."""
