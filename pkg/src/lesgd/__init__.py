"""Lyapunov-exponent-guided training at desk scale.

Treats gradient descent as a discrete-time dynamical system on the flat
parameter vector, estimates the largest finite-time Lyapunov exponent of the
update map, and uses it to drive a learning-rate feedback rule and
adversarial data augmentation on synthetic domain-shift suites.
"""

from . import augment, cli, domains, harness, lyapunov, mlp, optim

__all__ = ["augment", "cli", "domains", "harness", "lyapunov", "mlp", "optim"]
