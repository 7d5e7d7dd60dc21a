"""criticgate: a critic-gated runtime shield around learned controllers.

A wrapper decides step by step between a base policy and a certified fallback
using critic improvements and a decaying random acceptance schedule, with
tooling to train desk-scale policies, certify fallback decay, and run
Monte Carlo verification of the switching bounds.
"""

from .kernels import BACKEND, COMPILED

__version__ = "0.1.0"
__all__ = ["BACKEND", "COMPILED", "__version__"]
