"""Numerics for keyed bit encryption that resists cloning.

Submodules: ``core`` (states and operators), ``ensembles`` (Haar and design
key distributions), ``schemes`` (the encryption scheme), ``games``
(monogamy-of-entanglement games), ``adversary`` (cloning attacks and
see-saw search), ``infotheory`` (min-entropy, decoupling, inequality
checks) and ``cli``.
"""

__version__ = "0.1.0"
