"""Nonequilibrium steady states of boundary-driven spin-1/2 chains.

Three routes to the steady state are provided: time evolution of a
Pauli-basis MPO (:mod:`.tebd`), an exact dense Liouvillian solve for short
chains (:mod:`.dense_oracle`), and the closed-form solution of the dephasing
XX chain (:mod:`.exact`). :mod:`.transport` drives experiments on top of them.
"""

__version__ = "0.1.0"
