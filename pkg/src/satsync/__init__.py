"""Scale-free linear protocols for saturated discrete-time double integrators.

Simulation of leader-follower (regulated) state synchronization over a
directed network, plus numerical certification of the stability argument.
"""

__version__ = "0.1.0"
