"""Decentralized swarm-computing middleware with a deterministic simulator.

Nodes gossip membership and capability profiles, keep an eventually
consistent resource registry, and place tasks with an availability-,
QoS- and locality-aware score — all on top of a reproducible discrete-event
network simulation.
"""

__version__ = "0.1.0"
