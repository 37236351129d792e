"""Decentralized self-imitation reinforcement learning laboratory."""

__version__ = "0.1.0"
