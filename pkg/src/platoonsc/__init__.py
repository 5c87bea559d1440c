"""Deterministic C-V2X platooning simulator with a semantic metric layer,
multi-agent RL resource allocation, brute-force oracles and an experiment
harness."""

from . import channel, env, harness, marl, nets, oracle, replay, semantics

__all__ = ["channel", "semantics", "env", "nets", "replay", "marl",
           "oracle", "harness"]
__version__ = "0.1.0"
