"""
Socially informed mobility simulator.
Generates synthetic trajectories from weighted tessellations, social graphs
and mobility diaries, and scores them against real check-in data.
"""

__version__ = "0.1.0"
