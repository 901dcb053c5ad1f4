"""Interaction-aware energy management for two hybrid-electric race cars.

The package solves one-lap energy management as a Stackelberg game between
two cars coupled through a slipstream drag-reduction model.  The bilevel
game is reformulated through the follower's KKT conditions into a single
smooth NLP with relaxed complementarity constraints and solved with the
built-in sparse interior-point method.
"""

__version__ = "0.1.0"
