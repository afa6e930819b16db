"""Neurosymbolic world-model alignment: learn executable rules and graph
memory from agent-environment interaction, correct a fallible base predictor
with them, and drive a model-predictive-control agent loop."""

__version__ = "0.1.0"
