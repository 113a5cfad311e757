"""Minimal reverse-mode automatic differentiation over numpy arrays."""
from . import ops
from .graph import GraphError, Node, Op, ShapeError, apply, as_node, backward, forward, leaf
from .gradcheck import GradCheckResult, check_gradients, relative_error
from .optim import (SGD, Adam, NonFiniteGradientError, Optimizer, OptimizerState, clip_by_global_norm,
                    make_optimizer)

__all__ = [
    "Adam", "GradCheckResult", "GraphError", "Node", "NonFiniteGradientError", "Op",
    "Optimizer", "OptimizerState", "SGD", "ShapeError", "apply", "as_node", "backward",
    "check_gradients", "clip_by_global_norm",
    "forward", "leaf", "make_optimizer", "ops", "relative_error",
]
