"""Depth-wise softmax attention residuals: kernels, schedules and cost models."""

from attnres._attnres import *  # noqa: F401,F403
from attnres._attnres import __doc__  # noqa: F401
