"""Mask-to-box transformation.

A probability mask is projected onto its column-wise and row-wise maxima,
then back-projected by broadcasting both profiles and taking the
elementwise minimum. The result is the soft bounding-box mask of the
prediction.

Two routes are provided:

* numpy functions (:func:`project`, :func:`back_project`, :func:`m2b`,
  :func:`m2b_backward`) backed by :mod:`boxseg.kernels`;
* :func:`m2b_torch`, built from autograd primitives so it can sit inside a
  training graph.

Both follow the same gradient convention. Max-pooling ties send the whole
gradient to the first maximal index; min ties between the two profiles
send it to the row profile.
"""
from dataclasses import dataclass

import numpy as np
import torch

from . import kernels
from .errors import DimensionError


@dataclass(frozen=True)
class ProjectionPair:
    row_profile: np.ndarray  # length W, max over rows of each column
    col_profile: np.ndarray  # length H, max over columns of each row


def _as_mask(mask):
    arr = np.ascontiguousarray(mask, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"expected a 2-D mask, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"mask has zero area: {arr.shape}")
    return arr


def project(mask):
    arr = _as_mask(mask)
    row, col, _, _ = kernels.project(arr)
    return ProjectionPair(np.asarray(row), np.asarray(col))


def back_project(proj, height, width):
    row = np.ascontiguousarray(proj.row_profile, dtype=np.float64)
    col = np.ascontiguousarray(proj.col_profile, dtype=np.float64)
    if row.ndim != 1 or col.ndim != 1:
        raise DimensionError("profiles must be 1-D")
    if row.shape[0] != width or col.shape[0] != height:
        raise DimensionError(
            f"profile lengths ({row.shape[0]}, {col.shape[0]}) do not match "
            f"width={width}, height={height}"
        )
    if height < 1 or width < 1:
        raise DimensionError("zero-area output")
    return np.asarray(kernels.back_project(row, col))


def m2b(mask):
    """Soft bounding-box mask of ``mask`` (H×W array in [0, 1])."""
    return np.asarray(kernels.m2b(_as_mask(mask)))


def m2b_backward(mask, upstream_grad):
    """Vector-Jacobian product of :func:`m2b` at ``mask``."""
    arr = _as_mask(mask)
    grad = np.ascontiguousarray(upstream_grad, dtype=np.float64)
    if grad.shape != arr.shape:
        raise DimensionError(f"gradient shape {grad.shape} != mask shape {arr.shape}")
    return np.asarray(kernels.m2b_backward(arr, grad))


def m2b_torch(prob):
    """Differentiable mask-to-box on a tensor of shape (..., H, W).

    ``torch.max`` along a dimension returns, and backpropagates to, the first
    maximal index, so tie routing matches :func:`m2b_backward`.
    """
    if prob.dim() < 2 or prob.shape[-1] < 1 or prob.shape[-2] < 1:
        raise DimensionError(f"expected (..., H, W) with H, W >= 1, got {tuple(prob.shape)}")
    row = prob.max(dim=-2, keepdim=True).values  # (..., 1, W)
    col = prob.max(dim=-1, keepdim=True).values  # (..., H, 1)
    row_b, col_b = torch.broadcast_tensors(row, col)
    return torch.where(row_b <= col_b, row_b, col_b)
