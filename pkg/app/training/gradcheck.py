"""
Gradient Check
Autograd against float64 central differences on sampled parameter coordinates
"""
import copy
import logging
from typing import Callable, List, Optional

import torch
from pydantic import BaseModel, Field

from app.core.seeding import numpy_rng
from app.nanomodel.transformer import CoveTransformer
from app.training.batching import Batch
from app.training.loss import next_token_loss

logger = logging.getLogger(__name__)

# Below this magnitude a gradient is compared in absolute terms; only exact
# zeros (rows the batch never touches) should get near it
RELATIVE_ERROR_FLOOR = 1e-12


class CoordinateCheck(BaseModel):
    parameter: str
    index: List[int]
    analytic: float
    numeric: float
    relative_error: float


class GradientCheckResult(BaseModel):
    """Per-coordinate comparison and the pass fraction at a tolerance"""
    step: float
    tolerance: float
    coordinates: List[CoordinateCheck] = Field(default_factory=list)

    @property
    def pass_fraction(self) -> float:
        if not self.coordinates:
            return 0.0
        passed = sum(1 for c in self.coordinates if c.relative_error <= self.tolerance)
        return passed / len(self.coordinates)

    def groups(self) -> List[str]:
        return sorted({c.parameter for c in self.coordinates})


def relative_error(analytic: float, numeric: float, floor: float = RELATIVE_ERROR_FLOOR) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def central_difference(
    loss_fn: Callable[[], torch.Tensor],
    param: torch.Tensor,
    index: tuple,
    step: float,
    extrapolate: bool = True
) -> float:
    """
    (L(x + h) - L(x - h)) / 2h for one coordinate, restoring the value afterwards

    With `extrapolate`, combines steps h and h/2 as (4 D(h/2) - D(h)) / 3,
    which cancels the h^2 error term.
    """
    def difference(h: float) -> float:
        with torch.no_grad():
            original = param[index].item()
            param[index] = original + h
            plus = float(loss_fn())
            param[index] = original - h
            minus = float(loss_fn())
            param[index] = original
        return (plus - minus) / (2 * h)

    coarse = difference(step)
    if not extrapolate:
        return coarse
    return (4 * difference(step / 2) - coarse) / 3


def gradient_check(
    model: CoveTransformer,
    batch: Batch,
    n_coords: int = 200,
    step: float = 1e-3,
    seed: int = 0,
    tolerance: float = 1e-4,
    parameters: Optional[List[str]] = None
) -> GradientCheckResult:
    """
    Compare backprop gradients of the next-token loss with finite differences

    The model is deep-copied to float64; coordinates are spread round-robin
    over the parameter tensors so every group is sampled.

    Args:
        model: Model to check (left untouched)
        batch: Tokens and loss mask
        n_coords: Coordinates to sample
        step: Central-difference step h
        seed: Root seed for the "eval" substream that picks coordinates
        tolerance: Relative error counted as a pass
        parameters: Restrict to these parameter paths
    """
    model64 = copy.deepcopy(model).double()
    mask = batch.loss_mask.double()

    def loss_fn() -> torch.Tensor:
        return next_token_loss(model64(batch.tokens), batch.tokens, mask)

    named = [
        (name, p) for name, p in model64.named_parameters()
        if parameters is None or name in parameters
    ]
    if not named:
        raise ValueError("No parameters selected for the gradient check")
    for _, p in named:
        p.requires_grad_(True)

    model64.zero_grad(set_to_none=True)
    loss_fn().backward()

    rng = numpy_rng(seed, "eval", 0)
    order = rng.permutation(len(named))
    checks: List[CoordinateCheck] = []
    for n in range(n_coords):
        name, param = named[int(order[n % len(named)])]
        index = tuple(int(rng.integers(dim)) for dim in param.shape)
        analytic = float(param.grad[index]) if param.grad is not None else 0.0
        numeric = central_difference(loss_fn, param, index, step)
        checks.append(CoordinateCheck(
            parameter=name,
            index=list(index),
            analytic=analytic,
            numeric=numeric,
            relative_error=relative_error(analytic, numeric)
        ))

    result = GradientCheckResult(step=step, tolerance=tolerance, coordinates=checks)
    worst = max(c.relative_error for c in checks)
    logger.info(
        f"Gradient check: {len(checks)} coordinates over {len(result.groups())} tensors, "
        f"pass fraction {result.pass_fraction:.3f}, worst relative error {worst:.2e}"
    )
    return result
