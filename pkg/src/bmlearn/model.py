"""Parameter blocks assembled into a differentiable log-joint density.

A ``ModelGraph`` owns an ordered list of named ``ParamBlock``s (prior +
constraint transform, tiling a flat unconstrained vector of length D) and
an optional likelihood term over a dataset. ``log_joint`` evaluates

    sum_b [ prior_b(inv_b(zeta_b)) + log|J_b|(zeta_b) ]
        + (N / |batch|) * log_likelihood(batch)

so a mini-batch estimate is unbiased for the full-data value; with the
full dataset the scale factor is exactly 1. Only the likelihood is scaled,
never the priors.

The likelihood is a callable ``f(params, X_batch, y_batch)`` receiving the
constrained block values (taped Vars during gradient evaluation, plain
values otherwise) and returning a scalar built from :mod:`.autodiff` ops.

Evaluation is pure: each call uses its own tape, so one graph can serve
many chains concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import autodiff as ad
from .distributions import transform_for
from .errors import DataError, NumericError, UsageError


@dataclass(frozen=True)
class ParamBlock:
    """One named parameter: scalar (size 1) or vector, with its prior."""

    name: str
    size: int
    prior: object
    transform: object = None
    offset: int = -1

    def __post_init__(self):
        if self.size < 1:
            raise UsageError(f"block {self.name!r}: size must be >= 1")
        if self.transform is None:
            object.__setattr__(self, "transform", transform_for(self.prior.support))


class ModelGraph:
    """Immutable bundle of blocks, likelihood, and (validated) data."""

    def __init__(
        self,
        blocks: list[ParamBlock],
        likelihood: Optional[Callable] = None,
        data: Optional[tuple] = None,
    ):
        if not blocks:
            raise UsageError("a model needs at least one parameter block")
        names = [b.name for b in blocks]
        if len(set(names)) != len(names):
            raise UsageError(f"duplicate block names: {sorted(names)}")

        laid_out = []
        offset = 0
        for b in blocks:
            laid_out.append(
                ParamBlock(b.name, b.size, b.prior, b.transform, offset)
            )
            offset += b.size
        self.blocks: tuple[ParamBlock, ...] = tuple(laid_out)
        self.dim: int = offset
        self.likelihood = likelihood

        if data is not None:
            x, y = data
            x = None if x is None else np.asarray(x, dtype=float)
            y = np.asarray(y, dtype=float)
            if x is not None and not np.all(np.isfinite(x)):
                raise DataError("model data: non-finite feature values")
            if not np.all(np.isfinite(y)):
                raise DataError("model data: non-finite target values")
            if x is not None and x.shape[0] != y.shape[0]:
                raise DataError(
                    f"model data: {x.shape[0]} feature rows vs {y.shape[0]} targets"
                )
            self.data = (x, y)
            self.n_obs = int(y.shape[0])
        else:
            self.data = None
            self.n_obs = 0

    # -- layout -------------------------------------------------------------

    def init_point(self) -> np.ndarray:
        """The unconstrained zero vector (scales at 1, locations at 0)."""
        return np.zeros(self.dim)

    def _block_slice(self, zeta: np.ndarray, block: ParamBlock):
        if block.size == 1:
            return float(zeta[block.offset])
        return zeta[block.offset : block.offset + block.size]

    def flatten(self, values: dict) -> np.ndarray:
        """Named constrained values -> unconstrained vector."""
        expected = {b.name for b in self.blocks}
        got = set(values)
        if got != expected:
            missing = sorted(expected - got)
            extra = sorted(got - expected)
            raise UsageError(
                f"flatten: missing blocks {missing}, unexpected blocks {extra}"
            )
        zeta = np.empty(self.dim)
        for b in self.blocks:
            v = np.asarray(values[b.name], dtype=float)
            if v.size != b.size:
                raise UsageError(
                    f"flatten: block {b.name!r} expects size {b.size}, got {v.size}"
                )
            zeta[b.offset : b.offset + b.size] = b.transform.forward(v)
        return zeta

    def unflatten(self, zeta) -> dict:
        """Unconstrained vector -> named constrained values."""
        zeta = np.asarray(zeta, dtype=float)
        if zeta.shape != (self.dim,):
            raise UsageError(
                f"unflatten: expected a vector of length {self.dim}, got shape {zeta.shape}"
            )
        out = {}
        for b in self.blocks:
            out[b.name] = ad.value_of(b.transform.inverse(self._block_slice(zeta, b)))
        return out

    def constrain_matrix(self, z: np.ndarray) -> np.ndarray:
        """Map rows of unconstrained draws to constrained space."""
        z = np.asarray(z, dtype=float)
        out = np.empty_like(z)
        for b in self.blocks:
            cols = slice(b.offset, b.offset + b.size)
            out[..., cols] = ad.value_of(b.transform.inverse(z[..., cols]))
        return out

    # -- density ------------------------------------------------------------

    def log_joint(self, zeta, batch=None, tape: Optional[ad.Tape] = None):
        """Taped scalar when a tape is given, float otherwise."""
        out, _ = self._log_joint_impl(zeta, batch, tape)
        return out

    def _log_joint_impl(self, zeta, batch, tape):
        zeta = np.asarray(zeta, dtype=float)
        if zeta.shape != (self.dim,):
            raise UsageError(
                f"log_joint: expected a vector of length {self.dim}, got shape {zeta.shape}"
            )
        total = 0.0
        params = {}
        leaves = {}
        for b in self.blocks:
            z_b = self._block_slice(zeta, b)
            if tape is not None:
                z_b = tape.leaf(z_b)
                leaves[b.name] = z_b
            theta = b.transform.inverse(z_b)
            params[b.name] = theta
            lp = b.prior.log_pdf(theta)
            if not ad.is_var(lp) and lp == -math.inf:
                return -math.inf, leaves
            total = ad.add(total, ad.add(lp, b.transform.log_jacobian(z_b)))

        if self.likelihood is not None:
            x, y = self.data if self.data is not None else (None, None)
            if batch is None or self.data is None:
                scale = 1.0
                xb, yb = x, y
            else:
                batch = np.asarray(batch, dtype=int)
                if batch.size < 1:
                    raise UsageError("log_joint: batch must contain at least one row")
                scale = self.n_obs / batch.size
                xb = None if x is None else x[batch]
                yb = y[batch]
            ll = self.likelihood(params, xb, yb)
            total = ad.add(total, ad.mul(scale, ll))
        return total, leaves

    def value_and_grad(self, zeta, batch=None):
        """(log_joint, gradient) at `zeta`; (-inf, None) when unevaluable.

        A Cholesky failure inside the density is treated as log density
        -inf so proposal-driven engines can reject and move on.
        """
        tape = ad.Tape()
        try:
            out, leaves = self._log_joint_impl(zeta, batch, tape)
        except NumericError:
            return -math.inf, None
        if not ad.is_var(out):
            return float(out), None
        val = float(out.value)
        if not math.isfinite(val):
            return val, None
        gmap = ad.backward(tape, out)
        grad = np.empty(self.dim)
        for b in self.blocks:
            g = gmap[leaves[b.name]]
            if b.size == 1:
                grad[b.offset] = g
            else:
                grad[b.offset : b.offset + b.size] = g
        return val, grad
