"""Central-difference oracle for verifying backward passes.

The check never trusts the graph it verifies: it re-evaluates the loss from
scratch for every probed coordinate, so any error in an op's backward rule
shows up as a finite-difference mismatch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import OracleFailure
from .tensor import Parameter, Rng, Tensor


@dataclass
class GradCheckReport:
    max_rel_err: float
    per_param: dict[str, float]

    def worst(self) -> str:
        return max(self.per_param, key=self.per_param.get)


def relative_error(numeric: float, analytic: float, floor: float = 1e-6) -> float:
    return abs(numeric - analytic) / max(abs(numeric), abs(analytic), floor)


def jitter_params(params, rng: Rng, std: float = 0.5) -> None:
    """Shift parameters to a generic, well-conditioned point before checking.

    Production inits are tiny (std 0.02), which drives layer-norm variances
    toward zero and blows up higher derivatives until central differences
    cannot resolve the first one. The derivative code is what the oracle
    verifies, so it probes at O(1) activations instead.
    """
    for i, p in enumerate(params):
        p.data = p.data + rng.split("jitter", i).normal(p.shape, std=std).astype(p.data.dtype)


def grad_check(loss_fn, params, epsilon: float = 1e-5,
               max_coords_per_param: int | None = None,
               rng: Rng | None = None) -> GradCheckReport:
    """Compare analytic gradients of loss_fn against central differences.

    loss_fn must be a deterministic zero-argument callable returning a scalar
    Tensor built from the given params. When max_coords_per_param is set,
    that many coordinates per parameter are probed (seeded subsample);
    otherwise every coordinate is checked.
    """
    params: list[Parameter] = list(params)
    for p in params:
        p.zero_grad()
    loss = loss_fn()
    if loss.data.size != 1:
        raise OracleFailure(f"loss must be scalar, got shape {loss.shape}")
    if not np.isfinite(loss.data):
        raise OracleFailure("loss is not finite")
    loss.backward()
    analytic = {p.name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
                for p in params}

    per_param: dict[str, float] = {}
    for p in params:
        flat = p.data.reshape(-1)
        n = flat.size
        if max_coords_per_param is not None and n > max_coords_per_param:
            sub = rng or Rng(0)
            coords = np.sort(sub.split("coords", p.name).choice(n, max_coords_per_param))
        else:
            coords = np.arange(n)
        an_flat = analytic[p.name].reshape(-1)
        worst = 0.0
        for c in coords:
            original = flat[c]
            flat[c] = original + epsilon
            f_plus = float(loss_fn().data)
            flat[c] = original - epsilon
            f_minus = float(loss_fn().data)
            flat[c] = original
            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                raise OracleFailure(f"loss not finite while probing {p.name}[{c}]")
            numeric = (f_plus - f_minus) / (2.0 * epsilon)
            worst = max(worst, relative_error(numeric, float(an_flat[c])))
        per_param[p.name] = worst
    return GradCheckReport(max(per_param.values(), default=0.0), per_param)
