"""Finite-difference validation of analytic gradients.

The checker perturbs sampled parameter entries with a magnitude-scaled
central difference and compares against the gradients produced by
``backward``.  It is the release gate for every layer and model in this
package; training code trusts gradients only because this suite passes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor

__all__ = ["GradCheckError", "GradCheckReport", "grad_check"]

BASE_STEP = 1e-5


class GradCheckError(RuntimeError):
    """Raised when gradients are non-finite or the graph is unusable."""


@dataclass
class GradCheckEntry:
    param: str
    index: tuple[int, ...]
    analytic: float
    numeric: float
    rel_error: float


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst: GradCheckEntry | None
    entries: list[GradCheckEntry] = field(repr=False, default_factory=list)

    def passed(self, tolerance: float) -> bool:
        return self.max_rel_error < tolerance


def _rel_error(a: float, n: float) -> float:
    return abs(a - n) / max(abs(a), abs(n), 1e-6)


def grad_check(
    loss_fn,
    params: list[tuple[str, Tensor]],
    samples_per_param: int = 6,
    seed: int = 0,
) -> GradCheckReport:
    """Compare analytic and central-difference gradients.

    ``loss_fn`` must rebuild the graph and return a scalar Tensor on
    every call (parameters are mutated in place between calls).  Up to
    ``samples_per_param`` entries of each tensor are probed, chosen
    deterministically from ``seed``.
    """
    for _, t in params:
        t.zero_grad()
    loss = loss_fn()
    if loss.data.size != 1:
        raise GradCheckError("loss function must return a scalar")
    loss.backward()

    # keyed by position, not name: composed checks may repeat names
    analytic: list[np.ndarray] = []
    for name, t in params:
        if t.grad is None:
            analytic.append(np.zeros_like(t.data))
        else:
            if not np.all(np.isfinite(t.grad)):
                raise GradCheckError(f"non-finite analytic gradient in {name}")
            analytic.append(t.grad.copy())

    rng = np.random.default_rng(seed)
    entries: list[GradCheckEntry] = []
    for pos, (name, t) in enumerate(params):
        flat = t.data.reshape(-1)
        n = flat.size
        idx = np.arange(n) if n <= samples_per_param else np.sort(
            rng.choice(n, size=samples_per_param, replace=False)
        )
        for i in idx:
            original = flat[i]
            h = BASE_STEP * (1.0 + abs(original))
            flat[i] = original + h
            up = float(loss_fn().data)
            flat[i] = original - h
            down = float(loss_fn().data)
            flat[i] = original
            numeric = (up - down) / (2.0 * h)
            if not np.isfinite(numeric):
                raise GradCheckError(f"non-finite numeric gradient in {name}")
            a = float(analytic[pos].reshape(-1)[i])
            entries.append(
                GradCheckEntry(
                    param=name,
                    index=np.unravel_index(i, t.data.shape),
                    analytic=a,
                    numeric=numeric,
                    rel_error=_rel_error(a, numeric),
                )
            )

    worst = max(entries, key=lambda e: e.rel_error, default=None)
    return GradCheckReport(
        max_rel_error=worst.rel_error if worst else 0.0,
        worst=worst,
        entries=entries,
    )
