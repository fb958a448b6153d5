"""Central finite-difference gradient checking."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from irn.autodiff import ops
from irn.autodiff.tensor import Tensor, backward, recording


@dataclass
class GradCheckReport:
    max_rel_err: float
    n_checked: int
    tol: float
    failures: list[tuple[str, int, float, float, float]] = field(default_factory=list)
    excluded: list[tuple[str, int]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def summary(self) -> str:
        return (
            f"checked={self.n_checked} excluded={len(self.excluded)} "
            f"max_rel_err={self.max_rel_err:.3e} tol={self.tol:.1e} "
            f"{'PASS' if self.passed else 'FAIL'}"
        )


def relative_error(analytic: float, numeric: float, floor: float = 1e-6) -> float:
    """|a - n| / max(|a|, |n|, floor).

    ``floor`` keeps near-zero gradients from turning finite-difference
    round-off into huge ratios.
    """
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def grad_check(
    f: Callable[[], Tensor],
    params: dict[str, Tensor],
    eps: float = 1e-5,
    tol: float = 1e-6,
    floor: float = 1e-6,
) -> GradCheckReport:
    """Compare tape gradients of the scalar ``f()`` with central differences.

    ``f`` closes over ``params`` and must be deterministic. A coordinate whose
    +/- eps perturbations put some relu input on different sides of zero sits
    on a kink; it is reported in ``excluded`` rather than failed.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    with recording() as tape:
        loss = f()
    backward(loss, tape, params.values())
    analytic = {k: p.grad.copy() for k, p in params.items()}

    report = GradCheckReport(max_rel_err=0.0, n_checked=0, tol=tol)
    for name, p in params.items():
        flat = p.data.reshape(-1)
        ga = analytic[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            with ops.kink_probe() as plus_masks:
                fp = f().item()
            flat[i] = orig - eps
            with ops.kink_probe() as minus_masks:
                fm = f().item()
            flat[i] = orig
            if any(not np.array_equal(a, b) for a, b in zip(plus_masks, minus_masks)):
                report.excluded.append((name, i))
                continue
            num = (fp - fm) / (2.0 * eps)
            err = relative_error(float(ga[i]), num, floor)
            report.n_checked += 1
            report.max_rel_err = max(report.max_rel_err, err)
            if err > tol:
                report.failures.append((name, i, float(ga[i]), num, err))
    return report
