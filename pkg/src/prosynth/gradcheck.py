"""Finite-difference verification of analytic gradients.

Compares tape gradients against central differences, parameter by
parameter. Meant for deterministic model fragments (dropout off).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import no_grad

# Relative errors are measured against max(|analytic|, |numeric|, REL_FLOOR)
# so that genuinely-zero gradients are not failed on finite-difference noise.
REL_FLOOR = 1e-6


@dataclass
class GradCheckEntry:
    name: str
    max_rel_err: float
    worst_index: int
    analytic: float
    numeric: float
    passed: bool


@dataclass
class GradCheckReport:
    step: float
    tolerance: float
    entries: list[GradCheckEntry] = field(default_factory=list)

    @property
    def passed(self):
        return all(e.passed for e in self.entries)

    @property
    def max_rel_err(self):
        return max((e.max_rel_err for e in self.entries), default=0.0)

    def summary(self):
        lines = [f"gradient check (h={self.step:g}, tol={self.tolerance:g})"]
        for e in self.entries:
            status = "ok  " if e.passed else "FAIL"
            lines.append(f"  {status} {e.name}: max_rel_err={e.max_rel_err:.3e}")
        return "\n".join(lines)


def check_gradients(loss_fn, params, step=1e-4, tolerance=1e-4,
                    max_elements_per_param=None, rng=None):
    """Check d(loss)/d(param) for each parameter against central differences.

    `loss_fn` must rebuild the graph and return a scalar Tensor on every
    call; it is re-evaluated 2x per sampled element, so cap the work with
    `max_elements_per_param` for wide layers.
    """
    if step <= 0:
        raise ValueError(f"finite-difference step must be positive, got {step}")
    params = list(params)
    for p in params:
        p.tensor.zero_grad()
    loss = loss_fn()
    loss.backward()
    analytic = {id(p): p.tensor.grad.copy() for p in params}

    if rng is None:
        rng = np.random.default_rng(0)

    report = GradCheckReport(step=step, tolerance=tolerance)
    for p in params:
        flat = p.tensor.data.reshape(-1)
        n = flat.size
        if max_elements_per_param is not None and n > max_elements_per_param:
            idx = rng.choice(n, size=max_elements_per_param, replace=False)
        else:
            idx = np.arange(n)
        a_flat = analytic[id(p)].reshape(-1)
        worst = (0.0, 0, 0.0, 0.0)
        with no_grad():
            for i in idx:
                orig = flat[i]
                flat[i] = orig + step
                f_plus = loss_fn().item()
                flat[i] = orig - step
                f_minus = loss_fn().item()
                flat[i] = orig
                num = (f_plus - f_minus) / (2.0 * step)
                ana = a_flat[i]
                rel = abs(ana - num) / max(abs(ana), abs(num), REL_FLOOR)
                if rel > worst[0]:
                    worst = (rel, int(i), float(ana), float(num))
        report.entries.append(GradCheckEntry(
            name=p.name, max_rel_err=worst[0], worst_index=worst[1],
            analytic=worst[2], numeric=worst[3], passed=worst[0] <= tolerance))
    return report
