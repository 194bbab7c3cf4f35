"""Central-difference gradient checking against the reverse-mode tape."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..errors import NonDeterministicError
from .tensor import Tensor


@dataclass
class InputReport:
    name: str
    n_checked: int
    max_abs_err: float
    max_rel_err: float


@dataclass
class GradcheckReport:
    max_rel_err: float
    inputs: list = field(default_factory=list)

    def table(self) -> str:
        lines = [f"{'input':<40} {'checked':>8} {'max_abs':>12} {'max_rel':>12}"]
        for r in self.inputs:
            lines.append(f"{r.name:<40} {r.n_checked:>8d} {r.max_abs_err:>12.3e} {r.max_rel_err:>12.3e}")
        return "\n".join(lines)


def rel_err(a, b) -> np.ndarray:
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)


def _scalarize(out: Tensor, proj: np.ndarray | None) -> Tensor:
    if out.size == 1:
        return out.sum()
    return (out * proj).sum()


def gradcheck(
    fn: Callable[..., Tensor],
    inputs: Sequence[Tensor],
    eps: float = 1e-5,
    names: Sequence[str] | None = None,
    max_checks: int | None = None,
    seed: int = 0,
) -> GradcheckReport:
    """Compare reverse-mode gradients of ``fn(*inputs)`` with central differences.

    Non-scalar outputs are reduced with a fixed random projection so every
    output element contributes. ``max_checks`` caps the number of sampled
    coordinates per input (all coordinates when None). Inputs are perturbed
    in place and restored afterwards.
    """
    rng = np.random.default_rng(seed)
    names = list(names) if names is not None else [f"input{i}" for i in range(len(inputs))]

    first = fn(*inputs)
    second = fn(*inputs)
    if not np.array_equal(first.data, second.data):
        raise NonDeterministicError("fn returned different outputs for identical inputs")
    proj = None if first.size == 1 else rng.standard_normal(first.shape).astype(first.data.dtype)

    for t in inputs:
        t.grad = None
    loss = _scalarize(fn(*inputs), proj)
    loss.backward()
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in inputs]

    def f() -> float:
        return float(_scalarize(fn(*inputs), proj).data)

    report = GradcheckReport(max_rel_err=0.0)
    for t, name, ga in zip(inputs, names, analytic):
        flat = t.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_checks is not None and flat.size > max_checks:
            idx = np.sort(rng.choice(flat.size, size=max_checks, replace=False))
        worst_abs = worst_rel = 0.0
        for i in idx:
            orig = flat[i]
            flat[i] = orig + eps
            fp = f()
            flat[i] = orig - eps
            fm = f()
            flat[i] = orig
            num = (fp - fm) / (2 * eps)
            a = ga.reshape(-1)[i]
            worst_abs = max(worst_abs, abs(a - num))
            worst_rel = max(worst_rel, float(rel_err(a, num)))
        report.inputs.append(InputReport(name, len(idx), float(worst_abs), worst_rel))
        report.max_rel_err = max(report.max_rel_err, worst_rel)
    return report
