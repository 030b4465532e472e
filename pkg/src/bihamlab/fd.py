"""Central finite-difference stencils used as independent derivative oracles."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

# weights for f(+k h) - f(-k h), k = 1, 2, ...
_STENCILS = {
    2: ((1.0,), 2.0),
    4: ((8.0, -1.0), 12.0),
    6: ((45.0, -9.0, 1.0), 60.0),
}


@dataclass(frozen=True)
class FDScheme:
    step: float = 1e-5
    order: int = 2

    def __post_init__(self):
        if self.order not in _STENCILS:
            raise ValueError(f"unsupported stencil order {self.order}; use one of {sorted(_STENCILS)}")
        if not self.step > 0:
            raise ValueError("finite-difference step must be positive")

    def derivative(self, f: Callable[[float], float], h: float | None = None) -> float:
        """d/dt f(t) at t = 0."""
        h = self.step if h is None else h
        weights, denom = _STENCILS[self.order]
        acc = 0.0
        for k, w in enumerate(weights, start=1):
            acc += w * (f(k * h) - f(-k * h))
        return acc / (denom * h)


# single-level outer derivatives (step 1e-5, second order)
DEFAULT_FD = FDScheme(1e-5, 2)
# nested finite differences: a wider sixth-order stencil keeps roundoff from compounding
NESTED_FD = FDScheme(1e-2, 6)
# derived-bracket values that are themselves differentiated again (Jacobi of the pencil)
INNER_FD = FDScheme(1e-3, 4)
