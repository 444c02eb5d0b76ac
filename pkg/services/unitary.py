"""
Exact complex-matrix algebra for directional couplers, phase shifters and
their composition into multi-guide circuits.

Propagation order: a layout lists elements in the order light meets them,
so each later element multiplies the accumulated matrix on the left.
Guide indices are 1-based.
"""

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from models.circuit import CircuitLayout, ElementKind, ElementPlacement
from models.errors import InvalidArgumentError
from settings import settings


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModeUnitary:
    """Transfer matrix of a lossless circuit over ``dim`` guides."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise InvalidArgumentError(f"expected a non-empty square matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise InvalidArgumentError("matrix entries must be finite")
        deviation = unitarity_deviation(m)
        if deviation > settings.unitarity_tol:
            raise InvalidArgumentError(f"matrix is not unitary (max |U†U - I| = {deviation:.3e})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def dagger(self) -> "ModeUnitary":
        return ModeUnitary(self.matrix.conj().T)

    def __matmul__(self, other: "ModeUnitary") -> "ModeUnitary":
        if other.dim != self.dim:
            raise InvalidArgumentError(f"cannot multiply {self.dim}- and {other.dim}-guide matrices")
        return ModeUnitary(self.matrix @ other.matrix)

    def with_global_phase(self, chi: float) -> "ModeUnitary":
        """Return e^{i chi} times this matrix."""
        return ModeUnitary(np.exp(1j * chi) * self.matrix)

    def block(self, modes: Sequence[int]) -> np.ndarray:
        """Sub-matrix on the given 1-based guides (rows and columns)."""
        index = [m - 1 for m in modes]
        return self.matrix[np.ix_(index, index)]

    @classmethod
    def identity(cls, n: int) -> "ModeUnitary":
        if n < 1:
            raise InvalidArgumentError(f"dimension must be positive, got {n}")
        return cls(np.eye(n, dtype=np.complex128))


def unitarity_deviation(matrix: np.ndarray) -> float:
    """Largest entry of |U†U - I|."""
    n = matrix.shape[0]
    return float(np.max(np.abs(matrix.conj().T @ matrix - np.eye(n))))


def _require_finite(name: str, value: float) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError) as e:
        raise InvalidArgumentError(f"{name} must be a real number, got {value!r}") from e
    if not math.isfinite(value):
        raise InvalidArgumentError(f"{name} must be finite, got {value}")
    return value


def coupler(theta: float) -> ModeUnitary:
    """Synchronous directional coupler X_theta with theta = kappa * L."""
    theta = _require_finite("theta", theta)
    c, s = math.cos(theta), math.sin(theta)
    return ModeUnitary(np.array([[c, 1j * s], [1j * s, c]]))


def phase_shifter(phi: float) -> ModeUnitary:
    """Phase shifter Z_phi = diag(e^{-i phi/2}, e^{i phi/2})."""
    phi = _require_finite("phi", phi)
    return ModeUnitary(np.diag([np.exp(-0.5j * phi), np.exp(0.5j * phi)]))


def embed(u: ModeUnitary, modes: tuple[int, int], n: int) -> ModeUnitary:
    """Lift a 2x2 element onto guides ``modes`` of an ``n``-guide circuit."""
    if u.dim != 2:
        raise InvalidArgumentError(f"only 2x2 elements can be embedded, got {u.dim}x{u.dim}")
    i, j = modes
    if i == j or not (1 <= i <= n and 1 <= j <= n):
        raise InvalidArgumentError(f"modes {modes} are not a distinct pair within 1..{n}")
    full = np.eye(n, dtype=np.complex128)
    a, b = i - 1, j - 1
    full[a, a], full[a, b] = u.matrix[0, 0], u.matrix[0, 1]
    full[b, a], full[b, b] = u.matrix[1, 0], u.matrix[1, 1]
    return ModeUnitary(full)


def element_matrix(element: ElementPlacement) -> ModeUnitary:
    build = coupler if element.kind is ElementKind.COUPLER else phase_shifter
    return build(element.parameter)


def compose(layout: CircuitLayout) -> ModeUnitary:
    """Transfer matrix of a layout; an empty layout is the identity."""
    total = ModeUnitary.identity(layout.dim)
    for element in layout.elements:
        if max(element.modes) > layout.dim:
            raise InvalidArgumentError(
                f"element on modes {element.modes} does not fit {layout.dim} guides"
            )
        total = embed(element_matrix(element), element.modes, layout.dim) @ total
    logger.debug(f"Composed {len(layout.elements)} elements over {layout.dim} guides")
    return total


def apply(u: ModeUnitary, amplitudes: Sequence[complex]) -> np.ndarray:
    """Propagate an amplitude vector through ``u``."""
    vector = np.asarray(amplitudes, dtype=np.complex128)
    if vector.ndim != 1 or vector.shape[0] != u.dim:
        raise InvalidArgumentError(
            f"vector of length {vector.shape[0] if vector.ndim == 1 else vector.shape} "
            f"does not match a {u.dim}-guide circuit"
        )
    return u.matrix @ vector


@dataclass(frozen=True)
class PhaseComparison:
    equal: bool
    phase: float


def equal_up_to_global_phase(a: ModeUnitary, b: ModeUnitary, tol: float = 1e-12) -> PhaseComparison:
    """
    Check a = e^{i chi} b entrywise within ``tol``.

    chi is read from the ratio at the largest-magnitude entry of ``b`` and
    reported in (-pi, pi].
    """
    if a.dim != b.dim:
        return PhaseComparison(equal=False, phase=0.0)
    flat_index = int(np.argmax(np.abs(b.matrix)))
    row, col = divmod(flat_index, b.dim)
    ratio = a.matrix[row, col] / b.matrix[row, col]
    chi = float(np.angle(ratio))
    if chi <= -math.pi:
        chi += 2 * math.pi
    deviation = float(np.max(np.abs(a.matrix - np.exp(1j * chi) * b.matrix)))
    return PhaseComparison(equal=deviation <= tol, phase=chi)
