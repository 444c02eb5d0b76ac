"""
Single-photon spatial-mode states, the X/Y bases, the weak-coherent
approximation, detection probabilities and seeded click sampling.
"""

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from models.errors import DegenerateInputError, InvalidArgumentError
from models.states import ClickCounts, MubBasis, MubElement, MubLabel, StatePayload
from services.unitary import ModeUnitary, apply
from settings import settings


logger = logging.getLogger(__name__)

RNG_ALGORITHM = "PCG64"

_NORM_TOL = 1e-12

# Relative amplitude on the second guide of the pair
_SECOND_AMPLITUDE = {
    MubElement.D: 1.0,
    MubElement.A: -1.0,
    MubElement.L: 1j,
    MubElement.R: -1j,
}


@dataclass(frozen=True)
class PhotonState:
    """One photon coherently spread over ``dim`` guides (a 1-qudit)."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=np.complex128)
        if amps.ndim != 1 or amps.shape[0] < 1:
            raise InvalidArgumentError(f"amplitudes must be a non-empty vector, got shape {amps.shape}")
        if not np.all(np.isfinite(amps)):
            raise InvalidArgumentError("amplitudes must be finite")
        norm = float(np.sum(np.abs(amps) ** 2))
        if abs(norm - 1.0) > _NORM_TOL:
            raise InvalidArgumentError(f"state is not normalized (sum |c|^2 = {norm:.15g})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def with_global_phase(self, chi: float) -> "PhotonState":
        return PhotonState(np.exp(1j * chi) * self.amplitudes)

    def support(self, tol: float = 1e-12) -> set[int]:
        """1-based guides carrying non-negligible amplitude."""
        return {int(k) + 1 for k in np.flatnonzero(np.abs(self.amplitudes) > tol)}

    def to_payload(self) -> StatePayload:
        return StatePayload(
            dim=self.dim,
            re=[float(x) for x in self.amplitudes.real],
            im=[float(x) for x in self.amplitudes.imag],
        )

    @classmethod
    def from_payload(cls, payload: StatePayload) -> "PhotonState":
        return cls(np.asarray(payload.re) + 1j * np.asarray(payload.im))


@dataclass(frozen=True)
class WeakCoherentState:
    """Multimode coherent state |alpha_1 ... alpha_N> with |alpha_j| << 1."""

    alphas: np.ndarray

    def __post_init__(self):
        alphas = np.array(self.alphas, dtype=np.complex128)
        if alphas.ndim != 1 or alphas.shape[0] < 1:
            raise InvalidArgumentError("alphas must be a non-empty vector")
        if not np.all(np.isfinite(alphas)):
            raise InvalidArgumentError("alphas must be finite")
        alphas.setflags(write=False)
        object.__setattr__(self, "alphas", alphas)

    @property
    def dim(self) -> int:
        return self.alphas.shape[0]

    @property
    def mean_photon_number(self) -> float:
        return float(np.sum(np.abs(self.alphas) ** 2))

    @classmethod
    def two_beam(cls, p0: float, epsilon: float) -> "WeakCoherentState":
        """Equal-power beams with relative phase ``epsilon`` on the second guide."""
        return cls(np.array([p0, p0 * np.exp(1j * epsilon)]))


def _check_mode(j: int, n: int) -> None:
    if n < 1:
        raise InvalidArgumentError(f"dimension must be positive, got {n}")
    if not 1 <= j <= n:
        raise InvalidArgumentError(f"mode {j} is outside 1..{n}")


def basis_state(j: int, n: int) -> PhotonState:
    """Photon localized in guide ``j``."""
    _check_mode(j, n)
    amps = np.zeros(n, dtype=np.complex128)
    amps[j - 1] = 1.0
    return PhotonState(amps)


def mub_state(label: MubLabel, pair: tuple[int, int], n: int) -> PhotonState:
    """X or Y basis state on guides ``pair`` = (j, j')."""
    j, j_prime = pair
    _check_mode(j, n)
    _check_mode(j_prime, n)
    if j == j_prime:
        raise InvalidArgumentError(f"pair {pair} must name two distinct guides")
    amps = np.zeros(n, dtype=np.complex128)
    amps[j - 1] = 1.0 / np.sqrt(2.0)
    amps[j_prime - 1] = _SECOND_AMPLITUDE[label.element] / np.sqrt(2.0)
    return PhotonState(amps)


def single_photon_approx(w: WeakCoherentState) -> PhotonState:
    """
    Single-photon state conditioned on a detection.

    The vacuum term is dropped by post-selection; relative phases survive.
    """
    norm = np.sqrt(w.mean_photon_number)
    if norm == 0.0:
        raise DegenerateInputError("weak coherent state has no excitation in any guide")
    return PhotonState(w.alphas / norm)


def detection_probabilities(state: PhotonState, u: ModeUnitary) -> np.ndarray:
    """Output-guide detection probabilities |(U c)_j|^2."""
    if state.dim != u.dim:
        raise InvalidArgumentError(f"{state.dim}-guide state does not match a {u.dim}-guide circuit")
    return np.abs(apply(u, state.amplitudes)) ** 2


def _checked_distribution(probs: Sequence[float]) -> np.ndarray:
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.shape[0] < 1 or not np.all(np.isfinite(p)):
        raise InvalidArgumentError("probabilities must be a non-empty finite vector")
    if np.any(p < 0.0):
        raise InvalidArgumentError(f"probabilities must be non-negative, got {p.tolist()}")
    total = float(p.sum())
    if abs(total - 1.0) > settings.probability_sum_tol:
        raise InvalidArgumentError(f"probabilities sum to {total:.12g}, expected 1")
    return p / total


def _generator(seed: int) -> np.random.Generator:
    if seed < 0:
        raise InvalidArgumentError(f"seed must be non-negative, got {seed}")
    return np.random.Generator(np.random.PCG64(seed))


def sample_clicks(probs: Sequence[float], trials: int, seed: int) -> ClickCounts:
    """Seeded multinomial draw of detector clicks."""
    if trials < 1:
        raise InvalidArgumentError(f"trials must be positive, got {trials}")
    p = _checked_distribution(probs)
    counts = _generator(seed).multinomial(trials, p)
    logger.debug(f"Sampled {trials} clicks over {p.shape[0]} outputs (seed={seed})")
    return ClickCounts(counts=[int(c) for c in counts], trials=trials, seed=seed, rng=RNG_ALGORITHM)


def sample_outcomes(probs: Sequence[float], trials: int, seed: int) -> np.ndarray:
    """Seeded sequence of 0-based output indices, one per trial."""
    if trials < 1:
        raise InvalidArgumentError(f"trials must be positive, got {trials}")
    p = _checked_distribution(probs)
    return _generator(seed).choice(p.shape[0], size=trials, p=p)
