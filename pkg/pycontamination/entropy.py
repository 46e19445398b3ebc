"""
Shannon entropies of discrete joint distributions, in bits.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from pycontamination.dataset import to_batch
from pycontamination.defense import party_index
from pycontamination.nn_core import MlpModel, forward

logger = logging.getLogger(__name__)

PRECONDITION_TOLERANCE = 1e-10
LEMMA_TOLERANCE = 1e-9


class LemmaPreconditionError(ValueError):
    """The joint does not make U a function of V."""


@dataclass(frozen=True)
class DiscreteJoint:
    """Probability tensor with one named axis per variable."""

    probs: np.ndarray
    names: tuple[str, ...]

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=np.float64)
        names = tuple(self.names)
        if probs.ndim != len(names):
            raise ValueError(f"{probs.ndim} axes but {len(names)} variable names")
        if len(set(names)) != len(names):
            raise ValueError(f"variable names must be unique: {names}")
        if (probs < 0).any():
            raise ValueError("probabilities must be non-negative")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {probs.sum()!r}, expected 1")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "names", names)

    @classmethod
    def from_counts(cls, counts: np.ndarray, names: Sequence[str]) -> "DiscreteJoint":
        counts = np.asarray(counts, dtype=np.float64)
        total = counts.sum()
        if total <= 0:
            raise ValueError("counts must have a positive total")
        return cls(counts / total, tuple(names))

    @classmethod
    def from_samples(cls, columns: dict[str, np.ndarray]) -> "DiscreteJoint":
        """Empirical joint of integer-coded samples, one array per variable."""
        names = tuple(columns)
        codes = [np.asarray(columns[n], dtype=np.int64) for n in names]
        shape = tuple(int(c.max()) + 1 if c.size else 1 for c in codes)
        counts = np.zeros(shape)
        np.add.at(counts, tuple(codes), 1.0)
        return cls.from_counts(counts, names)

    def axes(self, variables: Sequence[str]) -> tuple[int, ...]:
        missing = [v for v in variables if v not in self.names]
        if missing:
            raise ValueError(f"unknown variables {missing}, joint has {self.names}")
        return tuple(self.names.index(v) for v in variables)

    def marginal(self, variables: Sequence[str]) -> np.ndarray:
        keep = set(self.axes(variables))
        drop = tuple(i for i in range(self.probs.ndim) if i not in keep)
        return self.probs.sum(axis=drop)


def _as_list(variables: str | Sequence[str]) -> list[str]:
    return [variables] if isinstance(variables, str) else list(variables)


def entropy(joint: DiscreteJoint, variables: str | Sequence[str]) -> float:
    """H(variables); 0 log 0 counts as 0.

    Example:
        uniform over 4 outcomes -> 2.0
    """
    variables = _as_list(variables)
    if not variables:
        return 0.0
    p = joint.marginal(variables).ravel()
    p = p[p > 0]
    return float(max(0.0, -np.sum(p * np.log2(p))))


def conditional_entropy(
    joint: DiscreteJoint,
    target: str | Sequence[str],
    given: str | Sequence[str],
) -> float:
    """H(target | given) = H(target, given) - H(given)."""
    target, given = _as_list(target), _as_list(given)
    both = target + [v for v in given if v not in target]
    return max(0.0, entropy(joint, both) - entropy(joint, given))


def lemma_check(joint: DiscreteJoint, u: str = "U", v: str = "V", w: str = "W") -> bool:
    """If U is a function of V, conditioning W on V is at least as informative as on U.

    Returns whether H(W|V) <= H(W|U) holds (up to 1e-9).
    """
    h_u_given_v = conditional_entropy(joint, u, v)
    if h_u_given_v > PRECONDITION_TOLERANCE:
        raise LemmaPreconditionError(
            f"H({u}|{v}) = {h_u_given_v:.3e}, so {u} is not a function of {v}"
        )
    return conditional_entropy(joint, w, v) <= conditional_entropy(joint, w, u) + LEMMA_TOLERANCE


def coarsening_joint(
    rng: np.random.Generator, n_v: int, n_u: int, n_w: int
) -> DiscreteJoint:
    """Random joint over (U, V, W) with V arbitrary, U = m(V) and W | V arbitrary."""
    p_v = rng.dirichlet(np.ones(n_v))
    mapping = rng.integers(n_u, size=n_v)
    w_given_v = rng.dirichlet(np.ones(n_w), size=n_v)
    probs = np.zeros((n_u, n_v, n_w))
    probs[mapping, np.arange(n_v), :] = p_v[:, None] * w_given_v
    return DiscreteJoint(probs / probs.sum(), ("U", "V", "W"))


def discretize_outputs(logprobs: np.ndarray, bins: int | None = None) -> np.ndarray:
    """Predicted class, or the top probability cut into ``bins`` equal-width bins."""
    if bins is None:
        return logprobs.argmax(axis=1)
    if bins < 1:
        raise ValueError(f"bins must be positive, got {bins}")
    top = np.exp(logprobs.max(axis=1))
    return np.minimum((top * bins).astype(np.int64), bins - 1)


def pivot_diagnostic(
    f: MlpModel, pooled: Any, bins: int | None = None
) -> tuple[float, float]:
    """H(Q) and H(Q | F) for party id Q and the discretized output F of f."""
    parties, index = party_index(pooled.party_ids)
    if parties.size < 2:
        raise ValueError("pivot diagnostic needs at least two parties")
    outputs = discretize_outputs(forward(f, to_batch(pooled).features), bins)
    joint = DiscreteJoint.from_samples({"Q": index, "F": outputs})
    h_q = entropy(joint, "Q")
    h_q_given_f = conditional_entropy(joint, "Q", "F")
    logger.debug(f"pivot diagnostic: H(Q)={h_q:.4f} H(Q|F)={h_q_given_f:.4f}")
    return h_q, h_q_given_f
