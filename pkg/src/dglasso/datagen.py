"""Synthetic ground truth and time series.

Ground-truth pairs ``(A*, P*)`` are block diagonal. Each transition block is
an order-one auto-regressive pattern ``rho ** |sigma(n) - l|`` with a random
row permutation ``sigma``; each precision block is a Householder similarity
of ``diag(c ** ((i - 1) / 2))``, whose condition number is exactly ``c`` for
blocks of size 3.

Random streams
--------------
All draws come from ``numpy.random.Philox`` generators. A master seed is
turned into a ``SeedSequence`` and spawned into three children, in order:
``truth``, ``train`` and ``test``. The ``truth`` child is spawned again into
``transition`` and ``precision``. Inside each block the draw order is
``rho`` then the permutation (transition) and ``p`` (precision), block by
block from the top-left.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import block_diag

from .errors import DegeneratePVector
from .lgssm import ObservationModel, TimeSeries, clip_spectral, simulate_states, spd_inverse

PRESET_COND_LOG10 = {"A": 0.1, "B": 0.2, "C": 0.5, "D": 1.0}


@dataclass(frozen=True)
class DatasetSpec:
    """Recipe for one synthetic problem.

    ``sigma_R`` and ``sigma_0`` are standard deviations: the observation
    covariance is ``sigma_R**2 I`` and the prior covariance ``sigma_0**2 I``.
    """

    Nx: int = 9
    block_sizes: tuple = (3, 3, 3)
    cond_log10: float = 0.1
    spectral_cap: float = 0.99
    K: int = 1000
    sigma_R: float = 0.1
    sigma_0: float = 1e-4
    sparsity_keep: Optional[int] = None
    seed: int = 0
    name: str = "custom"

    def __post_init__(self):
        blocks = tuple(int(b) for b in self.block_sizes)
        object.__setattr__(self, "block_sizes", blocks)
        if any(b <= 0 for b in blocks) or sum(blocks) != self.Nx:
            raise ValueError(f"block sizes {blocks} must be positive and sum to Nx={self.Nx}")
        if not 0.0 < self.spectral_cap <= 1.0:
            raise ValueError("spectral_cap must lie in (0, 1]")
        if self.cond_log10 < 0:
            raise ValueError("cond_log10 must be nonnegative")
        if self.K < 1 or self.sigma_R <= 0 or self.sigma_0 <= 0:
            raise ValueError("K, sigma_R and sigma_0 must be positive")
        if self.sparsity_keep is not None and not 0 < self.sparsity_keep <= sum(b * b for b in blocks):
            raise ValueError("sparsity_keep must be between 1 and the number of in-block entries")

    @classmethod
    def preset(cls, name: str, seed: int = 0, **overrides) -> "DatasetSpec":
        key = name.upper()
        if key not in PRESET_COND_LOG10:
            raise ValueError(f"unknown preset {name!r}; expected one of A, B, C, D")
        return cls(cond_log10=PRESET_COND_LOG10[key], seed=seed, name=key, **overrides)

    @property
    def cond(self) -> float:
        return 10.0 ** self.cond_log10

    def observation_model(self) -> ObservationModel:
        n = self.Nx
        return ObservationModel(
            H=np.eye(n),
            R=self.sigma_R ** 2 * np.eye(n),
            mu0=np.ones(n),
            Sigma0=self.sigma_0 ** 2 * np.eye(n),
        )

    def to_dict(self) -> dict:
        return {
            "Nx": self.Nx,
            "block_sizes": list(self.block_sizes),
            "cond_log10": self.cond_log10,
            "spectral_cap": self.spectral_cap,
            "K": self.K,
            "sigma_R": self.sigma_R,
            "sigma_0": self.sigma_0,
            "sparsity_keep": self.sparsity_keep,
            "seed": self.seed,
            "name": self.name,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSpec":
        return cls(**{k: (tuple(v) if k == "block_sizes" else v) for k, v in d.items()})


@dataclass(frozen=True)
class GroundTruth:
    A_star: np.ndarray
    P_star: np.ndarray
    Q_star: np.ndarray
    spec: DatasetSpec


def make_rng(seed) -> np.random.Generator:
    """Philox generator from an int seed or a ``SeedSequence``."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(ss))


def child_seed(parent, i: int) -> np.random.SeedSequence:
    """The ``i``-th child of ``parent``, independent of earlier ``spawn`` calls."""
    if not isinstance(parent, np.random.SeedSequence):
        parent = np.random.SeedSequence(parent)
    return np.random.SeedSequence(parent.entropy, spawn_key=tuple(parent.spawn_key) + (i,))


def spawn_seeds(seed, n: int) -> list:
    return [child_seed(seed, i) for i in range(n)]


def block_mask(block_sizes: Sequence[int]) -> np.ndarray:
    return block_diag(*[np.ones((b, b)) for b in block_sizes]).astype(bool)


def ar_block(rho: float, perm: np.ndarray) -> np.ndarray:
    """``B[n, l] = rho ** |perm[n] - l|`` (with ``0 ** 0 = 1``)."""
    n = len(perm)
    return float(rho) ** np.abs(np.asarray(perm)[:, None] - np.arange(n)[None, :]).astype(float)


def gen_transition(spec: DatasetSpec, rng: np.random.Generator) -> np.ndarray:
    blocks = []
    for b in spec.block_sizes:
        rho = rng.uniform(0.0, 1.0)
        perm = rng.permutation(b)
        # clip block by block so off-block entries stay exactly zero
        blocks.append(clip_spectral(ar_block(rho, perm), spec.spectral_cap))
    A = block_diag(*blocks)
    if spec.sparsity_keep is not None:
        A = sparsify(A, spec.sparsity_keep, spec.spectral_cap)
    return A


def sparsify(A: np.ndarray, keep: int, cap: float) -> np.ndarray:
    """Keep the ``keep`` largest-magnitude entries, rescale to spectral norm ``cap``.

    Ties are broken by row-major position so the result is deterministic.
    """
    flat = np.abs(A).ravel()
    order = np.lexsort((np.arange(flat.size), -flat))
    out = np.zeros_like(A).ravel()
    idx = order[:keep]
    out[idx] = A.ravel()[idx]
    out = out.reshape(A.shape)
    nrm = np.linalg.norm(out, 2)
    return out * (cap / nrm) if nrm > 0 else out


def householder(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    nrm2 = float(p @ p)
    if np.sqrt(nrm2) < 1e-12:
        raise DegeneratePVector("reflector vector is (numerically) zero")
    return np.eye(p.size) - 2.0 * np.outer(p, p) / nrm2


def precision_block(p: np.ndarray, c: float) -> np.ndarray:
    n = len(p)
    Hh = householder(p)
    B = Hh @ np.diag(c ** (np.arange(n) / 2.0)) @ Hh
    return 0.5 * (B + B.T)


def gen_precision(spec: DatasetSpec, rng: np.random.Generator) -> np.ndarray:
    blocks = []
    for b in spec.block_sizes:
        while True:
            p = rng.uniform(-1.0, 1.0, size=b)
            try:
                blocks.append(precision_block(p, spec.cond))
                break
            except DegeneratePVector:
                continue
    return block_diag(*blocks)


def make_truth(spec: DatasetSpec, seed=None) -> GroundTruth:
    """Ground truth from ``spec`` using the ``truth`` stream of its seed."""
    ss = seed if seed is not None else spawn_seeds(spec.seed, 3)[0]
    s_tr, s_pr = spawn_seeds(ss, 2)
    A = gen_transition(spec, make_rng(s_tr))
    P = gen_precision(spec, make_rng(s_pr))
    return GroundTruth(A, P, spd_inverse(P, "P*"), spec)


def simulate(gt: GroundTruth, obs: ObservationModel, K: int, rng: np.random.Generator) -> TimeSeries:
    X, Y = simulate_states(gt.A_star, gt.Q_star, obs, K, rng)
    return TimeSeries(Y, X)


def make_dataset(name, seed: Optional[int] = None, **overrides):
    """Build ``(GroundTruth, train, test)`` for a preset name or a ``DatasetSpec``.

    Train and test share the ground truth and use independent streams.
    """
    if isinstance(name, DatasetSpec):
        if seed is not None:
            overrides["seed"] = seed
        spec = replace(name, **overrides) if overrides else name
    else:
        spec = DatasetSpec.preset(name, seed=0 if seed is None else seed, **overrides)
    truth_ss, train_ss, test_ss = spawn_seeds(spec.seed, 3)
    gt = make_truth(spec, truth_ss)
    obs = spec.observation_model()
    train = simulate(gt, obs, spec.K, make_rng(train_ss))
    test = simulate(gt, obs, spec.K, make_rng(test_ss))
    return gt, train, test
