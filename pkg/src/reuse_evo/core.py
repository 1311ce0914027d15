"""Domain types, default hyperparameters, ordering and RNG streams."""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np


class ConfigError(ValueError):
    """Raised for invalid configuration values."""


# ---------------------------------------------------------------------------
# RNG streams


def _tag_key(tag: str) -> int:
    return zlib.crc32(tag.encode("utf-8"))


def derive_seed(seed: int, tag: str, *keys: int) -> int:
    """Child 64-bit seed for the stream ``(tag, *keys)`` under root ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(_tag_key(tag), *(int(k) for k in keys)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def stream(seed: int, tag: str, *keys: int) -> np.random.Generator:
    """Independent generator keyed by purpose tag and integer keys.

    Streams never depend on call order, so parallel evaluation cannot change
    results.
    """
    return np.random.default_rng(
        np.random.SeedSequence(int(seed), spawn_key=(_tag_key(tag), *(int(k) for k in keys)))
    )


# ---------------------------------------------------------------------------
# Types


def _frozen_array(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} must be finite")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class LatentPoint:
    coords: np.ndarray
    id: int
    birth_iteration: int = 0
    operator: str = "init"
    parents: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "coords", _frozen_array(self.coords, "coords"))
        if self.birth_iteration < 0:
            raise ConfigError("birth_iteration must be non-negative")

    @property
    def dim(self) -> int:
        return self.coords.shape[0]


@dataclass(frozen=True, eq=False)
class Candidate:
    """A decoded synthetic molecule.

    ``latent`` is the decoded position (origin latent plus decode spread) and
    ``base_affinity`` the noiseless per-target utility there. Stage estimates
    live in ``affinity`` keyed by ``(stage_index, target)``.
    """

    id: int
    origin_latent: int
    features: int
    latent: np.ndarray
    base_affinity: tuple[float, float]
    qed_like: float
    sa_like: float
    valid: bool = True
    affinity: Mapping[tuple[int, str], float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "latent", _frozen_array(self.latent, "latent"))
        if not (0.0 <= self.qed_like <= 1.0 and 0.0 <= self.sa_like <= 1.0):
            raise ConfigError("qed_like and sa_like must lie in [0, 1]")
        if not 0 <= self.features < 2**64:
            raise ConfigError("features must be a 64-bit fingerprint")

    def stage_affinity(self, stage_index: int) -> Optional[tuple[float, float]]:
        a = self.affinity.get((stage_index, "a"))
        b = self.affinity.get((stage_index, "b"))
        if a is None or b is None:
            return None
        return a, b

    def with_affinity(self, stage_index: int, a: float, b: float) -> "Candidate":
        aff = dict(self.affinity)
        aff[(stage_index, "a")] = float(a)
        aff[(stage_index, "b")] = float(b)
        return Candidate(
            id=self.id,
            origin_latent=self.origin_latent,
            features=self.features,
            latent=self.latent,
            base_affinity=self.base_affinity,
            qed_like=self.qed_like,
            sa_like=self.sa_like,
            valid=self.valid,
            affinity=aff,
        )


@dataclass(frozen=True)
class LandscapeSpec:
    center: tuple[float, ...]
    scale: float = 1.0
    noise_sigma: float = 0.0
    kind: str = "quadratic_bowl"

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if self.scale <= 0:
            raise ConfigError("landscape scale must be > 0")
        if self.noise_sigma < 0:
            raise ConfigError("landscape noise_sigma must be >= 0")
        if self.kind not in ("quadratic_bowl", "multi_basin"):
            raise ConfigError(f"unknown landscape kind {self.kind!r}")


@dataclass(frozen=True)
class PriorSpec:
    mode: str = "gaussian"
    anchors: tuple[tuple[float, ...], ...] = ()
    sigma: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "anchors", tuple(tuple(float(x) for x in a) for a in self.anchors))
        if self.mode not in ("gaussian", "anchor_mixture"):
            raise ConfigError(f"unknown prior mode {self.mode!r}")
        if self.sigma < 0:
            raise ConfigError("prior sigma must be >= 0")


@dataclass(frozen=True)
class TaskContext:
    """Target pair definition.

    ``decode_sigma``, ``invalid_prob`` and ``chem_seed`` parametrise the
    synthetic generator that stands in for the frozen model.
    """

    pair_id: str
    landscape_a: LandscapeSpec
    landscape_b: LandscapeSpec
    prior: PriorSpec = PriorSpec()
    w_a: float = 1.0
    w_b: float = 1.0
    lambda_bal: float = 0.25
    decode_sigma: float = 0.5
    invalid_prob: float = 0.02
    chem_seed: int = 0

    def __post_init__(self):
        if self.w_a <= 0 or self.w_b <= 0:
            raise ConfigError("w_a and w_b must be > 0")
        if self.lambda_bal < 0:
            raise ConfigError("lambda_bal must be >= 0")
        if len(self.landscape_a.center) != len(self.landscape_b.center):
            raise ConfigError("landscape centers differ in length")
        if self.decode_sigma < 0:
            raise ConfigError("decode_sigma must be >= 0")
        if not 0.0 <= self.invalid_prob <= 1.0:
            raise ConfigError("invalid_prob must lie in [0, 1]")

    @property
    def dim(self) -> int:
        return len(self.landscape_a.center)


@dataclass(frozen=True)
class EvaluatorStage:
    stage_index: int
    noise_sigma: float
    cost_units: float

    def __post_init__(self):
        if self.stage_index < 1:
            raise ConfigError("stage_index starts at 1")
        if self.noise_sigma < 0:
            raise ConfigError("stage noise_sigma must be >= 0")
        if self.cost_units <= 0:
            raise ConfigError("stage cost_units must be > 0")


DEFAULT_FUNNEL = (
    EvaluatorStage(1, noise_sigma=0.5, cost_units=1.0),
    EvaluatorStage(2, noise_sigma=0.0, cost_units=8.0),
)


@dataclass(frozen=True)
class SearchConfig:
    B: int = 4
    B_par: int = 3
    B_off: int = 4
    T: int = 3
    d_z: int = 10
    alpha_mut: float = 0.40
    alpha_cross: float = 0.35
    alpha_imm: float = 0.25
    sigma_mut: float = 0.42
    gamma_mut: float = 0.82
    n_imm: int = 1
    M_eval: int = 2
    L: int = 2
    family_size: int = 25
    stage_budgets: tuple[int, ...] = (40, 20)
    funnel: tuple[EvaluatorStage, ...] = DEFAULT_FUNNEL
    N: int = 10
    tau: float = 0.15
    qed_floor: float = 0.50
    sa_floor: float = 0.50
    parent_similarity_floor: float = 0.3
    beta_chem_search: float = 0.40
    beta_chem_rerank: float = 0.60
    beta_div_subset: float = 0.05
    beta_bal_subset: float = 0.02
    lambda_bal_proxy: float = 0.25
    eta_aff: float = 1.0
    eta_chem: float = 0.60
    eta_div: float = 0.05
    exact_cap: int = 25
    t_train: int = 1000
    t_infer: int = 100
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "stage_budgets", tuple(int(b) for b in self.stage_budgets))
        object.__setattr__(self, "funnel", tuple(self.funnel))
        self.validate()

    def validate(self) -> None:
        alphas = (self.alpha_mut, self.alpha_cross, self.alpha_imm)
        if min(alphas) < 0 or abs(sum(alphas) - 1.0) > 1e-12:
            raise ConfigError("mixture weights must be >= 0 and sum to 1")
        for name in ("B", "B_par", "B_off", "M_eval", "L", "family_size", "d_z", "exact_cap"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.T < 0:
            raise ConfigError("T must be >= 0")
        if self.B_par > self.B:
            raise ConfigError("B_par must not exceed B")
        if not self.stage_budgets or min(self.stage_budgets) < 1:
            raise ConfigError("stage budgets must be >= 1")
        if len(self.funnel) != len(self.stage_budgets):
            raise ConfigError("funnel needs one evaluator stage per stage budget")
        for s, stage in enumerate(self.funnel, start=1):
            if stage.stage_index != s:
                raise ConfigError("funnel stages must be indexed 1..S in order")
        if self.N < 2:
            raise ConfigError("N must be >= 2")
        if not 0.0 <= self.tau <= 1.0:
            raise ConfigError("tau must lie in [0, 1]")
        if self.sigma_mut < 0:
            raise ConfigError("sigma_mut must be >= 0")
        if not 0.0 < self.gamma_mut <= 1.0:
            raise ConfigError("gamma_mut must lie in (0, 1]")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

    @property
    def S(self) -> int:
        return len(self.stage_budgets)


def default_config(**overrides) -> SearchConfig:
    """Final-implementation hyperparameters.

    ``alpha_imm = n_imm / B_off`` and ``alpha_mut`` takes the remaining mass;
    ``tau = 1 - 0.85`` from the maximum pairwise Tanimoto similarity.
    """
    B_off, n_imm, alpha_cross = 4, 1, 0.35
    alpha_imm = n_imm / B_off
    values = dict(
        B=4,
        B_par=3,
        B_off=B_off,
        T=3,
        d_z=10,
        alpha_cross=alpha_cross,
        alpha_imm=alpha_imm,
        alpha_mut=1.0 - alpha_cross - alpha_imm,
        sigma_mut=0.42,
        gamma_mut=0.82,
        n_imm=n_imm,
        M_eval=2,
        L=2,
        stage_budgets=(40, 20),
        N=10,
        tau=round(1.0 - 0.85, 12),
        qed_floor=0.50,
        sa_floor=0.50,
        beta_chem_search=0.40,
        beta_chem_rerank=0.60,
        beta_div_subset=0.05,
        beta_bal_subset=0.02,
        lambda_bal_proxy=0.25,
        eta_aff=1.0,
        eta_chem=0.60,
        eta_div=0.05,
    )
    values.update(overrides)
    return SearchConfig(**values)


# ---------------------------------------------------------------------------
# Ordering


def lex_key(feasible: bool, score: float, ident: int) -> tuple:
    """Sort key: ascending order of this key is descending preference."""
    if score is None or math.isnan(score):
        score = -math.inf
    return (not feasible, -score, ident)


def lex_compare(a: tuple, b: tuple) -> int:
    """Feasibility-first comparison of ``(feasible, score, id)`` tuples.

    Returns -1 when ``a`` precedes ``b``, 1 when ``b`` precedes ``a`` and 0 only
    for identical tuples. The id is optional and defaults to 0.
    """
    ka = lex_key(a[0], a[1], a[2] if len(a) > 2 else 0)
    kb = lex_key(b[0], b[1], b[2] if len(b) > 2 else 0)
    if ka < kb:
        return -1
    if kb < ka:
        return 1
    return 0


def top_b(items: Sequence, keys: Sequence[tuple], budget: int) -> list:
    """The first ``budget`` items under the lexicographic order given by ``keys``."""
    order = sorted(range(len(items)), key=lambda i: keys[i])
    return [items[i] for i in order[:budget]]
