"""Synthetic stand-in for the frozen generator and the pair-aware noise prior."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .core import Candidate, ConfigError, LandscapeSpec, LatentPoint, PriorSpec, TaskContext, stream

FP_BITS = 64


def sample_prior(
    prior: PriorSpec,
    rng_seed: int,
    count: int,
    dim: int = 10,
    first_id: int = 0,
    birth_iteration: int = 0,
) -> list[LatentPoint]:
    """Draw ``count`` latent points from the prior.

    Ids run ``first_id, first_id + 1, ...``. Gaussian mode is centred at the
    origin; anchor mixture picks an anchor uniformly and perturbs it.
    """
    if count < 1:
        raise ConfigError("count must be >= 1")
    rng = stream(rng_seed, "prior")
    if prior.mode == "anchor_mixture":
        if not prior.anchors:
            raise ConfigError("anchor_mixture prior needs at least one anchor")
        anchors = np.asarray(prior.anchors, dtype=np.float64)
        picks = rng.integers(0, len(anchors), size=count)
        noise = rng.standard_normal((count, anchors.shape[1]))
        coords = anchors[picks] + prior.sigma * noise
    else:
        coords = prior.sigma * rng.standard_normal((count, dim))
    return [
        LatentPoint(coords=coords[i], id=first_id + i, birth_iteration=birth_iteration, operator="prior")
        for i in range(count)
    ]


def prior_draw(prior: PriorSpec, rng: np.random.Generator, dim: int) -> np.ndarray:
    """One prior sample from an existing generator (used for immigration)."""
    if prior.mode == "anchor_mixture":
        if not prior.anchors:
            raise ConfigError("anchor_mixture prior needs at least one anchor")
        anchors = np.asarray(prior.anchors, dtype=np.float64)
        a = anchors[rng.integers(0, len(anchors))]
        return a + prior.sigma * rng.standard_normal(a.shape[0])
    return prior.sigma * rng.standard_normal(dim)


def landscape_value(spec: LandscapeSpec, x: np.ndarray) -> np.ndarray:
    """Noiseless utility of ``x`` (rows of a 2-D array, or a single vector)."""
    x = np.asarray(x, dtype=np.float64)
    c = np.asarray(spec.center)
    d = c.shape[0]
    val = spec.scale * np.exp(-np.sum((x - c) ** 2, axis=-1) / d)
    if spec.kind == "multi_basin":
        val = val + 0.5 * spec.scale * np.exp(-np.sum((x + c) ** 2, axis=-1) / d)
    return val


@lru_cache(maxsize=64)
def chemistry_directions(chem_seed: int, dim: int) -> tuple[np.ndarray, np.ndarray]:
    rng = stream(chem_seed, "chemistry")
    u = rng.standard_normal(dim)
    v = rng.standard_normal(dim)
    u /= np.linalg.norm(u)
    v /= np.linalg.norm(v)
    u.flags.writeable = False
    v.flags.writeable = False
    return u, v


@lru_cache(maxsize=64)
def _fp_layout(dim: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    bits = np.arange(FP_BITS)
    coord = bits % dim
    levels = -(-FP_BITS // dim)
    thresholds = np.linspace(-1.2, 1.2, levels) if levels > 1 else np.zeros(1)
    # level 0 sits at zero so the first bit of each coordinate is its sign
    order = np.argsort(np.abs(thresholds), kind="stable")
    thr = thresholds[order][bits // dim]
    # splitmix64 finaliser, low bit
    z = (bits.astype(np.uint64) + np.uint64(0x9E3779B97F4A7C15))
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    flip = (z & np.uint64(1)).astype(bool)
    return coord, thr, flip


def fingerprint(x: np.ndarray) -> np.ndarray:
    """64-bit fingerprints for the rows of ``x``.

    Bit ``j`` thresholds coordinate ``j mod d`` at a per-bit offset and is XOR-ed
    with a fixed hash bit of ``j``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    coord, thr, flip = _fp_layout(x.shape[1])
    bits = (x[:, coord] > thr) ^ flip
    weights = np.left_shift(np.uint64(1), np.arange(FP_BITS, dtype=np.uint64))
    return (bits.astype(np.uint64) * weights).sum(axis=1, dtype=np.uint64)


def _sigmoid(t):
    return 1.0 / (1.0 + np.exp(-t))


def decode_family(
    z: LatentPoint,
    ctx: TaskContext,
    k: int,
    rng_seed: int,
    first_id: int = 0,
) -> list[Candidate]:
    """Decode ``k`` candidates from ``z``.

    The output depends only on ``z.coords``, ``ctx``, ``k`` and ``rng_seed``;
    callers fold ``z.id`` into ``rng_seed`` when they need per-latent streams.
    """
    if k < 1:
        raise ValueError("decode_family requires k >= 1")
    if z.dim != ctx.dim:
        raise ConfigError(f"latent has dimension {z.dim}, task expects {ctx.dim}")
    rng = stream(rng_seed, "decode", k)
    spread = rng.standard_normal((k, z.dim))
    noise_a = rng.standard_normal(k)
    noise_b = rng.standard_normal(k)
    u_valid = rng.random(k)

    x = z.coords[None, :] + ctx.decode_sigma * spread
    aff_a = landscape_value(ctx.landscape_a, x) + ctx.landscape_a.noise_sigma * noise_a
    aff_b = landscape_value(ctx.landscape_b, x) + ctx.landscape_b.noise_sigma * noise_b
    u, v = chemistry_directions(ctx.chem_seed, z.dim)
    qed = _sigmoid(x @ u)
    sa = _sigmoid(x @ v)
    fps = fingerprint(x)
    valid = u_valid >= ctx.invalid_prob
    return [
        Candidate(
            id=first_id + i,
            origin_latent=z.id,
            features=int(fps[i]),
            latent=x[i],
            base_affinity=(float(aff_a[i]), float(aff_b[i])),
            qed_like=float(qed[i]),
            sa_like=float(sa[i]),
            valid=bool(valid[i]),
        )
        for i in range(k)
    ]


def default_task(d_z: int = 10, **overrides) -> TaskContext:
    """Dual-bowl task: each target's optimum sits on its own half of the axes.

    The prior mixes two anchors, one per target, each pushed toward the region
    where both chemistry scores exceed one half.
    """
    chem_seed = overrides.get("chem_seed", 0)
    ca = np.zeros(d_z)
    cb = np.zeros(d_z)
    half = d_z // 2
    ca[:half] = 0.9
    cb[half:] = 0.9
    u, v = chemistry_directions(chem_seed, d_z)
    w = (u + v) / np.linalg.norm(u + v)
    anchors = (tuple(0.5 * ca + 2.0 * w), tuple(0.5 * cb + 2.0 * w))
    values = dict(
        pair_id="dual_bowl",
        landscape_a=LandscapeSpec(center=tuple(ca), scale=8.0, noise_sigma=0.4),
        landscape_b=LandscapeSpec(center=tuple(cb), scale=8.0, noise_sigma=0.4),
        prior=PriorSpec(mode="anchor_mixture", anchors=anchors, sigma=1.0),
        decode_sigma=0.5,
    )
    values.update(overrides)
    return TaskContext(**values)
