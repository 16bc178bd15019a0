"""Deterministic random block-angular instances.

Random stream
    numpy's PCG64 bit generator seeded with ``PCG64(seed)``; only its raw
    64-bit outputs (``random_raw``) are used, which numpy keeps stable across
    versions and platforms.

Integer draws U{a, b} (inclusive, a > b is swapped)
    r = b - a + 1, limit = 2**64 - (2**64 mod r); a raw word w is rejected
    while w >= limit, otherwise the draw is a + (w mod r).

Draw order
    for each block: A_n row-major, B_n row-major, c_n, b_n; then t.

Entries of A_n and B_n come from U{-10, 20}, costs from U{-10, 30}. With
l_i the i-th row sum of the full linking matrix, t_i ~ U{2 l_i, 3 l_i}
(swapped when l_i < 0, and 0 when l_i = 0); b_n is built the same way from
the row sums of B_n. Linking rows are ">=", boxes are 0 <= x <= 30.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ddw.errors import GenerationFailure
from ddw.model import BlockAngularInstance, BlockData, Sense

PRNG_NAME = "pcg64-raw/rejection-mod"
GENERATOR_NAME = "ddw-uniform-v1"
MATRIX_RANGE = (-10, 20)
COST_RANGE = (-10, 30)
BOX_UPPER = 30.0
_TWO64 = 1 << 64


@dataclass(frozen=True)
class GenSpec:
    seed: int
    num_blocks: int
    vars_per_block: int
    num_links: int
    prng: str = PRNG_NAME

    def __post_init__(self):
        if min(self.num_blocks, self.vars_per_block, self.num_links) < 1:
            raise ValueError("dimensions must be positive")
        if self.prng != PRNG_NAME:
            raise ValueError(f"unknown prng {self.prng!r}")

    @classmethod
    def from_total(cls, seed, num_blocks, total_vars, num_links):
        if total_vars % num_blocks:
            raise ValueError("total variables must split evenly across blocks")
        return cls(seed, num_blocks, total_vars // num_blocks, num_links)


class IntStream:
    """Inclusive uniform integers from the raw PCG64 stream by rejection."""

    def __init__(self, seed: int):
        self._bits = np.random.PCG64(seed)

    def uniform(self, lo, hi) -> np.ndarray:
        lo = np.atleast_1d(np.asarray(lo, dtype=np.int64))
        hi = np.atleast_1d(np.asarray(hi, dtype=np.int64))
        a = np.minimum(lo, hi)
        b = np.maximum(lo, hi)
        span = (b - a + 1).astype(np.uint64)
        rem = np.array([_TWO64 % int(r) for r in span], dtype=np.uint64) if span.size else span
        # reject w >= 2**64 - rem; rem == 0 means no word is rejected
        cutoff = np.where(rem == 0, np.uint64(0), (np.uint64(0) - rem))
        out = np.empty(span.size, dtype=np.int64)
        pending = np.arange(span.size)
        while pending.size:
            words = self._bits.random_raw(pending.size)
            bad = (rem[pending] != 0) & (words >= cutoff[pending])
            good = pending[~bad]
            out[good] = a[good] + (words[~bad] % span[good]).astype(np.int64)
            # rejected slots are refilled from the next words, in order
            pending = pending[bad]
        return out

    def matrix(self, rows, cols, lo, hi) -> np.ndarray:
        n = rows * cols
        return self.uniform(np.full(n, lo), np.full(n, hi)).reshape(rows, cols)


def _rhs_from_row_sums(stream: IntStream, sums: np.ndarray) -> np.ndarray:
    sums = np.asarray(sums, dtype=np.int64)
    nz = sums != 0
    out = np.zeros(sums.size, dtype=np.int64)
    if np.any(nz):
        out[nz] = stream.uniform(2 * sums[nz], 3 * sums[nz])
    return out


def generate(spec: GenSpec) -> BlockAngularInstance:
    stream = IntStream(spec.seed)
    d, m = spec.vars_per_block, spec.num_links
    raw = []
    for _ in range(spec.num_blocks):
        A = stream.matrix(m, d, *MATRIX_RANGE)
        B = stream.matrix(d, d, *MATRIX_RANGE)
        c = stream.uniform(np.full(d, COST_RANGE[0]), np.full(d, COST_RANGE[1]))
        b = _rhs_from_row_sums(stream, B.sum(axis=1))
        raw.append((A, B, c, b))
    link_sums = np.sum([A.sum(axis=1) for A, *_ in raw], axis=0)
    t = _rhs_from_row_sums(stream, link_sums)
    blocks = [
        BlockData(c.astype(float), B.astype(float), b.astype(float), np.zeros(d), np.full(d, BOX_UPPER), A.astype(float))
        for A, B, c, b in raw
    ]
    meta = {"seed": spec.seed, "generator": GENERATOR_NAME, "prng": spec.prng}
    return BlockAngularInstance(t.astype(float), [Sense.GE] * m, blocks, meta)


def is_feasible(instance: BlockAngularInstance) -> bool:
    from ddw.bench.baselines import solve_direct
    from ddw.solvers import Status

    return solve_direct(instance).status is Status.OPTIMAL


def generate_feasible(spec: GenSpec, max_redraws: int = 20, check=is_feasible) -> tuple[BlockAngularInstance, int]:
    """Draw seeds seed, seed+1, ... until the direct LP is optimal."""
    if max_redraws < 1:
        raise ValueError("max_redraws must be at least 1")
    tried = []
    for offset in range(max_redraws):
        seed = spec.seed + offset
        inst = generate(GenSpec(seed, spec.num_blocks, spec.vars_per_block, spec.num_links, spec.prng))
        if check(inst):
            return inst, seed
        tried.append(seed)
    raise GenerationFailure(f"no feasible draw among seeds {tried} for {spec}")
