from __future__ import annotations

import numpy as np
import pytest

from ddw.errors import GenerationFailure
from ddw.instgen import BOX_UPPER, GenSpec, IntStream, generate, generate_feasible, is_feasible
from ddw.model import Sense, dumps_instance


def test_entries_in_range_and_integer():
    inst = generate(GenSpec(11, 4, 12, 5))
    for blk in inst.blocks:
        for M in (blk.A, blk.B):
            assert M.min() >= -10 and M.max() <= 20
            assert np.all(M == np.round(M))
        assert blk.c.min() >= -10 and blk.c.max() <= 30
        assert blk.B.shape == (12, 12)
        assert np.all(blk.lower == 0.0) and np.all(blk.upper == BOX_UPPER)
    assert inst.senses == (Sense.GE,) * 5


def test_rhs_follows_row_sums():
    inst = generate(GenSpec(2, 3, 6, 8))
    ell = sum(blk.A.sum(axis=1) for blk in inst.blocks)
    for li, ti in zip(ell, inst.t):
        lo, hi = sorted((2 * li, 3 * li))
        assert lo <= ti <= hi
    for blk in inst.blocks:
        for li, bi in zip(blk.B.sum(axis=1), blk.b):
            lo, hi = sorted((2 * li, 3 * li))
            assert lo <= bi <= hi


def test_rhs_cases_by_row_sum():
    s = IntStream(0)
    from ddw.instgen import _rhs_from_row_sums

    out = _rhs_from_row_sums(s, np.array([0, 10, -10] * 200))
    assert np.all(out[0::3] == 0)
    assert set(out[1::3]) <= set(range(20, 31)) and len(set(out[1::3])) == 11
    assert set(out[2::3]) <= set(range(-30, -19))


def test_byte_determinism():
    spec = GenSpec(1234, 3, 5, 2)
    assert dumps_instance(generate(spec)) == dumps_instance(generate(spec))
    assert dumps_instance(generate(GenSpec(1235, 3, 5, 2))) != dumps_instance(generate(spec))


def test_known_first_draws_are_pinned():
    # pins the raw-word mapping; a change here changes every published instance
    s = IntStream(0)
    first = s.uniform(np.full(5, -10), np.full(5, 20)).tolist()
    t = np.random.PCG64(0).random_raw(5)
    assert first == [-10 + int(w) % 31 for w in t]


def test_sample_means():
    inst = generate(GenSpec(5, 10, 40, 10))
    A = np.concatenate([blk.A.ravel() for blk in inst.blocks] + [blk.B.ravel() for blk in inst.blocks])
    c = np.concatenate([blk.c for s in range(10) for blk in generate(GenSpec(s, 10, 100, 1)).blocks])
    assert A.size >= 10_000 and c.size >= 10_000
    assert abs(A.mean() - 5.0) <= 0.5
    assert abs(c.mean() - 10.0) <= 0.5


def test_uniform_swaps_reversed_bounds():
    s = IntStream(3)
    v = s.uniform(np.full(500, 5), np.full(500, 2))
    assert v.min() >= 2 and v.max() <= 5


def test_metadata_records_seed_and_prng():
    inst = generate(GenSpec(77, 2, 5, 1))
    assert inst.seed == 77
    assert inst.metadata["prng"] == "pcg64-raw/rejection-mod"


def test_from_total_requires_even_split():
    assert GenSpec.from_total(1, 4, 100, 1).vars_per_block == 25
    with pytest.raises(ValueError):
        GenSpec.from_total(1, 3, 100, 1)


def test_feasible_seed_returned_unchanged():
    spec = GenSpec.from_total(1, 2, 10, 1)
    inst, used = generate_feasible(spec)
    assert used == 1 and is_feasible(inst)


def test_redraw_moves_to_next_seed():
    # find a seed whose raw draw is infeasible while seed+1 is feasible
    found = None
    for seed in range(1, 400):
        spec = GenSpec.from_total(seed, 2, 10, 5)
        if not is_feasible(generate(spec)) and is_feasible(generate(GenSpec.from_total(seed + 1, 2, 10, 5))):
            found = spec
            break
    assert found is not None
    inst, used = generate_feasible(found)
    assert used == found.seed + 1
    assert dumps_instance(inst) == dumps_instance(generate(GenSpec.from_total(used, 2, 10, 5)))


def test_redraw_budget_exhausted():
    with pytest.raises(GenerationFailure):
        generate_feasible(GenSpec(1, 2, 5, 1), max_redraws=3, check=lambda inst: False)
