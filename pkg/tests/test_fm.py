"""FM sketch and ensemble: estimator formula, union semantics, calibration."""

import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from rainsketch import (
    AccuracyParams,
    FMEnsemble,
    FMSketch,
    FM_CORRECTION,
    SketchMismatchError,
    position_of,
    required_sketch_count,
)


def find_id_with_position(target: int, seed: int, width: int, salt: str = "") -> bytes:
    for i in range(100_000):
        cid = f"find{salt}-{i}".encode()
        if position_of(cid, seed, width) == target:
            return cid
    raise AssertionError(f"no id found for position {target}")


# -- single sketch -----------------------------------------------------------

def test_insert_sets_single_expected_bit():
    seed = 13
    cid = find_id_with_position(0, seed, 64)
    sk = FMSketch(64)
    sk.insert(cid, seed)
    assert sk.bits == 1  # bit 0 only: 100...0 in position order


def test_insert_is_idempotent():
    sk1, sk2 = FMSketch(64), FMSketch(64)
    sk1.insert(b"dup", 5)
    sk2.insert(b"dup", 5)
    sk2.insert(b"dup", 5)
    assert sk1 == sk2


def test_bit_zero_set_after_many_inserts():
    # P[bit 0 unset after 1000 ids] = 2^-1000; must hold in all 100 trials
    for trial in range(100):
        sk = FMSketch(64)
        for i in range(1000):
            sk.insert(b"t%d-%d" % (trial, i), seed=trial)
        assert sk.bits & 1


def test_lsb0_cases():
    assert FMSketch(64).lsb0() == 0
    # positions 0,1 set, 2 unset, 3 set: 1101 in position order
    assert FMSketch(8, 0b1011).lsb0() == 2
    assert FMSketch(8, 0xFF).lsb0() == 8  # saturated
    assert FMSketch(64, (1 << 64) - 1).lsb0() == 64


def test_estimate_empty_is_exactly_zero():
    assert FMSketch(64).estimate() == 0.0


def test_estimate_known_lsb0_values():
    # lsb0 = 3
    assert FMSketch(64, 0b111).estimate() == pytest.approx(8 / 0.77351, abs=1e-12)
    # bit 0 unset but a higher bit set: lsb0 = 0, estimate 1/0.77351
    assert FMSketch(64, 0b10).estimate() == pytest.approx(1 / 0.77351, abs=1e-12)


def test_estimate_formula_exact_for_every_lsb0():
    width = 64
    for target in range(width + 1):
        # lsb0 = 0 needs a NONEMPTY sketch (bit 0 unset, bit 1 set),
        # since the all-zero sketch is clamped to estimate 0
        bits = 0b10 if target == 0 else (1 << target) - 1
        sk = FMSketch(width, bits)
        assert sk.lsb0() == target
        expected = math.ldexp(1.0, target) / FM_CORRECTION
        assert abs(sk.estimate() - expected) <= math.ulp(expected)


def test_estimate_at_least_formula_floor_when_nonempty():
    for i in range(50):
        sk = FMSketch(64)
        sk.insert(b"floor-%d" % i, 3)
        assert sk.estimate() >= 1 / FM_CORRECTION


def test_bits_validation():
    with pytest.raises(ValueError):
        FMSketch(4, 1 << 4)
    with pytest.raises(ValueError):
        FMSketch(0)


def test_merge_identity_and_union():
    seed = 21
    a, b = FMSketch(64), FMSketch(64)
    a.insert(b"alpha", seed)
    b.insert(b"beta", seed)
    merged = a.merge(b)
    both = FMSketch(64)
    both.insert(b"alpha", seed)
    both.insert(b"beta", seed)
    assert merged == both
    assert a.merge(FMSketch(64)) == a


def test_merge_equals_full_stream_sketch():
    for trial in range(50):
        rng = random.Random(trial)
        ids = [b"m%d-%d" % (trial, rng.randrange(120)) for _ in range(200)]
        cut = rng.randrange(201)
        seed = trial * 7 + 1
        left, right, full = FMSketch(64), FMSketch(64), FMSketch(64)
        for cid in ids[:cut]:
            left.insert(cid, seed)
        for cid in ids[cut:]:
            right.insert(cid, seed)
        for cid in ids:
            full.insert(cid, seed)
        assert left.merge(right) == full


def test_merge_width_mismatch():
    with pytest.raises(SketchMismatchError):
        FMSketch(32).merge(FMSketch(64))


# -- ensembles ---------------------------------------------------------------

def test_ensemble_requires_distinct_seeds():
    with pytest.raises(ValueError):
        FMEnsemble(seeds=[1, 1])
    with pytest.raises(ValueError):
        FMEnsemble(seeds=[])
    with pytest.raises(ValueError):
        FMEnsemble(2, seeds=[1, 2, 3])
    with pytest.raises(ValueError):
        FMEnsemble()


def test_ensemble_estimate_empty_is_zero():
    assert FMEnsemble(4, 64, seed=1).estimate() == 0.0


def test_ensemble_estimate_averages_indices():
    # rows with lsb0 = 2 and 4 -> 2^3 / 0.77351
    ens = FMEnsemble.from_state([10, 20], [0b11, 0b1111], 64)
    assert ens.lsb0s() == [2, 4]
    assert ens.estimate() == pytest.approx(8 / 0.77351, abs=1e-12)


def test_ensemble_estimate_mean_of_estimates_mode():
    ens = FMEnsemble.from_state([10, 20], [0b11, 0b1111], 64)
    expected = (4 / FM_CORRECTION + 16 / FM_CORRECTION) / 2
    assert ens.estimate(average="estimate") == pytest.approx(expected, abs=1e-12)
    with pytest.raises(ValueError):
        ens.estimate(average="bogus")


def test_ensemble_insert_matches_per_row_inserts():
    ens = FMEnsemble(8, 64, seed=5)
    manual = [FMSketch(64) for _ in ens.seeds]
    for i in range(300):
        cid = b"cmp-%d" % i
        ens.insert(cid)
        for sk, seed in zip(manual, ens.seeds):
            sk.insert(cid, seed)
    assert ens.rows == manual


def test_ensemble_insert_many_matches_insert():
    ids = [b"bulk-%d" % i for i in range(2000)]
    a = FMEnsemble(8, 64, seed=9)
    b = FMEnsemble(8, 64, seed=9)
    a.insert_many(ids)
    for cid in ids:
        b.insert(cid)
    assert a == b


def test_ensemble_wide_rows_take_scalar_path():
    ids = [b"wide-%d" % i for i in range(500)]
    a = FMEnsemble(3, 96, seed=2)
    b = FMEnsemble(3, 96, seed=2)
    a.insert_many(ids)
    for cid in ids:
        b.insert(cid)
    assert a == b


def test_ensemble_merge_checks_seeds():
    a = FMEnsemble(2, 64, seed=1)
    b = FMEnsemble(2, 64, seed=2)
    with pytest.raises(SketchMismatchError):
        a.merge(b)


def test_ensemble_merge_union():
    a = FMEnsemble(4, 64, seed=3)
    b = FMEnsemble(4, 64, seed=3)
    full = FMEnsemble(4, 64, seed=3)
    ids = [b"em-%d" % i for i in range(400)]
    a.insert_many(ids[:150])
    b.insert_many(ids[150:])
    full.insert_many(ids)
    assert a.merge(b) == full


def test_ensemble_accuracy_improves_with_rows():
    # strict variance decrease for K = 4 -> 16 -> 64 on shared workloads
    n = 3000
    stds = []
    for k in (4, 16, 64):
        estimates = []
        for trial in range(50):
            seeds = [s + 1000 * trial for s in range(k)]
            ens = FMEnsemble(width=64, seeds=seeds)
            ens.insert_many([b"conc-%d-%d" % (trial, i) for i in range(n)])
            estimates.append(ens.estimate())
        mean = sum(estimates) / len(estimates)
        stds.append((sum((e - mean) ** 2 for e in estimates) / len(estimates)) ** 0.5)
    assert stds[0] > stds[1] > stds[2]


def test_ensemble_monte_carlo_hits_30_percent():
    n = 2000
    hits = 0
    for trial in range(30):
        ens = FMEnsemble(64, 64, seed=5000 + trial)
        ens.insert_many([b"mc-%d-%d" % (trial, i) for i in range(n)])
        if abs(ens.estimate() - n) <= 0.3 * n:
            hits += 1
    assert hits >= 27


# -- row count formula --------------------------------------------------------

def test_required_sketch_count_unit_case():
    params = AccuracyParams(epsilon=1.0, delta=2 / math.e)
    assert required_sketch_count(params) == 1


def test_required_sketch_count_arithmetic():
    params = AccuracyParams(epsilon=0.1, delta=0.05)
    assert required_sketch_count(params) == 369  # ceil(ln(40) / 0.01)


def test_required_sketch_count_quadruples_when_epsilon_halves():
    # delta = 2/e makes the log term exactly 1, so no ceiling slack
    assert required_sketch_count(AccuracyParams(0.1, 2 / math.e)) == 100
    assert required_sketch_count(AccuracyParams(0.05, 2 / math.e)) == 400


def test_accuracy_params_validation():
    with pytest.raises(ValueError):
        AccuracyParams(0.0, 0.1)
    with pytest.raises(ValueError):
        AccuracyParams(1.5, 0.1)
    with pytest.raises(ValueError):
        AccuracyParams(0.1, 0.0)
    with pytest.raises(ValueError):
        AccuracyParams(0.1, 1.0)
    with pytest.raises(ValueError):
        AccuracyParams(0.1, 0.1, constant_c=0.0)


def test_constant_c_scales_count():
    base = required_sketch_count(AccuracyParams(0.1, 2 / math.e, constant_c=1.0))
    doubled = required_sketch_count(AccuracyParams(0.1, 2 / math.e, constant_c=2.0))
    assert doubled == 2 * base


# -- properties ---------------------------------------------------------------

ids_strategy = st.lists(st.binary(min_size=1, max_size=8), min_size=0, max_size=40)


@given(ids_strategy, st.integers(0, 2**64 - 1), st.randoms(use_true_random=False))
@settings(max_examples=60)
def test_state_depends_only_on_id_set(ids, seed, rnd):
    ordered = FMSketch(32)
    for cid in ids:
        ordered.insert(cid, seed)
    shuffled = list(ids) + ids[:3]  # duplicates must not matter
    rnd.shuffle(shuffled)
    other = FMSketch(32)
    for cid in shuffled:
        other.insert(cid, seed)
    assert ordered == other


@given(ids_strategy, st.integers(0, 2**64 - 1))
@settings(max_examples=60)
def test_inserts_never_clear_bits(ids, seed):
    sk = FMSketch(32)
    previous_bits = 0
    previous_lsb0 = 0
    for cid in ids:
        sk.insert(cid, seed)
        assert sk.bits & previous_bits == previous_bits
        assert sk.lsb0() >= previous_lsb0
        previous_bits, previous_lsb0 = sk.bits, sk.lsb0()
