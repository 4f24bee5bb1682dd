import math

import numpy as np
import pytest

from grassq.bounds import drf_lower, drf_upper, max_min_distance
from grassq.codebook import (
    Codebook,
    CodebookFormatError,
    CodebookValidationError,
    design_maxmin,
    dumps_codebook,
    load_codebook,
    loads_codebook,
    mean_distortion,
    quantize,
    quantize_bases,
    random_code_experiment,
    random_codebook,
    save_codebook,
)
from grassq.core import (
    ArgumentError,
    ShapeError,
    Subspace,
    chordal_distance,
    haar_sample,
    haar_unitary,
)
from grassq.volume import ball_volume_model


def linear_scan(C, Q):
    best, arg = math.inf, -1
    for k, P in enumerate(C.entries):
        d2 = chordal_distance(P, Q) ** 2
        if d2 < best - 1e-14:
            best, arg = d2, k
    return arg, best


@pytest.mark.parametrize("n,p,field,K", [(3, 1, "C", 17), (4, 2, "R", 9), (5, 2, "C", 40)])
def test_quantize_matches_linear_scan(n, p, field, K):
    C = random_codebook(n, p, field, K, rng=K)
    gen = np.random.default_rng(0)
    for _ in range(30):
        Q = haar_sample(n, p, field, gen)
        k, d2 = quantize(C, Q)
        ok, od2 = linear_scan(C, Q)
        assert d2 == pytest.approx(od2, abs=1e-12)
        assert k == ok


def test_quantize_batched_matches_single():
    C = random_codebook(4, 2, "C", 33, rng=2)
    Qs = [haar_sample(4, 2, "C", s) for s in range(20)]
    idx, d2 = quantize_bases(C, np.stack([q.basis for q in Qs]))
    for q, k, d in zip(Qs, idx, d2):
        kk, dd = quantize(C, q)
        assert kk == k and dd == pytest.approx(d, abs=1e-12)


def test_quantize_exact_member_and_single_entry():
    C = random_codebook(4, 2, "C", 8, rng=1)
    k, d2 = quantize(C, C[3])
    assert k == 3 and d2 < 1e-12
    one = C.subset([5])
    assert quantize(one, haar_sample(4, 2, "C", 9))[0] == 0
    assert one.min_distance() == math.inf


def test_quantize_rejects_mismatch():
    C = random_codebook(4, 2, "C", 4)
    with pytest.raises(ShapeError):
        quantize(C, haar_sample(4, 1, "C", 0))
    with pytest.raises(ShapeError):
        quantize(C, haar_sample(4, 2, "R", 0))


def test_codebook_rejects_non_orthonormal():
    bad = np.ones((2, 3, 1))
    with pytest.raises(ArgumentError):
        Codebook(bad, "R")


def test_mean_distortion_single_line():
    # One codeword in C^2: d^2 is uniform on [0, 1].
    r = mean_distortion(random_codebook(2, 1, "C", 1, rng=0), samples=10**5, rng=1)
    assert abs(r.mean - 0.5) < 4 * r.std_error


def test_mean_distortion_worker_independent():
    C = random_codebook(4, 2, "C", 16, rng=3)
    a = mean_distortion(C, samples=60000, rng=4, workers=1)
    b = mean_distortion(C, samples=60000, rng=4, workers=4)
    assert a == b


def test_random_code_distortion_between_bounds():
    model = ball_volume_model(4, 2, "C")
    C = random_codebook(4, 2, "C", 1024, rng=7)
    r = mean_distortion(C, samples=20000, rng=8)
    assert drf_lower(model, 1024) <= r.mean <= 1.25 * drf_upper(model, 1024)


def test_design_two_points_antipodal():
    C = design_maxmin(2, 1, "C", 2, iterations=500, restarts=4, rng=0)
    assert C.min_distance() == pytest.approx(1.0, abs=1e-3)


def test_design_beats_random():
    C = design_maxmin(2, 1, "C", 4, iterations=2000, restarts=4, rng=1)
    best_random = max(random_codebook(2, 1, "C", 4, rng=s).min_distance() for s in range(200))
    assert C.min_distance() >= best_random
    # Regular tetrahedron on the Bloch sphere.
    assert C.min_distance() == pytest.approx(math.sqrt(2 / 3), abs=5e-3)


@pytest.mark.parametrize("n,p,K", [(3, 1, 64), (4, 2, 64)])
def test_design_respects_hamming_converse(n, p, K):
    model = ball_volume_model(n, p, "C")
    C = design_maxmin(n, p, "C", K, iterations=1000, restarts=4, rng=2)
    assert C.min_distance() <= max_min_distance(model, K)


def test_design_init_only_and_determinism():
    a = design_maxmin(3, 1, "C", 16, iterations=0, restarts=3, rng=5)
    assert a.meta.init_only
    b = design_maxmin(3, 1, "C", 16, iterations=300, restarts=3, rng=5)
    c = design_maxmin(3, 1, "C", 16, iterations=300, restarts=3, rng=5)
    assert not b.meta.init_only
    assert np.array_equal(b.bases, c.bases)
    assert b.min_distance() >= a.min_distance()


def test_design_rejects_bad_arguments():
    with pytest.raises(ArgumentError):
        design_maxmin(3, 1, "C", 1)
    with pytest.raises(ArgumentError):
        design_maxmin(3, 1, "C", 4, restarts=0)


def test_nested_codebooks_distortion_monotone():
    C = random_codebook(3, 1, "C", 64, rng=9)
    means = [mean_distortion(C.subset(range(k)), samples=20000, rng=10).mean for k in (4, 16, 64)]
    assert means[0] >= means[1] >= means[2]


def test_rotation_invariance_of_distortion():
    C = random_codebook(4, 2, "C", 32, rng=11)
    A = haar_unitary(4, "C", 12)
    R = C.rotated(A)
    assert R.min_distance() == pytest.approx(C.min_distance(), abs=1e-10)
    a = mean_distortion(C, samples=50000, rng=13)
    b = mean_distortion(R, samples=50000, rng=14)
    assert abs(a.mean - b.mean) < 4 * math.hypot(a.std_error, b.std_error)


def test_random_code_experiment_line():
    r = random_code_experiment(2, 1, "C", 64, trials=10, samples_per_trial=2000, rng=0)
    assert r.w.shape == (10, 2000)
    assert r.t == 2
    assert abs(r.scaled_mean - 1.0) < 0.1
    with pytest.raises(ArgumentError):
        random_code_experiment(2, 1, "C", 8, trials=1)


def test_random_code_experiment_worker_independent():
    a = random_code_experiment(3, 1, "C", 16, trials=4, samples_per_trial=1000, rng=3, workers=1)
    b = random_code_experiment(3, 1, "C", 16, trials=4, samples_per_trial=1000, rng=3, workers=2)
    assert np.array_equal(a.w, b.w)


@pytest.mark.parametrize("field", ["R", "C"])
def test_save_load_roundtrip(tmp_path, field):
    C = design_maxmin(4, 2, field, 8, iterations=50, restarts=2, rng=3)
    path = tmp_path / "cb.gqcb"
    save_codebook(C, path)
    D = load_codebook(path)
    assert np.array_equal(C.bases, D.bases)
    assert D.field is C.field
    assert D.meta.designer == "maxmin"
    assert D.meta.seed == 3
    assert D.meta.mindist == C.meta.mindist


def test_truncated_file_is_a_format_error():
    data = dumps_codebook(random_codebook(3, 1, "C", 4, rng=0))
    with pytest.raises(CodebookFormatError) as err:
        loads_codebook(data[:-5])
    assert err.value.line == 3


def test_bad_magic_and_missing_key():
    data = dumps_codebook(random_codebook(3, 1, "C", 4, rng=0))
    with pytest.raises(CodebookFormatError):
        loads_codebook(b"NOPE" + data[4:])
    head, rest = data.split(b"\n", 1)
    meta, payload = rest.split(b"\n", 1)
    meta = b" ".join(tok for tok in meta.split(b" ") if not tok.startswith(b"seed="))
    with pytest.raises(CodebookFormatError, match="seed"):
        loads_codebook(head + b"\n" + meta + b"\n" + payload)


def test_non_orthonormal_entry_named():
    C = random_codebook(3, 1, "R", 5, rng=0)
    bases = np.array(C.bases)
    bases[2] *= 2.0
    data = dumps_codebook(Codebook(bases, "R", C.meta, check=False))
    with pytest.raises(CodebookValidationError) as err:
        loads_codebook(data)
    assert err.value.index == 2


def test_from_subspaces():
    entries = [haar_sample(3, 1, "C", s) for s in range(3)]
    C = Codebook.from_subspaces(entries)
    assert C.K == 3 and isinstance(C[0], Subspace)
