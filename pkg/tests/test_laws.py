"""Finitely supported matrix laws: validation, sampling, files."""

import json
import math

import numpy as np
import pytest

from matwalk import (
    LawFileError,
    MatrixLaw,
    SamplerState,
    SquareMatrix,
    canonical_law,
    cocycle_sigma,
    exp_moment,
    irreducibility_diagnostic,
    law_from_jsonable,
    law_to_jsonable,
    load_law,
    recenter,
    save_law,
)
from matwalk.laws import sample, sample_indices

PHI = (1.0 + math.sqrt(5.0)) / 2.0


def test_constructor_validation():
    a = SquareMatrix([[2.0, 1.0], [1.0, 1.0]])
    a3 = SquareMatrix(np.eye(3) + 0.1)
    with pytest.raises(ValueError):
        MatrixLaw([], [])
    with pytest.raises(ValueError):
        MatrixLaw([a, a3], [0.5, 0.5])
    with pytest.raises(ValueError):
        MatrixLaw([a], [0.5, 0.5])
    with pytest.raises(ValueError):
        MatrixLaw([a, a], [1.5, -0.5])
    with pytest.raises(ValueError):
        MatrixLaw([a, a], [0.4, 0.4])


def test_canonical_law_atoms(law_raw):
    assert law_raw.dim == 2
    assert law_raw.n_atoms == 4
    assert law_raw.log_shift == 0.0
    assert all(p == 0.25 for p in law_raw.probs)
    a = law_raw.support[0].entries
    assert np.array_equal(a, [[2.0, 1.0], [1.0, 1.0]])
    # atoms 1 and 3 are the inverses of atoms 0 and 2
    for base, inv in ((0, 1), (2, 3)):
        prod = law_raw.support[base].matmul(law_raw.support[inv]).entries
        assert np.array_equal(prod, np.eye(2))


def test_shifted_matrix_and_recenter(law_raw, x_e1):
    lam = 0.37
    shifted = recenter(law_raw, lam)
    assert shifted.log_shift == -lam
    assert all(a is b for a, b in zip(shifted.support, law_raw.support))
    for i in range(law_raw.n_atoms):
        raw_sig = cocycle_sigma(law_raw.support[i], x_e1)
        new_sig = cocycle_sigma(shifted.shifted_matrix(i), x_e1)
        assert abs(new_sig - (raw_sig - lam)) < 1e-12
    # second recentering stacks additively
    again = recenter(shifted, -lam)
    assert again.log_shift == 0.0
    with pytest.raises(ValueError):
        recenter(law_raw, math.inf)


def test_exp_moment_closed_form(law_raw):
    # all four canonical atoms have operator norm phi^2, so the
    # alpha = 1/2 moment is the golden ratio exactly
    got = exp_moment(law_raw, 0.5)
    assert abs(got - PHI) < 1e-12
    # scalar shift enters through max(e^s |g|, |g^-1| / e^s)
    s = 0.3
    want = PHI * math.exp(s / 2.0)
    assert abs(exp_moment(canonical_law(log_shift=s), 0.5) - want) < 1e-12
    assert abs(exp_moment(canonical_law(log_shift=-s), 0.5) - want) < 1e-12
    with pytest.raises(ValueError):
        exp_moment(law_raw, 0.0)


def test_max_abs_log_norm(law_raw):
    want = math.log(PHI * PHI)
    assert abs(law_raw.max_abs_log_norm() - want) < 1e-12
    shifted = recenter(law_raw, 0.25)
    assert abs(shifted.max_abs_log_norm() - (want + 0.25)) < 1e-12


def test_sample_matches_vectorized_indices(law_raw):
    seed, stream, n = 2024, 3, 400
    idx = sample_indices(law_raw, seed, stream, 0, n)
    s = SamplerState(seed, stream_id=stream)
    for k in range(n):
        m = sample(law_raw, s)
        assert np.array_equal(m.entries, law_raw.shifted_matrix(idx[k]).entries)
    # offset slices agree with the full vector
    tail = sample_indices(law_raw, seed, stream, 150, n - 150)
    assert np.array_equal(tail, idx[150:])


def test_sample_frequencies():
    a = SquareMatrix([[2.0, 1.0], [1.0, 1.0]])
    law = MatrixLaw([a, a.inverse(), a.matmul(a)], [0.6, 0.3, 0.1])
    n = 200_000
    idx = sample_indices(law, 7, 0, 0, n)
    counts = np.bincount(idx, minlength=3)
    for k, p in enumerate(law.probs):
        se = math.sqrt(n * p * (1 - p))
        assert abs(counts[k] - n * p) < 4.5 * se


def test_inverse_law(law_raw, x_e1):
    inv = law_raw.inverse_law()
    assert inv.probs == law_raw.probs
    assert inv.log_shift == -law_raw.log_shift
    for i in range(law_raw.n_atoms):
        prod = law_raw.support[i].matmul(inv.support[i]).entries
        assert np.max(np.abs(prod - np.eye(2))) < 1e-12
    shifted = recenter(law_raw, 0.4)
    assert shifted.inverse_law().log_shift == 0.4


def test_content_hash(law_raw):
    h = law_raw.content_hash()
    assert len(h) == 64 and set(h) <= set("0123456789abcdef")
    assert h == canonical_law().content_hash()
    assert h != recenter(law_raw, 1e-9).content_hash()
    a = law_raw.support[0]
    other = MatrixLaw([a, a.inverse()], [0.5, 0.5])
    assert h != other.content_hash()


def test_law_file_roundtrip(tmp_path, law_centered):
    path = str(tmp_path / "law.json")
    save_law(law_centered, path)
    back = load_law(path)
    assert law_to_jsonable(back) == law_to_jsonable(law_centered)
    assert back.content_hash() == law_centered.content_hash()


def test_law_file_errors(tmp_path, law_raw):
    good = law_to_jsonable(law_raw)

    def expect_bad(obj, fragment):
        with pytest.raises(LawFileError) as e:
            law_from_jsonable(obj)
        assert fragment in str(e.value)

    expect_bad([1, 2], "JSON object")
    expect_bad({k: v for k, v in good.items() if k != "probs"}, "missing")
    expect_bad({**good, "extra": 1}, "unknown")
    expect_bad({**good, "dim": 1}, "dim")
    expect_bad({**good, "matrices": []}, "matrices")
    expect_bad({**good, "matrices": [[1.0, 0.0, 0.0]] + good["matrices"][1:]}, "matrices[0]")
    expect_bad({**good, "matrices": [[1.0, 0.0, 0.0, "x"]] + good["matrices"][1:]}, "finite")
    expect_bad({**good, "probs": [0.25, 0.25, 0.25, -0.25]}, "probs[3]")
    expect_bad({**good, "probs": [0.3, 0.3, 0.3, 0.3]}, "not 1")
    expect_bad({**good, "log_shift": "big"}, "log_shift")
    # singular atom is rejected with a located message
    bad = {**good, "matrices": [[1.0, 0.0, 0.0, 0.0]] + good["matrices"][1:]}
    expect_bad(bad, "matrices[0]")

    missing = str(tmp_path / "nope.json")
    with pytest.raises(LawFileError):
        load_law(missing)
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    with pytest.raises(LawFileError) as e:
        load_law(str(broken))
    assert "1:" in str(e.value)


def test_jsonable_is_json_serializable(law_centered):
    text = json.dumps(law_to_jsonable(law_centered))
    assert law_from_jsonable(json.loads(text)).content_hash() == law_centered.content_hash()


def test_irreducibility_diagnostic(law_raw):
    rep = irreducibility_diagnostic(law_raw)
    assert rep.verdict == "pass"
    assert rep.proximal_witness
    assert rep.witness_length is not None and rep.witness_length <= 2
    assert rep.attractor_clusters > 4

    # deterministic contraction: every line but e2 funnels into e1
    d1 = SquareMatrix([[2.0, 0.0], [0.0, 0.5]])
    rep2 = irreducibility_diagnostic(MatrixLaw([d1], [1.0]))
    assert rep2.verdict == "suspect"
    assert rep2.attractor_clusters <= 4

    # pure rotation: no word has a dominant eigenvalue
    c, s = math.cos(1.0), math.sin(1.0)
    rot = SquareMatrix([[c, -s], [s, c]])
    rep3 = irreducibility_diagnostic(MatrixLaw([rot], [1.0]))
    assert rep3.verdict == "suspect"
    assert not rep3.proximal_witness


def test_thresholds_are_monotone(law_raw):
    thr = law_raw.thresholds()
    assert thr.dtype == np.uint64
    assert np.all(np.diff(thr.astype(np.float64)) > 0)
