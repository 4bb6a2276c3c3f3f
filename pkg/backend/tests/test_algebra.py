import json
from fractions import Fraction

import numpy as np
import pytest

from nrspace.algebra import (
    AlgebraSpec,
    MatrixRep,
    _terms,
    _zero_based,
    basis_vector,
    bracket,
    build_matrix_rep,
    builtin_spec,
    compare_tables,
    in_sp2,
    inner,
    load_spec,
    matrix_inner,
    project,
    reconcile_with_oracle,
    resolve_space,
    save_spec,
    spec_from_json,
    spec_to_json,
    table_from_matrices,
    validate,
    vector,
)
from nrspace.errors import ParseError, ReconstructionError, SpecError
from nrspace.scalars import Radical


def Q(spec, i):
    return basis_vector(spec, i)


def test_bracket_examples(v1):
    assert bracket(v1, Q(v1, 1), Q(v1, 2)).coeffs == Q(v1, 3).coeffs
    result = bracket(v1, Q(v1, 4), Q(v1, 10)).coeffs
    assert result[0] == Radical.surd(6, -1)
    assert result[6] == Radical.surd(10, Fraction(-1, 2))
    assert all(not c for k, c in enumerate(result) if k not in (0, 6))


def test_bracket_is_antisymmetric_and_bilinear(v1, rng):
    for _ in range(20):
        x = vector(v1, [Fraction(int(rng.integers(-3, 4))) for _ in range(10)])
        y = vector(v1, [Fraction(int(rng.integers(-3, 4))) for _ in range(10)])
        z = vector(v1, [Fraction(int(rng.integers(-3, 4))) for _ in range(10)])
        xy = bracket(v1, x, y)
        yx = bracket(v1, y, x)
        assert all(a == -b for a, b in zip(xy.coeffs, yx.coeffs))
        sum_yz = vector(v1, [a + b for a, b in zip(y.coeffs, z.coeffs)])
        lhs = bracket(v1, x, sum_yz)
        rhs = [a + b for a, b in zip(bracket(v1, x, y).coeffs, bracket(v1, x, z).coeffs)]
        assert list(lhs.coeffs) == rhs


def test_float_bracket_matches_exact(v1, rng):
    x = rng.standard_normal(10)
    y = rng.standard_normal(10)
    exact_sum = np.zeros(10)
    for i in range(10):
        for j in range(10):
            e = np.array([float(c) for c in bracket(v1, Q(v1, i + 1), Q(v1, j + 1)).coeffs])
            exact_sum += x[i] * y[j] * e
    fast = np.array(bracket(v1, vector(v1, list(x)), vector(v1, list(y))).coeffs)
    assert np.allclose(fast, exact_sum, atol=1e-12)


def test_project_and_inner(v1):
    x = bracket(v1, Q(v1, 2), Q(v1, 3))  # Q1 + 3 Q8
    assert project(v1, x, "m") == vector(v1, [1, 0, 0, 0, 0, 0, 0])
    assert project(v1, x, "h").coeffs[7] == 3
    assert inner(x, x) == 10
    assert inner(Q(v1, 1), Q(v1, 2)) == 0
    with pytest.raises(SpecError):
        project(v1, x, "k")


def test_vector_padding_and_modes(v1):
    v = vector(v1, [1, 0, 0, 0, 0, 0, 0])
    assert len(v) == 10 and v.exact and v.grading == "m"
    assert not vector(v1, [0.5] * 7).exact
    with pytest.raises(SpecError):
        vector(v1, [1, 2, 3])
    with pytest.raises(SpecError):
        basis_vector(v1, 11)


def test_v1_validates(v1):
    report = validate(v1)
    assert report.ok, report.violations[:3]
    assert report.checked["jacobi"] == 120
    assert report.checked["naturally_reductive"] == 343
    assert report.checked["ad_invariance"] == 1000


@pytest.mark.parametrize("name", ["su2_biinv", "flat7"])
def test_small_builtins_validate(name):
    assert validate(builtin_spec(name)).ok


def test_heisenberg_fails_only_ad_invariance():
    heisenberg = AlgebraSpec(
        name="heisenberg",
        dim_g=3,
        dim_m=3,
        labels=("x", "y", "z"),
        brackets={(0, 1): ((2, Radical.one()),)},
    )
    report = validate(heisenberg)
    assert report.count("jacobi") == 0
    assert report.count("ad_invariance") > 0


def test_broken_jacobi_is_reported():
    broken = AlgebraSpec(
        name="broken",
        dim_g=3,
        dim_m=3,
        labels=("a", "b", "c"),
        brackets=_zero_based({(1, 2): _terms((3, 1)), (2, 3): _terms((1, 1)), (1, 3): _terms((1, -1))}),
        normal=False,
    )
    report = validate(broken)
    assert report.count("jacobi") == 1
    assert report.violations[0].indices == [1, 2, 3]


def test_matrix_rep_basis():
    rep = build_matrix_rep()
    assert np.allclose(rep.S[0], np.diag([1j, -1j, 0, 0]))
    assert all(in_sp2(S) for S in rep.S)
    assert all(in_sp2(X) for X in rep.Q)
    assert np.allclose(rep.Q[1], np.sqrt(5 / 2) * rep.S[2])
    gram = np.array([[matrix_inner(a, b) for b in rep.Q] for a in rep.Q])
    assert np.allclose(gram, np.eye(10), atol=1e-12)


def test_matrix_oracle_agrees_with_table(v1):
    oracle = table_from_matrices(build_matrix_rep())
    assert compare_tables(oracle, v1) == []
    trusted, differing = reconcile_with_oracle(v1)
    assert differing == []
    assert trusted is v1


def test_oracle_overrides_a_corrupted_table(v1, caplog):
    brackets = dict(v1.brackets)
    brackets[(0, 1)] = ((2, Radical.rational(2)),)
    corrupted = AlgebraSpec(
        name=v1.name, dim_g=10, dim_m=7, labels=v1.labels, brackets=brackets, osculating=v1.osculating
    )
    trusted, differing = reconcile_with_oracle(corrupted)
    assert differing == [(1, 2)]
    assert compare_tables(trusted, v1) == []
    assert "erratum" in caplog.text


def test_scaled_basis_cannot_be_reconstructed():
    rep = build_matrix_rep()
    scaled = MatrixRep(S=rep.S, transform=rep.transform * 1.1)
    with pytest.raises(ReconstructionError):
        table_from_matrices(scaled)


def test_spec_file_round_trip(v1, tmp_path):
    path = tmp_path / "v1.json"
    save_spec(v1, str(path))
    loaded = load_spec(str(path))
    assert loaded == v1
    assert loaded.osculating == v1.osculating
    assert resolve_space(str(path)) == v1


def _spec_document(**overrides):
    doc = {
        "name": "tiny",
        "dim_g": 3,
        "dim_m": 3,
        "labels": ["a", "b", "c"],
        "brackets": [{"i": 1, "j": 2, "terms": [{"k": 3, "coeff": ["1", "0", "0", "0", "0", "0", "0", "0"]}]}],
    }
    doc.update(overrides)
    return json.dumps(doc)


def test_parse_error_locations():
    with pytest.raises(ParseError) as info:
        spec_from_json(_spec_document(dim_m=4))
    assert info.value.location == "dim_m"

    bad = [{"i": 1, "j": 2, "terms": [{"k": 3, "coeff": ["1", "x", "0", "0", "0", "0", "0", "0"]}]}]
    with pytest.raises(ParseError) as info:
        spec_from_json(_spec_document(brackets=bad))
    assert info.value.location == "brackets[0].terms[0].coeff[1]"

    with pytest.raises(ParseError) as info:
        spec_from_json(_spec_document(labels=["a"]))
    assert info.value.location == "labels"

    with pytest.raises(ParseError):
        spec_from_json("{not json")


def test_parsed_spec_brackets():
    spec = spec_from_json(_spec_document())
    assert spec.coefficient(0, 1, 2) == 1
    assert spec.coefficient(1, 0, 2) == -1
    assert json.loads(spec_to_json(spec))["name"] == "tiny"


def test_unknown_space():
    with pytest.raises(SpecError):
        resolve_space("no-such-space")
    with pytest.raises(SpecError):
        builtin_spec("sp3")
