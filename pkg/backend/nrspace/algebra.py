"""Naturally reductive homogeneous spaces as structure-constant data.

Basis convention: indices 0..dim_m-1 span m, dim_m..dim_g-1 span h, and the inner product
is orthonormal in this basis. File and user-facing indices are 1-based (Q1..Q10).
"""
from __future__ import annotations

import itertools
import json
import logging
import os
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from nrspace.config import get_snap_tolerance
from nrspace.errors import ParseError, ReconstructionError, SpecError
from nrspace.scalars import Radical, snap_radical

logger = logging.getLogger(__name__)

Terms = Tuple[Tuple[int, Radical], ...]
Scalar = Union[Radical, float]


@dataclass(frozen=True)
class AlgebraSpec:
    name: str
    dim_g: int
    dim_m: int
    labels: Tuple[str, ...]
    # 0-based (i, j) -> ((k, coeff), ...); normally i < j, antisymmetry implied
    brackets: Dict[Tuple[int, int], Terms]
    normal: bool = True
    # known relation R^(r+1) = sum c_i R^(i) along unit geodesics; () means locally symmetric
    osculating: Optional[Tuple[Fraction, ...]] = field(default=None, compare=False)

    @property
    def dim_h(self) -> int:
        return self.dim_g - self.dim_m

    @cached_property
    def table(self) -> Dict[Tuple[int, int], Dict[int, Radical]]:
        """Full antisymmetric bracket table over ordered pairs, zero entries omitted."""
        table: Dict[Tuple[int, int], Dict[int, Radical]] = {}
        for (i, j), terms in self.brackets.items():
            if i == j:
                continue
            if i > j and (j, i) in self.brackets:
                continue
            row = {}
            for k, c in terms:
                if c:
                    row[k] = row.get(k, Radical.zero()) + c
            row = {k: c for k, c in row.items() if c}
            if row:
                table[(i, j)] = row
                table[(j, i)] = {k: -c for k, c in row.items()}
        return table

    @cached_property
    def tensor(self) -> np.ndarray:
        """Float structure constants c[i, j, k] with [e_i, e_j] = sum_k c[i, j, k] e_k."""
        c = np.zeros((self.dim_g, self.dim_g, self.dim_g))
        for (i, j), row in self.table.items():
            for k, value in row.items():
                c[i, j, k] = float(value)
        return c

    def coefficient(self, i: int, j: int, k: int) -> Radical:
        return self.table.get((i, j), {}).get(k, Radical.zero())


def structure_tensor(spec: AlgebraSpec) -> np.ndarray:
    """c[i, j, k] with [e_i, e_j] = sum_k c[i, j, k] e_k; the float bracket path reads it."""
    return spec.tensor


@dataclass(frozen=True)
class AlgVec:
    coeffs: Tuple[Scalar, ...]
    grading: str = "full"

    @property
    def exact(self) -> bool:
        return all(isinstance(c, Radical) for c in self.coeffs)

    def to_array(self) -> np.ndarray:
        if self.exact:
            out = np.empty(len(self.coeffs), dtype=object)
            out[:] = list(self.coeffs)
            return out
        return np.array([float(c) for c in self.coeffs])

    def __len__(self) -> int:
        return len(self.coeffs)


def _exact_scalar(value) -> Optional[Radical]:
    if isinstance(value, Radical):
        return value
    if isinstance(value, (int, Fraction)) and not isinstance(value, bool):
        return Radical.rational(value)
    if isinstance(value, np.integer):
        return Radical.rational(int(value))
    return None


def vector(spec: AlgebraSpec, values: Sequence, grading: str = "full") -> AlgVec:
    """Build an AlgVec; a dim_m-long input is padded with zeros on h."""
    values = list(values)
    if len(values) == spec.dim_m and spec.dim_m != spec.dim_g:
        values = values + [0] * spec.dim_h
        grading = "m"
    if len(values) != spec.dim_g:
        raise SpecError(f"vector has {len(values)} entries, {spec.name} needs {spec.dim_g} or {spec.dim_m}")
    exact = [_exact_scalar(v) for v in values]
    if all(e is not None for e in exact):
        return AlgVec(tuple(exact), grading)
    return AlgVec(tuple(float(v) for v in values), grading)


def basis_vector(spec: AlgebraSpec, index: int, exact: bool = True) -> AlgVec:
    """The basis element with 1-based index, e.g. basis_vector(V1, 3) is Q3."""
    if not 1 <= index <= spec.dim_g:
        raise SpecError(f"basis index {index} outside 1..{spec.dim_g}")
    one, zero = (Radical.one(), Radical.zero()) if exact else (1.0, 0.0)
    grading = "m" if index <= spec.dim_m else "h"
    return AlgVec(tuple(one if k == index - 1 else zero for k in range(spec.dim_g)), grading)


def _check_conforms(spec: AlgebraSpec, *vectors: AlgVec) -> None:
    for x in vectors:
        if len(x) != spec.dim_g:
            raise SpecError(f"vector of length {len(x)} does not conform to {spec.name} (dim_g={spec.dim_g})")


def _zero_of(exact: bool) -> Scalar:
    return Radical.zero() if exact else 0.0


def bracket(spec: AlgebraSpec, x: AlgVec, y: AlgVec) -> AlgVec:
    _check_conforms(spec, x, y)
    if x.exact and y.exact:
        out = [Radical.zero()] * spec.dim_g
        for i, xi in enumerate(x.coeffs):
            if not xi:
                continue
            for j, yj in enumerate(y.coeffs):
                if not yj:
                    continue
                row = spec.table.get((i, j))
                if not row:
                    continue
                weight = xi * yj
                for k, c in row.items():
                    out[k] = out[k] + weight * c
        return AlgVec(tuple(out))
    values = np.einsum("ijk,i,j->k", structure_tensor(spec), x.to_array().astype(float), y.to_array().astype(float))
    return AlgVec(tuple(float(v) for v in values))


def project(spec: AlgebraSpec, x: AlgVec, part: str) -> AlgVec:
    _check_conforms(spec, x)
    if part not in ("m", "h"):
        raise SpecError(f"part must be 'm' or 'h', got {part!r}")
    zero = _zero_of(x.exact)
    keep = range(spec.dim_m) if part == "m" else range(spec.dim_m, spec.dim_g)
    return AlgVec(tuple(c if k in keep else zero for k, c in enumerate(x.coeffs)), part)


def inner(x: AlgVec, y: AlgVec) -> Scalar:
    if len(x) != len(y):
        raise SpecError("inner product of vectors from different specs")
    if x.exact and y.exact:
        total = Radical.zero()
        for a, b in zip(x.coeffs, y.coeffs):
            if a and b:
                total = total + a * b
        return total
    return float(np.dot(x.to_array().astype(float), y.to_array().astype(float)))


# -- validation ------------------------------------------------------------------------


class Violation(BaseModel):
    kind: str
    indices: List[int] = Field(..., description="1-based basis indices")
    detail: str


class ValidationReport(BaseModel):
    space: str
    checked: Dict[str, int] = Field(default_factory=dict)
    violations: List[Violation] = Field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def count(self, kind: str) -> int:
        return sum(1 for v in self.violations if v.kind == kind)


def _nested(spec: AlgebraSpec, i: int, j: int, k: int) -> Dict[int, Radical]:
    """[[e_i, e_j], e_k] as a sparse coefficient dict."""
    out: Dict[int, Radical] = {}
    for l, c in spec.table.get((i, j), {}).items():
        for m, d in spec.table.get((l, k), {}).items():
            out[m] = out.get(m, Radical.zero()) + c * d
    return out


def validate(spec: AlgebraSpec) -> ValidationReport:
    """Check every algebraic hypothesis exactly; violations are returned, never raised."""
    report = ValidationReport(space=spec.name)
    g, dm = spec.dim_g, spec.dim_m
    m_range, h_range = range(dm), range(dm, g)

    def flag(kind: str, indices: Iterable[int], detail: str) -> None:
        report.violations.append(Violation(kind=kind, indices=[i + 1 for i in indices], detail=detail))

    # antisymmetry of the stored entries
    for (i, j), terms in spec.brackets.items():
        if i == j and any(c for _, c in terms):
            flag("antisymmetry", (i, i), "[x, x] != 0")
        elif i < j and (j, i) in spec.brackets:
            forward = {k: c for k, c in terms}
            backward = {k: -c for k, c in spec.brackets[(j, i)]}
            keys = set(forward) | set(backward)
            if any(forward.get(k, Radical.zero()) != backward.get(k, Radical.zero()) for k in keys):
                flag("antisymmetry", (i, j), "[e_i, e_j] != -[e_j, e_i]")
    report.checked["antisymmetry"] = g * (g + 1) // 2

    triples = list(itertools.combinations(range(g), 3))
    for i, j, k in triples:
        total: Dict[int, Radical] = {}
        for a, b, c in ((i, j, k), (j, k, i), (k, i, j)):
            for m, value in _nested(spec, a, b, c).items():
                total[m] = total.get(m, Radical.zero()) + value
        residue = {m: v for m, v in total.items() if v}
        if residue:
            shown = ", ".join(f"e{m + 1}: {v}" for m, v in sorted(residue.items()))
            flag("jacobi", (i, j, k), f"cyclic sum = {shown}")
    report.checked["jacobi"] = len(triples)

    for i in m_range:
        for a in h_range:
            leaked = [k for k in spec.table.get((i, a), {}) if k >= dm]
            if leaked:
                flag("reductive", (i, a), f"[m, h] has h-components on {[k + 1 for k in leaked]}")
    report.checked["reductive"] = dm * spec.dim_h

    for a, b in itertools.combinations(h_range, 2):
        leaked = [k for k in spec.table.get((a, b), {}) if k < dm]
        if leaked:
            flag("subalgebra", (a, b), f"[h, h] has m-components on {[k + 1 for k in leaked]}")
    report.checked["subalgebra"] = spec.dim_h * (spec.dim_h - 1) // 2

    for u in m_range:
        for v in m_range:
            for w in m_range:
                value = spec.coefficient(u, v, w) + spec.coefficient(u, w, v)
                if value:
                    flag("naturally_reductive", (u, v, w), f"<[u,v]_m,w> + <v,[u,w]_m> = {value}")
    report.checked["naturally_reductive"] = dm ** 3

    if spec.normal:
        for u in range(g):
            for v in range(g):
                for w in range(g):
                    lhs, rhs = spec.coefficient(u, v, w), spec.coefficient(v, w, u)
                    if lhs != rhs:
                        flag("ad_invariance", (u, v, w), f"<[u,v],w> = {lhs} but <u,[v,w]> = {rhs}")
        report.checked["ad_invariance"] = g ** 3

    if report.violations:
        logger.warning(f"[validate] {spec.name}: {len(report.violations)} violations")
    else:
        logger.info(f"[validate] {spec.name}: 0 violations over {sum(report.checked.values())} checks")
    return report


# -- builtin spaces --------------------------------------------------------------------


def _terms(*pairs: Tuple[int, Union[str, int, Fraction]]) -> Terms:
    from nrspace.scalars import parse_radical

    out = []
    for k, value in pairs:
        coeff = parse_radical(value) if isinstance(value, str) else Radical.rational(value)
        out.append((k - 1, coeff))
    return tuple(sorted(out, key=lambda item: item[0]))


# the sp(2) = m + su(2) table, 1-based, i < j
_SP2_TABLE: Dict[Tuple[int, int], Terms] = {
    (1, 2): _terms((3, 1)),
    (1, 3): _terms((2, -1)),
    (1, 4): _terms((5, -1), (10, "-sqrt6")),
    (1, 5): _terms((4, 1), (9, "sqrt6")),
    (1, 6): _terms((7, -1)),
    (1, 7): _terms((6, 1)),
    (1, 9): _terms((5, "-sqrt6")),
    (1, 10): _terms((4, "sqrt6")),
    (2, 3): _terms((1, 1), (8, 3)),
    (2, 4): _terms((6, 1)),
    (2, 5): _terms((7, -1)),
    (2, 6): _terms((4, -1), (9, "sqrt(3/2)")),
    (2, 7): _terms((5, 1), (10, "-sqrt(3/2)")),
    (2, 8): _terms((3, -3)),
    (2, 9): _terms((6, "-sqrt(3/2)")),
    (2, 10): _terms((7, "sqrt(3/2)")),
    (3, 4): _terms((7, 1)),
    (3, 5): _terms((6, 1)),
    (3, 6): _terms((5, -1), (10, "sqrt(3/2)")),
    (3, 7): _terms((4, -1), (9, "sqrt(3/2)")),
    (3, 8): _terms((2, 3)),
    (3, 9): _terms((7, "-sqrt(3/2)")),
    (3, 10): _terms((6, "-sqrt(3/2)")),
    (4, 5): _terms((1, -1), (8, 1)),
    (4, 6): _terms((2, 1), (9, "sqrt(5/2)")),
    (4, 7): _terms((3, 1), (10, "sqrt(5/2)")),
    (4, 8): _terms((5, -1)),
    (4, 9): _terms((6, "-sqrt(5/2)")),
    (4, 10): _terms((1, "-2*sqrt(3/2)"), (7, "-sqrt(5/2)")),
    (5, 6): _terms((3, 1), (10, "-sqrt(5/2)")),
    (5, 7): _terms((2, -1), (9, "sqrt(5/2)")),
    (5, 8): _terms((4, 1)),
    (5, 9): _terms((1, "2*sqrt(3/2)"), (7, "-sqrt(5/2)")),
    (5, 10): _terms((6, "sqrt(5/2)")),
    (6, 7): _terms((1, -1), (8, 2)),
    (6, 8): _terms((7, -2)),
    (6, 9): _terms((2, "sqrt(3/2)"), (4, "sqrt(5/2)")),
    (6, 10): _terms((3, "sqrt(3/2)"), (5, "-sqrt(5/2)")),
    (7, 8): _terms((6, 2)),
    (7, 9): _terms((3, "sqrt(3/2)"), (5, "sqrt(5/2)")),
    (7, 10): _terms((2, "-sqrt(3/2)"), (4, "sqrt(5/2)")),
    (8, 9): _terms((10, 1)),
    (8, 10): _terms((9, -1)),
    (9, 10): _terms((8, 1)),
}


def _zero_based(table: Dict[Tuple[int, int], Terms]) -> Dict[Tuple[int, int], Terms]:
    return {(i - 1, j - 1): terms for (i, j), terms in table.items()}


def sp2_su2() -> AlgebraSpec:
    """The Berger space V1 = Sp(2)/SU(2): m = span(Q1..Q7), h = span(Q8, Q9, Q10)."""
    return AlgebraSpec(
        name="sp2_su2",
        dim_g=10,
        dim_m=7,
        labels=tuple(f"Q{i}" for i in range(1, 11)),
        brackets=_zero_based(_SP2_TABLE),
        normal=True,
        osculating=(Fraction(-1), Fraction(0)),
    )


def su2_biinv() -> AlgebraSpec:
    """SU(2) with a bi-invariant metric, h = 0: constant curvature 1/4."""
    return AlgebraSpec(
        name="su2_biinv",
        dim_g=3,
        dim_m=3,
        labels=("e1", "e2", "e3"),
        brackets=_zero_based({(1, 2): _terms((3, 1)), (1, 3): _terms((2, -1)), (2, 3): _terms((1, 1))}),
        normal=True,
        osculating=(),
    )


def flat_spec(dim: int = 7) -> AlgebraSpec:
    """Abelian algebra: flat R^dim."""
    if dim < 1:
        raise SpecError("flat space needs a positive dimension")
    return AlgebraSpec(
        name=f"flat{dim}",
        dim_g=dim,
        dim_m=dim,
        labels=tuple(f"e{i}" for i in range(1, dim + 1)),
        brackets={},
        normal=True,
        osculating=(),
    )


BUILTINS = {
    "sp2_su2": sp2_su2,
    "su2_biinv": su2_biinv,
    "flat7": lambda: flat_spec(7),
}

_BUILTIN_CACHE: Dict[str, AlgebraSpec] = {}


def builtin_spec(name: str) -> AlgebraSpec:
    if name not in BUILTINS:
        raise SpecError(f"unknown builtin space {name!r}; choose from {sorted(BUILTINS)}")
    if name not in _BUILTIN_CACHE:
        _BUILTIN_CACHE[name] = BUILTINS[name]()
    return _BUILTIN_CACHE[name]


def resolve_space(name_or_path: str) -> AlgebraSpec:
    """A builtin name or the path of a spec file."""
    if name_or_path in BUILTINS:
        return builtin_spec(name_or_path)
    if os.path.exists(name_or_path):
        return load_spec(name_or_path)
    raise SpecError(f"unknown space {name_or_path!r}: not a builtin and no such file")


# -- matrix representation of sp(2) ----------------------------------------------------


@dataclass(frozen=True)
class MatrixRep:
    S: np.ndarray  # (10, 4, 4) complex
    transform: np.ndarray  # (10, 10) real, Q = transform @ S

    @property
    def Q(self) -> np.ndarray:
        return np.tensordot(self.transform, self.S, axes=1)


def sp2_element(a11: complex, a12: complex, a13: complex, a14: complex, a33: complex, a34: complex) -> np.ndarray:
    """The 4x4 skew-Hermitian block pattern of sp(2), read literally from its free entries."""
    c = np.conj
    return np.array(
        [
            [a11, a12, a13, a14],
            [-c(a12), -a11, c(a14), -c(a13)],
            [-c(a13), -a14, a33, a34],
            [-c(a14), a13, -c(a34), -a33],
        ],
        dtype=complex,
    )


def in_sp2(X: np.ndarray, tol: float = 1e-12) -> bool:
    if not np.allclose(X, -X.conj().T, atol=tol):
        return False
    pattern = sp2_element(X[0, 0], X[0, 1], X[0, 2], X[0, 3], X[2, 2], X[2, 3])
    return bool(np.allclose(X, pattern, atol=tol) and abs(X[0, 0].real) <= tol and abs(X[2, 2].real) <= tol)


def matrix_inner(A: np.ndarray, B: np.ndarray) -> float:
    """<A, B> = -(1/5) Tr(AB)."""
    return float(-np.trace(A @ B).real / 5.0)


def build_matrix_rep() -> MatrixRep:
    free = [
        dict(a11=1j),
        dict(a33=1j),
        dict(a12=1),
        dict(a12=1j),
        dict(a34=1),
        dict(a34=1j),
        dict(a13=1),
        dict(a13=1j),
        dict(a14=1),
        dict(a14=1j),
    ]
    base = dict(a11=0, a12=0, a13=0, a14=0, a33=0, a34=0)
    S = np.array([sp2_element(**{**base, **entries}) for entries in free])

    r52 = float(Radical.sqrt_of(Fraction(5, 2)))
    r6h, r2h = np.sqrt(6) / 2, np.sqrt(2) / 2
    r5h, r3h = np.sqrt(5) / 2, np.sqrt(3) / 2
    T = np.zeros((10, 10))
    T[0, 0], T[0, 1] = 0.5, -1.5
    T[1, 2] = r52
    T[2, 3] = r52
    T[3, 4], T[3, 6] = r6h, -r2h
    T[4, 5], T[4, 7] = r6h, -r2h
    T[5, 8] = r5h
    T[6, 9] = r5h
    T[7, 0], T[7, 1] = 1.5, 0.5
    T[8, 4], T[8, 6] = 1.0, r3h
    T[9, 5], T[9, 7] = 1.0, r3h
    return MatrixRep(S=S, transform=T)


def table_from_matrices(
    rep: MatrixRep,
    name: str = "sp2_su2",
    dim_m: int = 7,
    tol: Optional[float] = None,
) -> AlgebraSpec:
    """Rebuild the bracket table from matrix commutators, snapping coefficients to radicals."""
    tol = get_snap_tolerance() if tol is None else tol
    Q = rep.Q
    n = len(Q)
    brackets: Dict[Tuple[int, int], Terms] = {}
    for i, j in itertools.combinations(range(n), 2):
        C = Q[i] @ Q[j] - Q[j] @ Q[i]
        coeffs = [matrix_inner(C, Q[k]) for k in range(n)]
        residual = np.max(np.abs(C - np.tensordot(coeffs, Q, axes=1)))
        if residual > 1e-9:
            raise ReconstructionError(f"[Q{i + 1}, Q{j + 1}] leaves the span of the basis (residual {residual:.3e})")
        terms = []
        for k, value in enumerate(coeffs):
            snapped = snap_radical(value, tol=tol)
            if snapped is None:
                raise ReconstructionError(
                    f"[Q{i + 1}, Q{j + 1}] coefficient on Q{k + 1} = {value:.15g} is not a small radical"
                )
            if snapped:
                terms.append((k, snapped))
        if terms:
            brackets[(i, j)] = tuple(terms)
    logger.info(f"[table_from_matrices] rebuilt {len(brackets)} nonzero brackets from {n} matrices")
    return AlgebraSpec(
        name=name,
        dim_g=n,
        dim_m=dim_m,
        labels=tuple(f"Q{i}" for i in range(1, n + 1)),
        brackets=brackets,
        normal=True,
    )


def compare_tables(left: AlgebraSpec, right: AlgebraSpec) -> List[Tuple[int, int]]:
    """1-based unordered pairs on which two specs' brackets differ."""
    if left.dim_g != right.dim_g:
        raise SpecError("tables of different dimension")
    differing = []
    for i, j in itertools.combinations(range(left.dim_g), 2):
        if left.table.get((i, j), {}) != right.table.get((i, j), {}):
            differing.append((i + 1, j + 1))
    return differing


def reconcile_with_oracle(spec: AlgebraSpec) -> Tuple[AlgebraSpec, List[Tuple[int, int]]]:
    """Return the table to trust for sp2_su2; the matrix oracle wins on any disagreement."""
    oracle = table_from_matrices(build_matrix_rep(), name=spec.name, dim_m=spec.dim_m)
    differing = compare_tables(spec, oracle)
    if not differing:
        return spec, []
    for i, j in differing:
        logger.warning(
            f"[reconcile_with_oracle] erratum in printed table at [Q{i}, Q{j}]: "
            f"printed {spec.table.get((i - 1, j - 1), {})}, oracle {oracle.table.get((i - 1, j - 1), {})}"
        )
    trusted = AlgebraSpec(
        name=spec.name,
        dim_g=spec.dim_g,
        dim_m=spec.dim_m,
        labels=spec.labels,
        brackets=oracle.brackets,
        normal=spec.normal,
        osculating=spec.osculating,
    )
    return trusted, differing


# -- spec files ------------------------------------------------------------------------


class TermModel(BaseModel):
    k: int = Field(..., ge=1)
    coeff: List[str] = Field(..., min_length=8, max_length=8)


class BracketModel(BaseModel):
    i: int = Field(..., ge=1)
    j: int = Field(..., ge=1)
    terms: List[TermModel] = Field(default_factory=list)


class SpecFileModel(BaseModel):
    name: str = Field(..., min_length=1)
    dim_g: int = Field(..., ge=1)
    dim_m: int = Field(..., ge=0)
    labels: List[str]
    normal: bool = True
    brackets: List[BracketModel] = Field(default_factory=list)
    osculating: Optional[List[str]] = None


def spec_from_json(text: str) -> AlgebraSpec:
    try:
        model = SpecFileModel.model_validate_json(text)
    except ValidationError as exc:
        first = exc.errors()[0]
        location = ".".join(str(part) for part in first.get("loc", ()))
        raise ParseError(first.get("msg", "invalid spec file"), location or None) from exc

    if model.dim_m > model.dim_g:
        raise ParseError(f"dim_m={model.dim_m} exceeds dim_g={model.dim_g}", "dim_m")
    if len(model.labels) != model.dim_g:
        raise ParseError(f"{len(model.labels)} labels for dim_g={model.dim_g}", "labels")

    brackets: Dict[Tuple[int, int], Terms] = {}
    for n, entry in enumerate(model.brackets):
        where = f"brackets[{n}]"
        for key in ("i", "j"):
            if getattr(entry, key) > model.dim_g:
                raise ParseError(f"index {getattr(entry, key)} exceeds dim_g={model.dim_g}", f"{where}.{key}")
        pair = (entry.i - 1, entry.j - 1)
        if pair in brackets:
            raise ParseError(f"duplicate bracket ({entry.i}, {entry.j})", where)
        terms = []
        seen = set()
        for t, term in enumerate(entry.terms):
            if term.k > model.dim_g:
                raise ParseError(f"index {term.k} exceeds dim_g={model.dim_g}", f"{where}.terms[{t}].k")
            if term.k in seen:
                raise ParseError(f"repeated basis index {term.k}", f"{where}.terms[{t}].k")
            seen.add(term.k)
            for c, raw in enumerate(term.coeff):
                try:
                    Fraction(raw.strip())
                except (ValueError, ZeroDivisionError) as exc:
                    raise ParseError(f"{raw!r} is not a rational", f"{where}.terms[{t}].coeff[{c}]") from exc
            terms.append((term.k - 1, Radical.from_strings(term.coeff)))
        brackets[pair] = tuple(terms)

    osculating = None
    if model.osculating is not None:
        try:
            osculating = tuple(Fraction(raw.strip()) for raw in model.osculating)
        except (ValueError, ZeroDivisionError) as exc:
            raise ParseError("osculating relation must be rationals", "osculating") from exc

    return AlgebraSpec(
        name=model.name,
        dim_g=model.dim_g,
        dim_m=model.dim_m,
        labels=tuple(model.labels),
        brackets=brackets,
        normal=model.normal,
        osculating=osculating,
    )


def spec_to_json(spec: AlgebraSpec) -> str:
    model = SpecFileModel(
        name=spec.name,
        dim_g=spec.dim_g,
        dim_m=spec.dim_m,
        labels=list(spec.labels),
        normal=spec.normal,
        brackets=[
            BracketModel(
                i=i + 1,
                j=j + 1,
                terms=[TermModel(k=k + 1, coeff=c.to_strings()) for k, c in terms],
            )
            for (i, j), terms in spec.brackets.items()
        ],
        osculating=None if spec.osculating is None else [str(c) for c in spec.osculating],
    )
    return json.dumps(model.model_dump(exclude_none=True), indent=2)


def load_spec(path: str) -> AlgebraSpec:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise SpecError(f"cannot read spec file {path!r}: {exc}") from exc
    spec = spec_from_json(text)
    logger.info(f"[load_spec] {path}: {spec.name} dim_g={spec.dim_g} dim_m={spec.dim_m}")
    return spec


def save_spec(spec: AlgebraSpec, path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(spec_to_json(spec))
        handle.write("\n")
