"""Jacobi operator R_0, its covariant derivatives and the curve R_t along a geodesic.

Endomorphisms of m are plain numpy arrays in the Q-basis frame: dtype=object holding
Radical entries in exact mode, float64 otherwise. Float directions may carry a leading
batch axis, in which case every returned matrix carries it too.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from nrspace.algebra import AlgebraSpec, AlgVec, basis_vector, bracket, builtin_spec, inner, project, structure_tensor
from nrspace.errors import DirectionError, SpecError, UnsupportedSpaceError
from nrspace.scalars import Radical, binomial, parse_radical

logger = logging.getLogger(__name__)

Direction = Union[AlgVec, Sequence, np.ndarray]
Endo = np.ndarray

_UNIT_TOL = 1e-12
_RANK_TOL = 1e-9


def _zeros(shape, exact: bool) -> np.ndarray:
    if not exact:
        return np.zeros(shape)
    out = np.empty(shape, dtype=object)
    out.fill(Radical.zero())
    return out


def to_float(E: np.ndarray) -> np.ndarray:
    if E.dtype == object:
        return np.vectorize(float, otypes=[float])(E)
    return np.asarray(E, dtype=float)


def is_exact(E: np.ndarray) -> bool:
    return E.dtype == object


def as_direction(spec: AlgebraSpec, v: Direction, require_unit: bool = True) -> Tuple[np.ndarray, bool]:
    """Return (coefficients on all of g, exact) after checking v lies in m."""
    if isinstance(v, AlgVec):
        arr, exact = v.to_array(), v.exact
    else:
        arr = np.asarray(v)
        exact = arr.dtype == object
        if exact:
            arr = np.vectorize(Radical.coerce, otypes=[object])(arr)
        else:
            arr = arr.astype(float)
    if exact and arr.ndim != 1:
        raise DirectionError("exact directions cannot be batched")
    if arr.shape[-1] == spec.dim_m and spec.dim_m != spec.dim_g:
        pad = _zeros(arr.shape[:-1] + (spec.dim_h,), exact)
        arr = np.concatenate([arr, pad], axis=-1)
    if arr.shape[-1] != spec.dim_g:
        raise SpecError(f"direction of length {arr.shape[-1]} does not conform to {spec.name}")

    dm = spec.dim_m
    if exact:
        if any(arr[dm:]):
            raise DirectionError("direction has components in h")
        norm2 = Radical.zero()
        for c in arr[:dm]:
            norm2 = norm2 + c * c
        if not norm2:
            raise DirectionError("zero direction")
        if require_unit and norm2 != 1:
            raise DirectionError(f"direction is not a unit vector (|v|^2 = {norm2})")
        return arr, True

    if np.any(np.abs(arr[..., dm:]) > _UNIT_TOL):
        raise DirectionError("direction has components in h")
    norms = np.linalg.norm(arr, axis=-1)
    if np.any(norms == 0.0):
        raise DirectionError("zero direction")
    if require_unit and np.any(np.abs(norms - 1.0) > _UNIT_TOL):
        raise DirectionError(f"direction is not a unit vector (|v| = {np.max(np.abs(norms)):.17g})")
    return arr, False


def normalize_direction(values: Sequence[float]) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    norm = np.linalg.norm(arr)
    if norm == 0.0 or not np.isfinite(norm):
        raise DirectionError("direction must be a nonzero finite vector")
    return arr / norm


# -- bracket chains --------------------------------------------------------------------


def _right_bracket(spec: AlgebraSpec, arr: np.ndarray, exact: bool) -> np.ndarray:
    if not exact:
        return np.einsum("ijk,...j->...ki", structure_tensor(spec), arr)
    M = _zeros((spec.dim_g, spec.dim_g), True)
    for (i, j), row in spec.table.items():
        vj = arr[j]
        if not vj:
            continue
        for k, c in row.items():
            M[k, i] = M[k, i] + c * vj
    return M


def _keep_rows(X: np.ndarray, dim_m: int, part: str) -> np.ndarray:
    out = X.copy()
    zero = Radical.zero() if X.dtype == object else 0.0
    if part == "h":
        out[..., :dim_m, :] = zero
    else:
        out[..., dim_m:, :] = zero
    return out


def _chain(M: np.ndarray, dim_m: int, h_position: int, length: int) -> np.ndarray:
    """P_m M pi_(length-1) M ... pi_1 M on m, pi_j the h-projection iff j == h_position."""
    current = M[..., :, :dim_m]
    for j in range(1, length):
        current = M @ _keep_rows(current, dim_m, "h" if j == h_position else "m")
    return current[..., :dim_m, :]


def lambda_matrix(spec: AlgebraSpec, v: Direction) -> Endo:
    """Lambda(v): X -> (1/2)[v, X]_m, skew on m."""
    arr, exact = as_direction(spec, v, require_unit=False)
    M = _right_bracket(spec, arr, exact)[..., : spec.dim_m, : spec.dim_m]
    return M * Fraction(-1, 2) if exact else -0.5 * M


def jacobi_operator(spec: AlgebraSpec, v: Direction) -> Endo:
    """R_0(X) = -[[X, v]_h, v] - (1/4)[[X, v]_m, v]_m."""
    arr, exact = as_direction(spec, v)
    M = _right_bracket(spec, arr, exact)
    through_h = _chain(M, spec.dim_m, 1, 2)
    through_m = _chain(M, spec.dim_m, 0, 2)
    if exact:
        return -through_h + through_m * Fraction(-1, 4)
    return -through_h - 0.25 * through_m


def jacobi_derivative(spec: AlgebraSpec, v: Direction, n: int) -> Endo:
    """R^(n)_0 as the signed binomial sum of bracket chains of length n + 2."""
    if n < 1:
        raise ValueError("derivative order must be at least 1")
    arr, exact = as_direction(spec, v)
    M = _right_bracket(spec, arr, exact)
    total = None
    for i in range(n + 1):
        weight = (-1) ** i * binomial(n, i)
        term = _chain(M, spec.dim_m, i + 1, n + 2) * weight
        total = term if total is None else total + term
    scale = Fraction((-1) ** (n - 1), 2 ** n)
    return total * scale if exact else total * float(scale)


def _commutator(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return A @ B - B @ A


def derivative_by_commutator(spec: AlgebraSpec, v: Direction, n: int) -> Endo:
    """ad_Lambda^n R_0, the n-th derivative at 0 of the conjugation curve."""
    L = lambda_matrix(spec, v)
    R = jacobi_operator(spec, v)
    for _ in range(n):
        R = _commutator(L, R)
    return R


def derivative_step(spec: AlgebraSpec, v: Direction, M: np.ndarray) -> Endo:
    """M -> Lambda^2 M - 2 Lambda M Lambda + M Lambda^2, i.e. two derivative orders at once."""
    L = lambda_matrix(spec, v)
    return L @ L @ M - (L @ M @ L) * 2 + M @ L @ L


# -- the T_1 components on V1 ----------------------------------------------------------

_PUBLISHED_T1: Dict[Tuple[int, int, int], str] = {
    (2, 6, 4): "-3/2",
    (2, 7, 5): "3/2",
    (3, 6, 5): "-3/2",
    (3, 7, 4): "-3/2",
    (4, 2, 6): "3/2",
    (4, 3, 7): "-3/2",
    (4, 4, 6): "-1/2*sqrt15",
    (4, 5, 7): "-1/2*sqrt15",
    (4, 6, 2): "-3/2",
    (4, 6, 4): "-sqrt15",
    (4, 7, 3): "-3/2",
    (4, 7, 5): "-sqrt15",
    (5, 2, 7): "-3/2",
    (5, 3, 6): "-3/2",
    (5, 4, 7): "-1/2*sqrt15",
    (5, 5, 6): "1/2*sqrt15",
    (5, 6, 3): "-3/2",
    (5, 6, 5): "sqrt15",
    (5, 7, 2): "3/2",
    (5, 7, 4): "-sqrt15",
    (6, 2, 4): "3/2",
    (6, 3, 5): "3/2",
    (6, 4, 4): "-1/2*sqrt15",
    (6, 5, 5): "-1/2*sqrt15",
    (7, 2, 5): "-3/2",
    (7, 3, 4): "3/2",
    (7, 4, 5): "-1/2*sqrt15",
    (7, 5, 4): "-1/2*sqrt15",
}


def published_t1() -> Dict[Tuple[int, int, int], Radical]:
    """The printed non-vanishing components T1(i, j, k) of <(nabla_Qk R)(Q1, Qi)Qj, Q1>."""
    return {key: parse_radical(value) for key, value in _PUBLISHED_T1.items()}


def t1_component(i: int, j: int, k: int, spec: Optional[AlgebraSpec] = None) -> Radical:
    """(1/2)<[[[Q1,Qi]_h,Qj]_m,Qk]_m - [[[Q1,Qi]_m,Qj]_h,Qk]_m, Q1>, indices 1..7."""
    spec = spec or builtin_spec("sp2_su2")
    for index in (i, j, k):
        if not 1 <= index <= spec.dim_m:
            raise SpecError(f"T1 index {index} outside 1..{spec.dim_m}")
    q1 = basis_vector(spec, 1)
    qi, qj, qk = (basis_vector(spec, index) for index in (i, j, k))
    first = bracket(spec, q1, qi)
    via_h = project(spec, bracket(spec, project(spec, bracket(spec, project(spec, first, "h"), qj), "m"), qk), "m")
    via_m = project(spec, bracket(spec, project(spec, bracket(spec, project(spec, first, "m"), qj), "h"), qk), "m")
    return (inner(via_h, q1) - inner(via_m, q1)) * Fraction(1, 2)


def t1_table(spec: Optional[AlgebraSpec] = None) -> Dict[Tuple[int, int, int], Radical]:
    """Every non-vanishing T1 component by direct evaluation."""
    spec = spec or builtin_spec("sp2_su2")
    table = {}
    for i in range(1, spec.dim_m + 1):
        for j in range(1, spec.dim_m + 1):
            for k in range(1, spec.dim_m + 1):
                value = t1_component(i, j, k, spec)
                if value:
                    table[(i, j, k)] = value
    return table


def t1_errata(spec: Optional[AlgebraSpec] = None) -> List[Tuple[Tuple[int, int, int], Radical, Radical]]:
    """(index, printed, direct) wherever the printed list disagrees with direct evaluation."""
    direct = t1_table(spec)
    printed = published_t1()
    errata = []
    for key in sorted(set(direct) | set(printed)):
        shown = printed.get(key, Radical.zero())
        actual = direct.get(key, Radical.zero())
        if shown != actual:
            errata.append((key, shown, actual))
            logger.warning(f"[t1_errata] T1{key}: printed {shown}, direct evaluation {actual}")
    return errata


def r11_polynomial(x: Sequence) -> Union[Radical, float]:
    """-2 sqrt15 (x4^2 x6 - x5^2 x6 + 2 x4 x5 x7) for x = (x1, ..., x7)."""
    x4, x5, x6, x7 = x[3], x[4], x[5], x[6]
    cubic = x4 * x4 * x6 - x5 * x5 * x6 + 2 * x4 * x5 * x7
    if all(isinstance(c, (Radical, Fraction, int)) for c in (x4, x5, x6, x7)):
        return Radical.surd(15, -2) * cubic
    return -2.0 * math.sqrt(15.0) * float(cubic)


# -- R_t -------------------------------------------------------------------------------


def expm_skew(K: np.ndarray) -> np.ndarray:
    """Orthogonal exponential of a real skew matrix (batched over leading axes)."""
    K = np.asarray(K, dtype=float)
    w, U = np.linalg.eigh(1j * K)
    E = ((U * np.exp(-1j * w)[..., None, :]) @ np.swapaxes(U.conj(), -1, -2)).real
    eye = np.eye(K.shape[-1])
    drift = np.max(np.abs(np.swapaxes(E, -1, -2) @ E - eye)) if E.size else 0.0
    if drift > 1e-10:
        logger.debug(f"[expm_skew] eigen route lost orthogonality ({drift:.2e}), using scipy expm")
        if K.ndim == 2:
            return scipy.linalg.expm(K)
        return np.stack([scipy.linalg.expm(k) for k in K.reshape(-1, *K.shape[-2:])]).reshape(K.shape)
    return E


def conjugated_jacobi(spec: AlgebraSpec, v: Direction, t: float) -> np.ndarray:
    """exp(t Lambda) R_0 exp(-t Lambda), the Jacobi operator in the parallel frame."""
    L = to_float(lambda_matrix(spec, v))
    R0 = to_float(jacobi_operator(spec, v))
    E = expm_skew(t * L)
    return E @ R0 @ np.swapaxes(E, -1, -2)


@dataclass(frozen=True)
class ClosedForm:
    """R_t = constant + sine sin(omega t) + cosine cos(omega t)."""

    constant: np.ndarray
    sine: np.ndarray
    cosine: np.ndarray
    omega: float = 1.0

    def evaluate(self, t: float) -> np.ndarray:
        return self.derivative(t, 0)

    def derivative(self, t: float, n: int) -> np.ndarray:
        """R^(n)_t; the n-th derivative of sin is sin(. + n pi/2)."""
        phase = self.omega * t + n * math.pi / 2
        scale = self.omega ** n
        out = to_float(self.sine) * (scale * math.sin(phase)) + to_float(self.cosine) * (scale * math.cos(phase))
        if n == 0:
            out = out + to_float(self.constant)
        return out


def _relation(spec: AlgebraSpec, v: Direction) -> Tuple:
    if spec.osculating is not None:
        return tuple(spec.osculating)
    profile = osculating_rank(spec, v)
    if not profile.determined:
        raise UnsupportedSpaceError(f"{spec.name}: no derivative relation found along this direction")
    return profile.coefficients


def closed_form(spec: AlgebraSpec, v: Direction) -> ClosedForm:
    """R_t = constant + sine sin(wt) + cosine cos(wt) from a relation R''' = -w^2 R'.

    A locally symmetric space (empty relation, R^(1) = 0) gets the constant form R_t = R_0
    instead of UnsupportedSpaceError; the RK4 oracle integrates su2_biinv through it.
    Any other relation raises UnsupportedSpaceError.
    """
    relation = _relation(spec, v)
    R0 = jacobi_operator(spec, v)
    if len(relation) == 0:
        zero = _zeros(R0.shape, is_exact(R0))
        return ClosedForm(constant=R0, sine=zero, cosine=zero)
    if len(relation) != 2 or abs(float(relation[1])) > _RANK_TOL or float(relation[0]) >= 0:
        raise UnsupportedSpaceError(
            f"{spec.name}: closed form needs R''' = -w^2 R', got relation {tuple(str(c) for c in relation)}"
        )
    omega2 = -float(relation[0])
    R1 = jacobi_derivative(spec, v, 1)
    R2 = jacobi_derivative(spec, v, 2)
    if omega2 == 1.0:
        return ClosedForm(constant=R0 + R2, sine=R1, cosine=-R2)
    omega = math.sqrt(omega2)
    R0f, R1f, R2f = to_float(R0), to_float(R1), to_float(R2)
    return ClosedForm(constant=R0f + R2f / omega2, sine=R1f / omega, cosine=-R2f / omega2, omega=omega)


def closed_form_jacobi(spec: AlgebraSpec, v: Direction, t: float) -> np.ndarray:
    return closed_form(spec, v).evaluate(t)


# -- osculating rank and derivative patterns -------------------------------------------


@dataclass(frozen=True)
class OsculatingProfile:
    rank: Optional[int]
    coefficients: Tuple
    residual: float
    locally_symmetric: bool = False
    determined: bool = True
    max_n: int = 6

    def describe(self) -> str:
        if self.locally_symmetric:
            return "locally symmetric along this direction (R^(1) = 0)"
        if not self.determined:
            return f"osculating rank undetermined up to n={self.max_n}"
        shown = ", ".join(str(c) if isinstance(c, Radical) else f"{c:.12g}" for c in self.coefficients)
        return f"osculating rank: {self.rank} (coefficients {shown})"


def _solve_exact(columns: List[List[Radical]], target: List[Radical]) -> Optional[List[Radical]]:
    """Exact solution c of sum_i c_i columns[i] = target, or None if inconsistent."""
    n_rows, n_cols = len(target), len(columns)
    rows = [[columns[c][r] for c in range(n_cols)] + [target[r]] for r in range(n_rows)]
    pivots = []
    row = 0
    for col in range(n_cols):
        pivot = next((r for r in range(row, n_rows) if rows[r][col]), None)
        if pivot is None:
            continue
        rows[row], rows[pivot] = rows[pivot], rows[row]
        inv = rows[row][col].inverse()
        rows[row] = [x * inv for x in rows[row]]
        for r in range(n_rows):
            if r != row and rows[r][col]:
                factor = rows[r][col]
                rows[r] = [a - factor * b for a, b in zip(rows[r], rows[row])]
        pivots.append(col)
        row += 1
        if row == n_rows:
            break
    if any(rows[r][-1] for r in range(row, n_rows)):
        return None
    solution = [Radical.zero()] * n_cols
    for r, col in enumerate(pivots):
        solution[col] = rows[r][-1]
    return solution


def osculating_rank(spec: AlgebraSpec, v: Direction, max_n: int = 6, tol: float = _RANK_TOL) -> OsculatingProfile:
    """Smallest r with R^(r+1) in the span of R^(1)..R^(r)."""
    _, exact = as_direction(spec, v)
    derivatives = []
    L = lambda_matrix(spec, v)
    current = jacobi_operator(spec, v)
    for _ in range(max_n + 1):
        current = _commutator(L, current)
        derivatives.append(current)

    first = derivatives[0]
    vanishes = not any(first.flat) if exact else np.max(np.abs(first)) <= tol
    if vanishes:
        return OsculatingProfile(rank=0, coefficients=(), residual=0.0, locally_symmetric=True, max_n=max_n)

    for r in range(1, max_n + 1):
        basis = derivatives[:r]
        target = derivatives[r]
        if exact:
            solution = _solve_exact([list(b.flat) for b in basis], list(target.flat))
            if solution is not None:
                return OsculatingProfile(rank=r, coefficients=tuple(solution), residual=0.0, max_n=max_n)
            continue
        A = np.stack([b.ravel() for b in basis], axis=1)
        b = target.ravel()
        coeffs, *_ = np.linalg.lstsq(A, b, rcond=None)
        residual = float(np.linalg.norm(A @ coeffs - b) / max(1.0, np.linalg.norm(b)))
        if residual <= tol:
            return OsculatingProfile(rank=r, coefficients=tuple(float(c) for c in coeffs), residual=residual, max_n=max_n)

    logger.info(f"[osculating_rank] {spec.name}: no dependency among R^(1)..R^({max_n + 1})")
    return OsculatingProfile(rank=None, coefficients=(), residual=float("nan"), determined=False, max_n=max_n)


def derivative_sequence(spec: AlgebraSpec, v: Direction, count: int) -> List[np.ndarray]:
    """[R^(0), ..., R^(count-1)]: direct up to the relation length, then the linear relation."""
    relation = _relation(spec, v)
    r = len(relation)
    sequence = [jacobi_operator(spec, v)]
    for n in range(1, min(count, r + 1)):
        sequence.append(jacobi_derivative(spec, v, n))
    if r == 0:
        zero = _zeros(sequence[0].shape, is_exact(sequence[0]))
        return (sequence + [zero] * count)[:count]
    exact = is_exact(sequence[0]) and all(isinstance(c, (Fraction, int, Radical)) for c in relation)
    if not exact:
        sequence = [to_float(s) for s in sequence]
    weights = [Radical.coerce(c) for c in relation] if exact else [float(c) for c in relation]
    while len(sequence) < count:
        n = len(sequence)
        total = None
        for i, c in enumerate(weights, start=1):
            term = sequence[n - r - 1 + i] * c
            total = term if total is None else total + term
        sequence.append(total)
    return sequence[:count]


def derivative_pattern(spec: AlgebraSpec, v: Direction, n: int) -> Endo:
    """R^(n)_0 predicted from R^(1)_0 .. R^(r)_0 and the space's derivative relation."""
    if n < 1:
        raise ValueError("derivative order must be at least 1")
    if spec.osculating is None:
        raise UnsupportedSpaceError(f"{spec.name} carries no known derivative relation")
    return derivative_sequence(spec, v, n + 1)[n]


def derivative_sequence_batch(spec: AlgebraSpec, V: np.ndarray, count: int) -> np.ndarray:
    """Float R^(0..count-1) for a (B, dim_m) batch of unit directions, shape (count, B, d, d)."""
    V = np.atleast_2d(np.asarray(V, dtype=float))
    if spec.osculating is None:
        return np.stack([np.stack([to_float(R) for R in derivative_sequence(spec, v, count)]) for v in V], axis=1)
    relation = [float(c) for c in spec.osculating]
    r = len(relation)
    out = np.zeros((count, V.shape[0], spec.dim_m, spec.dim_m))
    out[0] = jacobi_operator(spec, V)
    for n in range(1, min(count, r + 1)):
        out[n] = jacobi_derivative(spec, V, n)
    if r == 0:
        return out
    for n in range(r + 1, count):
        out[n] = sum(c * out[n - r - 1 + i] for i, c in enumerate(relation, start=1))
    return out


# -- diagnostics -----------------------------------------------------------------------


def commutator_defects(spec: AlgebraSpec, v: Direction, t: float) -> Dict[str, float]:
    """Frobenius norms of the pairwise commutators of R_t, R^(1)_t and R^(2)_t."""
    form = closed_form(spec, v)
    R, R1, R2 = (form.derivative(t, n) for n in range(3))
    return {
        "R,R1": float(np.linalg.norm(_commutator(R, R1))),
        "R,R2": float(np.linalg.norm(_commutator(R, R2))),
        "R1,R2": float(np.linalg.norm(_commutator(R1, R2))),
    }


def eigenframe_drift(spec: AlgebraSpec, v: Direction, t: float) -> float:
    """max |[R_0, R_t]|; nonzero means the eigenvectors of R_t are not parallel."""
    R0 = to_float(jacobi_operator(spec, v))
    return float(np.max(np.abs(_commutator(R0, closed_form_jacobi(spec, v, t)))))


def endo_to_csv(E: np.ndarray) -> str:
    """Row-major CSV; exact entries as radical strings, floats as %.17g."""
    rows = []
    for row in E:
        rows.append(",".join(str(x) if isinstance(x, Radical) else "%.17g" % x for x in row))
    return "\n".join(rows) + "\n"
