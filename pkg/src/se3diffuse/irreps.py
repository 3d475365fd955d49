"""Real irreducible representations of SO(3).

Basis convention
----------------
Each type-l space is spanned by the real solid harmonics of degree l in
Racah normalization, which makes ``sum_m Y_lm(u)^2 = 1`` on the unit
sphere.  Components are ordered ``[c0, c1, s1, ..., cl, sl]`` (cosine /
sine sectors), except l = 1 which is permuted to plain ``(x, y, z)`` so
that the degree-1 Wigner matrix is the rotation matrix itself.

Wigner-D matrices are built as ``expm(theta * (n . G))`` from real
angular-momentum generators ``G`` obtained by applying the operator
``(e_i x r) . grad`` to the basis polynomials; steerability
``Y_l(R u) = D_l(R) Y_l(u)`` then holds by construction.

Clebsch-Gordan contraction to type 1 uses coefficient tensors solved
numerically from the equivariance linear system over random rotations
(unit Frobenius norm, deterministic sign); each tensor is verified
against the equivariance identity before being cached.  In this
normalization the 0 x 1 -> 1 path contracts a scalar a and a vector u to
``a * u / sqrt(3)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

from .lie import Rotation, quat_log

__all__ = [
    "L_MAX_IRREPS",
    "IrrepsLayout",
    "IrrepsVector",
    "wigner_d",
    "rep_apply",
    "rep_apply_batch",
    "spherical_harmonics",
    "sh_batch",
    "cg_contract_to1",
    "cg_tensor",
    "cg_paths",
    "generators",
]

L_MAX_IRREPS = 6


# ---------------------------------------------------------------------------
# Real solid harmonic polynomials in monomial form
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _monomials(l: int) -> tuple[tuple[int, int, int], ...]:
    """Exponent triples (a, b, c) with a + b + c = l, lexicographic."""
    out = []
    for a in range(l, -1, -1):
        for b in range(l - a, -1, -1):
            out.append((a, b, l - a - b))
    return tuple(out)


def _poly_add(poly: dict, mono: tuple[int, int, int], coeff: float) -> None:
    if coeff != 0.0:
        poly[mono] = poly.get(mono, 0.0) + coeff


def _r2k_expansions(k: int) -> list[tuple[tuple[int, int, int], float]]:
    """Monomial expansion of (x^2+y^2+z^2)^k."""
    out = []
    for i in range(k + 1):
        for j in range(k - i + 1):
            h = k - i - j
            c = math.factorial(k) / (math.factorial(i) * math.factorial(j) * math.factorial(h))
            out.append(((2 * i, 2 * j, 2 * h), float(c)))
    return out


def _sector_poly(l: int, m: int, sine: bool) -> dict:
    """A_m (cosine) or B_m (sine) sector polynomial in x, y."""
    cs = [1.0, 0.0, -1.0, 0.0]  # cos(j pi / 2)
    sn = [0.0, 1.0, 0.0, -1.0]  # sin(j pi / 2)
    poly: dict = {}
    for p in range(m + 1):
        trig = sn[(m - p) % 4] if sine else cs[(m - p) % 4]
        if trig != 0.0:
            _poly_add(poly, (p, m - p, 0), math.comb(m, p) * trig)
    return poly


def _solid_harmonic(l: int, m: int, sine: bool) -> dict:
    """Racah-normalized real solid harmonic as a monomial dict."""
    norm = math.sqrt((1.0 if (m == 0 and not sine) else 2.0)
                     * math.factorial(l - m) / math.factorial(l + m))
    sector = _sector_poly(l, m, sine)
    poly: dict = {}
    for k in range((l - m) // 2 + 1):
        gamma = ((-1.0) ** k / 2.0 ** l * math.comb(l, k) * math.comb(2 * l - 2 * k, l)
                 * math.factorial(l - 2 * k) / math.factorial(l - 2 * k - m))
        if gamma == 0.0:
            continue
        zpow = l - 2 * k - m
        for (ri, rj, rh), rc in _r2k_expansions(k):
            for (sa, sb, _), sc in sector.items():
                _poly_add(poly, (ri + sa, rj + sb, rh + zpow), norm * gamma * rc * sc)
    return poly


@lru_cache(maxsize=None)
def _basis_coeffs(l: int) -> np.ndarray:
    """(2l+1, n_monomials) coefficient matrix of the basis polynomials."""
    if l > L_MAX_IRREPS:
        raise ValueError(f"l={l} exceeds L_MAX_IRREPS={L_MAX_IRREPS}")
    monos = _monomials(l)
    index = {m: i for i, m in enumerate(monos)}
    polys = [_solid_harmonic(l, 0, False)]
    for m in range(1, l + 1):
        polys.append(_solid_harmonic(l, m, False))
        polys.append(_solid_harmonic(l, m, True))
    if l == 1:
        polys = [polys[1], polys[2], polys[0]]  # (x, y, z) ordering
    out = np.zeros((2 * l + 1, len(monos)))
    for row, poly in enumerate(polys):
        for mono, c in poly.items():
            out[row, index[mono]] = c
    return out


def _angular_momentum_matrix(l: int, axis: int) -> np.ndarray:
    """Matrix of (e_axis x r) . grad on degree-l monomials."""
    monos = _monomials(l)
    index = {m: i for i, m in enumerate(monos)}
    n = len(monos)
    out = np.zeros((n, n))
    # L_x = -z d/dy + y d/dz ; L_y = z d/dx - x d/dz ; L_z = -y d/dx + x d/dy
    terms = {
        0: [((0, -1, 1), -1.0, 1), ((0, 1, -1), 1.0, 2)],
        1: [((-1, 0, 1), 1.0, 0), ((1, 0, -1), -1.0, 2)],
        2: [((-1, 1, 0), -1.0, 0), ((1, -1, 0), 1.0, 1)],
    }[axis]
    for col, (a, b, c) in enumerate(monos):
        exps = (a, b, c)
        for delta, sign, daxis in terms:
            if exps[daxis] == 0:
                continue
            tgt = (a + delta[0], b + delta[1], c + delta[2])
            out[index[tgt], col] += sign * exps[daxis]
    return out


@lru_cache(maxsize=None)
def generators(l: int) -> np.ndarray:
    """Real so(3) generators (3, 2l+1, 2l+1) for the type-l representation."""
    basis = _basis_coeffs(l)  # (d, n_mono)
    pinv = np.linalg.pinv(basis.T)  # solves basis.T @ g = target
    gens = np.empty((3, 2 * l + 1, 2 * l + 1))
    for axis in range(3):
        lmat = _angular_momentum_matrix(l, axis)
        # row mu of G = coefficients of L Y_mu in the basis
        gens[axis] = (pinv @ (lmat @ basis.T)).T
    gens.setflags(write=False)
    return gens


def wigner_d(l: int, r: Rotation) -> np.ndarray:
    """Real Wigner-D matrix of degree l, orthogonal, with D_1(R) = R."""
    if l > L_MAX_IRREPS:
        raise ValueError(f"l={l} exceeds L_MAX_IRREPS={L_MAX_IRREPS}")
    if l == 0:
        return np.array([[1.0]])
    rotvec = quat_log(r.q)
    g = generators(l)
    return expm(rotvec[0] * g[0] + rotvec[1] * g[1] + rotvec[2] * g[2])


# ---------------------------------------------------------------------------
# Layouts and vectors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IrrepsLayout:
    """Ordered (l, multiplicity) blocks; total dim = sum mult * (2l+1)."""

    blocks: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        blocks = tuple((int(l), int(m)) for l, m in self.blocks)
        for l, m in blocks:
            if l < 0 or m <= 0:
                raise ValueError("need l >= 0 and multiplicity >= 1")
            if l > L_MAX_IRREPS:
                raise ValueError(f"l={l} exceeds L_MAX_IRREPS={L_MAX_IRREPS}")
        object.__setattr__(self, "blocks", blocks)

    @property
    def dim(self) -> int:
        return sum(m * (2 * l + 1) for l, m in self.blocks)

    def slots(self) -> list[int]:
        """Type of every multiplicity slot, in storage order."""
        out = []
        for l, m in self.blocks:
            out.extend([l] * m)
        return out

    def slot_offsets(self) -> list[tuple[int, int]]:
        """(l, coefficient offset) per multiplicity slot."""
        out = []
        off = 0
        for l, m in self.blocks:
            for _ in range(m):
                out.append((l, off))
                off += 2 * l + 1
        return out


@dataclass(frozen=True, eq=False)
class IrrepsVector:
    layout: IrrepsLayout
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.coeffs, dtype=np.float64).reshape(-1).copy()
        if c.size != self.layout.dim:
            raise ValueError(f"coefficient length {c.size} != layout dim {self.layout.dim}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @staticmethod
    def zero(layout: IrrepsLayout) -> "IrrepsVector":
        return IrrepsVector(layout, np.zeros(layout.dim))


def rep_apply(layout: IrrepsLayout, r: Rotation, v: IrrepsVector) -> IrrepsVector:
    """Block-diagonal action of the rotation on every irrep slot."""
    if v.layout != layout:
        raise ValueError("vector layout does not match")
    return IrrepsVector(layout, rep_apply_batch(layout, r, v.coeffs[None, :])[0])


def rep_apply_batch(layout: IrrepsLayout, r: Rotation, coeffs: np.ndarray) -> np.ndarray:
    """Rotation action on (M, dim) coefficient rows; one Wigner-D per block."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.shape[-1] != layout.dim:
        raise ValueError("coefficient rows do not match the layout dimension")
    out = np.empty_like(coeffs)
    off = 0
    for l, mult in layout.blocks:
        d = 2 * l + 1
        dm = wigner_d(l, r)
        block = coeffs[:, off:off + mult * d].reshape(coeffs.shape[0], mult, d)
        out[:, off:off + mult * d] = (block @ dm.T).reshape(coeffs.shape[0], mult * d)
        off += mult * d
    return out


def spherical_harmonics(l: int, u: np.ndarray) -> np.ndarray:
    """Real spherical harmonics with unit Euclidean norm per l.

    ``u`` must be a unit vector (within 1e-9).  Consistent with wigner_d:
    Y_l(R u) = D_l(R) Y_l(u), and Y_1(u) = u.
    """
    u = np.asarray(u, dtype=np.float64).reshape(3)
    if abs(float(np.linalg.norm(u)) - 1.0) > 1e-9:
        raise ValueError("direction must be a unit vector")
    return _sh_matrix(l) @ _mono_values(l, u)


def _sh_matrix(l: int) -> np.ndarray:
    return _basis_coeffs(l)


def _mono_values(l: int, u: np.ndarray) -> np.ndarray:
    monos = _monomials(l)
    return np.array([u[0] ** a * u[1] ** b * u[2] ** c for a, b, c in monos])


def sh_batch(l: int, u: np.ndarray) -> np.ndarray:
    """Vectorized spherical harmonics for (N, 3) unit directions."""
    u = np.asarray(u, dtype=np.float64)
    monos = _monomials(l)
    cols = np.stack([u[:, 0] ** a * u[:, 1] ** b * u[:, 2] ** c for a, b, c in monos], axis=1)
    return cols @ _basis_coeffs(l).T


# ---------------------------------------------------------------------------
# Clebsch-Gordan contraction to type 1
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def cg_tensor(l1: int, l2: int) -> np.ndarray:
    """Real CG tensor C with shape (3, 2l1+1, 2l2+1) for l1 x l2 -> 1.

    Solved as the one-dimensional common null space of the equivariance
    constraints over a fixed set of random rotations, normalized to unit
    Frobenius norm with a deterministic sign.
    """
    if not (abs(l1 - l2) <= 1 <= l1 + l2):
        raise ValueError(f"no type-1 path for l1={l1}, l2={l2}")
    d1, d2 = 2 * l1 + 1, 2 * l2 + 1
    dim = 3 * d1 * d2
    rng = np.random.default_rng(20240331)
    rows = []
    for _ in range(3):
        r = _rand_quat(rng)
        da = wigner_d(1, r)
        db = wigner_d(l1, r)
        dc = wigner_d(l2, r)
        m = np.kron(np.eye(3), np.kron(db.T, dc.T)) - np.kron(da, np.eye(d1 * d2))
        rows.append(m)
    system = np.vstack(rows)
    _, svals, vt = np.linalg.svd(system)
    null_dim = int(np.sum(svals < 1e-10))
    if null_dim != 1:
        raise RuntimeError(f"CG null space dimension {null_dim} != 1 for ({l1},{l2})")
    c = vt[-1].reshape(3, d1, d2)
    c /= np.linalg.norm(c)
    flat = c.reshape(-1)
    lead = flat[np.argmax(np.abs(flat))]
    if lead < 0:
        c = -c
    _verify_cg(c, l1, l2, rng)
    c.setflags(write=False)
    return c


def _rand_quat(rng: np.random.Generator) -> Rotation:
    q = rng.standard_normal(4)
    return Rotation(q / np.linalg.norm(q))


def _verify_cg(c: np.ndarray, l1: int, l2: int, rng: np.random.Generator) -> None:
    for _ in range(4):
        r = _rand_quat(rng)
        da, db, dc = wigner_d(1, r), wigner_d(l1, r), wigner_d(l2, r)
        lhs = np.einsum("aij,ik,jl->akl", c, db, dc)
        rhs = np.einsum("ab,bij->aij", da, c)
        if not np.allclose(lhs, rhs, atol=1e-10):
            raise RuntimeError(f"CG tensor ({l1},{l2}) failed equivariance verification")


def cg_paths(layout_a: IrrepsLayout, layout_b: IrrepsLayout) -> list[tuple[int, int]]:
    """Slot-index pairs (i, j) admitting a type-1 path, in deterministic order."""
    sa, sb = layout_a.slots(), layout_b.slots()
    return [(i, j) for i in range(len(sa)) for j in range(len(sb))
            if abs(sa[i] - sb[j]) <= 1 <= sa[i] + sb[j]]


def cg_contract_to1(v: IrrepsVector, w: IrrepsVector, path_weights: np.ndarray) -> np.ndarray:
    """Weighted sum of all type-1 CG contractions between the slot pairs.

    Equivariant: cg(D v, D w) = R cg(v, w).  One weight per path in the
    order produced by :func:`cg_paths`.
    """
    paths = cg_paths(v.layout, w.layout)
    weights = np.asarray(path_weights, dtype=np.float64).reshape(-1)
    if weights.size != len(paths):
        raise ValueError(f"expected {len(paths)} path weights, got {weights.size}")
    offs_a = v.layout.slot_offsets()
    offs_b = w.layout.slot_offsets()
    out = np.zeros(3)
    for weight, (i, j) in zip(weights, paths):
        if weight == 0.0:
            continue
        la, oa = offs_a[i]
        lb, ob = offs_b[j]
        c = cg_tensor(la, lb)
        va = v.coeffs[oa:oa + 2 * la + 1]
        wb = w.coeffs[ob:ob + 2 * lb + 1]
        out += weight * np.einsum("aij,i,j->a", c, va, wb)
    return out
