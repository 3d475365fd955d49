"""Bi-equivariant score model built from synthetic descriptor fields.

A synthetic field places spherical-harmonic lobes on every cloud point
within a cutoff, with radial Gaussian profiles, optional color scalars,
and Gaussian gates over log-time mixed by a per-slot weight tensor.  The
construction is translation-invariant and exactly SO(3)-steerable, so it
satisfies the same equivariance contract as a learned descriptor field.

The assembled score follows the weighted-query-point summation: the
linear part averages the per-query score field, and the angular part is
the spin term plus the orbital lever-arm term, with the 1/(L sqrt(t))
and 1/sqrt(t) non-dimensionalization factors.  Inputs (poses, clouds,
queries, cutoffs) are in scene units; the returned twist is the score of
the non-dimensionalized diffusion process.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .irreps import IrrepsLayout, IrrepsVector, cg_paths, cg_tensor, rep_apply_batch, sh_batch
from .lie import Pose, Twist, apply
from .pointcloud import PointCloud

__all__ = [
    "SyntheticEdfParams",
    "QuerySet",
    "ScoreModelParams",
    "fps_select",
    "synthetic_edf",
    "score_field",
    "assemble_score",
    "assemble_score_parts",
    "query_weights",
    "build_query_set",
    "score_design_matrix",
    "fit_path_weights",
    "random_edf_params",
    "random_model_params",
]

N_COLOR_CHANNELS = 4  # constant term plus r, g, b


@dataclass(frozen=True, eq=False)
class SyntheticEdfParams:
    """Deterministic descriptor-field parameters.

    channel_weights has shape (n_slots, n_radial, N_COLOR_CHANNELS,
    n_gates) and linearly mixes radial bases, color channels, and time
    gates into each irrep slot.
    """

    layout: IrrepsLayout
    cutoff: float
    radial_widths: tuple[float, ...]
    channel_weights: np.ndarray
    time_gate_centers: tuple[float, ...] = (0.0,)

    def __post_init__(self) -> None:
        if self.cutoff <= 0.0:
            raise ValueError("cutoff must be positive")
        widths = tuple(float(w) for w in self.radial_widths)
        if not widths or any(w <= 0.0 for w in widths):
            raise ValueError("radial widths must be positive")
        centers = tuple(float(c) for c in self.time_gate_centers)
        n_slots = len(self.layout.slots())
        cw = np.asarray(self.channel_weights, dtype=np.float64).reshape(
            n_slots, len(widths), N_COLOR_CHANNELS, len(centers)).copy()
        cw.setflags(write=False)
        object.__setattr__(self, "radial_widths", widths)
        object.__setattr__(self, "time_gate_centers", centers)
        object.__setattr__(self, "channel_weights", cw)

    def gate_values(self, t: float | None) -> np.ndarray:
        """Gaussian bumps over log t; all ones when t is None (no gating)."""
        centers = np.asarray(self.time_gate_centers)
        if t is None:
            return np.ones(centers.size)
        width = centers[1] - centers[0] if centers.size > 1 else 1.0
        return np.exp(-((math.log(t) - centers) ** 2) / (2.0 * width**2))


@dataclass(frozen=True, eq=False)
class QuerySet:
    """Query points in the end-effector frame with nonnegative weights."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3).copy()
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1).copy()
        if w.size != pts.shape[0]:
            raise ValueError("weights must match the number of query points")
        if np.any(w < 0.0):
            raise ValueError("query weights must be nonnegative")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return self.points.shape[0]


def fps_select(pc: PointCloud, n: int, start_index: int = 0) -> np.ndarray:
    """Greedy farthest-point sampling, returning the visited points.

    Deterministic: fixed start index, max-min distance ties broken by the
    lowest point index (first argmax).
    """
    if n > len(pc):
        raise ValueError(f"cannot select {n} points from a cloud of {len(pc)}")
    if n <= 0:
        raise ValueError("need at least one point")
    pts = pc.positions
    chosen = [start_index]
    d2 = np.sum((pts - pts[start_index]) ** 2, axis=1)
    while len(chosen) < n:
        idx = int(np.argmax(d2))
        chosen.append(idx)
        d2 = np.minimum(d2, np.sum((pts - pts[idx]) ** 2, axis=1))
    return pts[chosen].copy()


def _color_features(pc: PointCloud) -> np.ndarray:
    feats = np.zeros((len(pc), N_COLOR_CHANNELS))
    feats[:, 0] = 1.0
    if pc.colors is not None:
        feats[:, 1:] = pc.colors
    return feats


def _edf_batch(xs: np.ndarray, pc: PointCloud, params: SyntheticEdfParams,
               t: float | None) -> np.ndarray:
    """Field coefficients (M, layout.dim) at query positions xs."""
    xs = np.asarray(xs, dtype=np.float64).reshape(-1, 3)
    out = np.zeros((xs.shape[0], params.layout.dim))
    if len(pc) == 0:
        return out
    gates = params.gate_values(t)
    colors = _color_features(pc)
    widths = np.asarray(params.radial_widths)
    slot_offsets = params.layout.slot_offsets()
    for m, x in enumerate(xs):
        d = pc.positions - x
        dist = np.linalg.norm(d, axis=1)
        keep = (dist <= params.cutoff) & (dist > 0.0)  # the p = x singular term is skipped
        if not np.any(keep):
            continue
        dist_k = dist[keep]
        dirs = -d[keep] / dist_k[:, None]  # unit vectors from point toward x
        radial = np.exp(-dist_k[:, None] ** 2 / (2.0 * widths[None, :] ** 2))  # (K, B)
        chan = np.einsum("kb,kc,g->kbcg", radial, colors[keep], gates)
        per_l: dict[int, np.ndarray] = {}
        for slot, (l, off) in enumerate(slot_offsets):
            if l not in per_l:
                per_l[l] = sh_batch(l, dirs)  # (K, 2l+1)
            scal = np.einsum("kbcg,bcg->k", chan, params.channel_weights[slot])
            out[m, off:off + 2 * l + 1] = scal @ per_l[l]
    return out


def synthetic_edf(x: np.ndarray, pc: PointCloud, params: SyntheticEdfParams,
                  t: float | None = None) -> IrrepsVector:
    """Descriptor field value at x generated by the cloud.

    Translation-invariant and exactly steerable:
    field(g x | g . O) = D(R_g) field(x | O).
    """
    coeffs = _edf_batch(np.asarray(x, dtype=np.float64).reshape(1, 3), pc, params, t)[0]
    return IrrepsVector(params.layout, coeffs)


def _contract_batch(layout_a: IrrepsLayout, a: np.ndarray,
                    layout_b: IrrepsLayout, b: np.ndarray,
                    weights: np.ndarray) -> np.ndarray:
    """Batched weighted CG contraction to type 1: (M, dim_a) x (M, dim_b) -> (M, 3)."""
    paths = cg_paths(layout_a, layout_b)
    weights = np.asarray(weights, dtype=np.float64).reshape(-1)
    if weights.size != len(paths):
        raise ValueError(f"expected {len(paths)} path weights, got {weights.size}")
    offs_a = layout_a.slot_offsets()
    offs_b = layout_b.slot_offsets()
    out = np.zeros((a.shape[0], 3))
    for weight, (i, j) in zip(weights, paths):
        if weight == 0.0:
            continue
        la, oa = offs_a[i]
        lb, ob = offs_b[j]
        c = cg_tensor(la, lb)
        out += weight * np.einsum("aij,mi,mj->ma", c, a[:, oa:oa + 2 * la + 1],
                                  b[:, ob:ob + 2 * lb + 1])
    return out


def score_field(g: Pose, x: np.ndarray, scene: PointCloud, grasp: PointCloud,
                t: float, params_scene: SyntheticEdfParams,
                params_grasp: SyntheticEdfParams, path_weights: np.ndarray) -> np.ndarray:
    """Dimensionless score-field vector at query x (end-effector frame).

    Contracts the grasp descriptor (no time conditioning) against the
    back-rotated scene descriptor at g x:
    psi(x | O_e) x->1 D(R^-1) phi_t(g x | O_s).
    """
    psi = _edf_batch(np.reshape(x, (1, 3)), grasp, params_grasp, None)
    phi = _edf_batch(apply(g, np.reshape(x, (1, 3))), scene, params_scene, t)
    phi_body = rep_apply_batch(params_scene.layout, g.r.inverse(), phi)
    return _contract_batch(params_grasp.layout, psi,
                           params_scene.layout, phi_body,
                           path_weights)[0]


@dataclass(frozen=True, eq=False)
class ScoreModelParams:
    """Everything the assembled score model needs besides the clouds.

    The scene and grasp descriptor fields are shared between the linear
    and angular branches (separate path weights), matching the reference
    design; pass scene_omega/grasp_omega to un-share them.
    """

    scene: SyntheticEdfParams
    grasp: SyntheticEdfParams
    weights_nu: np.ndarray
    weights_omega: np.ndarray
    weight_field: SyntheticEdfParams | None = None
    scene_omega: SyntheticEdfParams | None = None
    grasp_omega: SyntheticEdfParams | None = None
    query_count: int = 8
    query_start_index: int = 0

    def scene_for(self, branch: str) -> SyntheticEdfParams:
        if branch == "omega" and self.scene_omega is not None:
            return self.scene_omega
        return self.scene

    def grasp_for(self, branch: str) -> SyntheticEdfParams:
        if branch == "omega" and self.grasp_omega is not None:
            return self.grasp_omega
        return self.grasp


def query_weights(points: np.ndarray, grasp: PointCloud,
                  weight_field: SyntheticEdfParams | None) -> np.ndarray:
    """Invariant query weights from a scalar (single l=0) descriptor field.

    Squared so the weights are nonnegative; uniform when no weight field
    is configured.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if weight_field is None:
        return np.full(points.shape[0], 1.0 / max(points.shape[0], 1))
    if weight_field.layout.slots() != [0]:
        raise ValueError("query weight field must have a single scalar output")
    vals = _edf_batch(points, grasp, weight_field, None)[:, 0]
    return vals**2


def build_query_set(grasp: PointCloud, model: ScoreModelParams) -> QuerySet:
    pts = fps_select(grasp, model.query_count, model.query_start_index)
    w = query_weights(pts, grasp, model.weight_field)
    total = w.sum()
    if total > 0.0:  # normalizing by an invariant sum preserves invariance
        w = w / total
    else:
        w = np.full(w.size, 1.0 / max(w.size, 1))
    return QuerySet(pts, w)


def _field_batch(g: Pose, qs: np.ndarray, scene: PointCloud, grasp: PointCloud,
                 t: float, model: ScoreModelParams, branch: str,
                 weights: np.ndarray) -> np.ndarray:
    p_scene = model.scene_for(branch)
    p_grasp = model.grasp_for(branch)
    psi = _edf_batch(qs, grasp, p_grasp, None)
    phi = _edf_batch(apply(g, qs), scene, p_scene, t)
    phi_body = rep_apply_batch(p_scene.layout, g.r.inverse(), phi)
    return _contract_batch(p_grasp.layout, psi, p_scene.layout, phi_body, weights)


def assemble_score_parts(g: Pose, scene: PointCloud, grasp: PointCloud, t: float,
                         length_unit: float, query: QuerySet,
                         model: ScoreModelParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(s_nu, spin, orbital) pieces of the assembled score.

    s_nu = 1/(L sqrt(t)) sum_q w(q) field_nu(g, q)
    spin = 1/sqrt(t)     sum_q w(q) field_omega(g, q)
    orbital = 1/sqrt(t)  sum_q w(q) (q / L) x field_nu(g, q)
    """
    if t <= 0.0:
        raise ValueError("t must be positive")
    if len(query) == 0:
        warnings.warn("empty query set; returning zero score", RuntimeWarning, stacklevel=2)
        return np.zeros(3), np.zeros(3), np.zeros(3)
    qs, w = query.points, query.weights
    f_nu = _field_batch(g, qs, scene, grasp, t, model, "nu", model.weights_nu)
    f_om = _field_batch(g, qs, scene, grasp, t, model, "omega", model.weights_omega)
    inv_sqrt_t = 1.0 / math.sqrt(t)
    s_nu = (inv_sqrt_t / length_unit) * np.sum(w[:, None] * f_nu, axis=0)
    spin = inv_sqrt_t * np.sum(w[:, None] * f_om, axis=0)
    orbital = inv_sqrt_t * np.sum(w[:, None] * np.cross(qs / length_unit, f_nu), axis=0)
    return s_nu, spin, orbital


def assemble_score(g: Pose, scene: PointCloud, grasp: PointCloud, t: float,
                   length_unit: float, query: QuerySet,
                   model: ScoreModelParams) -> Twist:
    """Full bi-equivariant model score: linear part plus spin + orbital."""
    s_nu, spin, orbital = assemble_score_parts(g, scene, grasp, t, length_unit, query, model)
    return Twist(s_nu, spin + orbital)


def _per_path_fields(g: Pose, qs: np.ndarray, scene: PointCloud, grasp: PointCloud,
                     t: float, model: ScoreModelParams, branch: str) -> np.ndarray:
    """(n_paths, n_queries, 3) per-path score-field contributions."""
    p_scene = model.scene_for(branch)
    p_grasp = model.grasp_for(branch)
    psi = _edf_batch(qs, grasp, p_grasp, None)
    phi = _edf_batch(apply(g, qs), scene, p_scene, t)
    phi_body = rep_apply_batch(p_scene.layout, g.r.inverse(), phi)
    paths = cg_paths(p_grasp.layout, p_scene.layout)
    offs_a = p_grasp.layout.slot_offsets()
    offs_b = p_scene.layout.slot_offsets()
    out = np.zeros((len(paths), qs.shape[0], 3))
    for k, (i, j) in enumerate(paths):
        la, oa = offs_a[i]
        lb, ob = offs_b[j]
        c = cg_tensor(la, lb)
        out[k] = np.einsum("aij,mi,mj->ma", c, psi[:, oa:oa + 2 * la + 1],
                           phi_body[:, ob:ob + 2 * lb + 1])
    return out


def score_design_matrix(g: Pose, scene: PointCloud, grasp: PointCloud, t: float,
                        length_unit: float, query: QuerySet,
                        model: ScoreModelParams) -> np.ndarray:
    """Jacobian of the assembled score in the stacked path weights.

    The assembled score is linear in (weights_nu, weights_omega); this
    returns the (6, n_nu + n_omega) matrix so gradient-free fitting
    against oracle scores reduces to linear least squares.
    """
    qs, w = query.points, query.weights
    f_nu = _per_path_fields(g, qs, scene, grasp, t, model, "nu")
    f_om = _per_path_fields(g, qs, scene, grasp, t, model, "omega")
    inv_sqrt_t = 1.0 / math.sqrt(t)
    n_nu, n_om = f_nu.shape[0], f_om.shape[0]
    out = np.zeros((6, n_nu + n_om))
    lin = inv_sqrt_t / length_unit * np.einsum("q,kqa->ka", w, f_nu)
    out[:3, :n_nu] = lin.T
    orbital = inv_sqrt_t * np.einsum("q,kqa->ka", w,
                                     np.cross(qs[None, :, :] / length_unit, f_nu))
    out[3:, :n_nu] = orbital.T
    spin = inv_sqrt_t * np.einsum("q,kqa->ka", w, f_om)
    out[3:, n_nu:] = spin.T
    return out


def fit_path_weights(poses_times: list[tuple[Pose, float]], targets: np.ndarray,
                     scene: PointCloud, grasp: PointCloud, length_unit: float,
                     query: QuerySet, model: ScoreModelParams,
                     ridge: float = 1e-10) -> ScoreModelParams:
    """Least-squares fit of the path weights to target score twists.

    Because the model is linear in its path weights, fitting against a
    batch of (pose, time) -> twist targets (e.g. the exact mixture
    oracle) needs no gradients.  Returns a copy of ``model`` with the
    fitted weights.
    """
    targets = np.asarray(targets, dtype=np.float64).reshape(len(poses_times), 6)
    rows = [score_design_matrix(g, scene, grasp, t, length_unit, query, model)
            for g, t in poses_times]
    a = np.concatenate(rows, axis=0)
    b = targets.reshape(-1)
    ata = a.T @ a + ridge * np.eye(a.shape[1])
    sol = np.linalg.solve(ata, a.T @ b)
    n_nu = model.weights_nu.size
    return ScoreModelParams(
        scene=model.scene, grasp=model.grasp,
        weights_nu=sol[:n_nu], weights_omega=sol[n_nu:],
        weight_field=model.weight_field,
        scene_omega=model.scene_omega, grasp_omega=model.grasp_omega,
        query_count=model.query_count, query_start_index=model.query_start_index)


# ---------------------------------------------------------------------------
# Deterministic random parameter factories (tests, toy scenarios)
# ---------------------------------------------------------------------------

def random_edf_params(layout: IrrepsLayout, rng: np.random.Generator, cutoff: float,
                      radial_widths: tuple[float, ...] = (0.25, 0.6),
                      time_gate_centers: tuple[float, ...] = (-3.0, 0.0),
                      scale: float = 0.1) -> SyntheticEdfParams:
    n_slots = len(layout.slots())
    cw = scale * rng.standard_normal((n_slots, len(radial_widths), N_COLOR_CHANNELS,
                                      len(time_gate_centers)))
    return SyntheticEdfParams(layout, cutoff, radial_widths, cw, time_gate_centers)


def random_model_params(rng: np.random.Generator, cutoff: float,
                        layout: IrrepsLayout | None = None,
                        query_count: int = 8) -> ScoreModelParams:
    layout = layout or IrrepsLayout(((0, 2), (1, 2), (2, 1)))
    scene = random_edf_params(layout, rng, cutoff)
    grasp = random_edf_params(layout, rng, cutoff)
    wf = random_edf_params(IrrepsLayout(((0, 1),)), rng, cutoff)
    n_paths = len(cg_paths(layout, layout))
    return ScoreModelParams(
        scene=scene,
        grasp=grasp,
        weights_nu=rng.standard_normal(n_paths),
        weights_omega=rng.standard_normal(n_paths),
        weight_field=wf,
        query_count=query_count,
    )
