"""Brownian kernel on SE(3), bi-equivariant forward diffusion, and scores.

Units: every pose and point cloud entering this module is expected in
non-dimensionalized coordinates (lengths divided by the characteristic
scale ``DiffusionConfig.L``); the contact radius ``r`` is kept in scene
units and divided by ``L`` internally.  The Brownian kernel is

    B_t(g) = N(p; 0, t I) * IG_SO3(R; eps = t/2)

with the Gaussian over the 3 translation components and the rotational
factor relative to normalized Haar measure.  Scores are Lie derivatives
along right perturbations ``g exp(eps e_i)``, stored linear-first; the
translational component is the body-frame form ``-R^T p / t``, which is
what finite differences of the log density along right perturbations
produce.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import igso3
from .igso3 import IgParams
from .lie import (
    Pose,
    Twist,
    compose,
    inverse,
    quat_canonical,
    quat_conj,
    quat_log,
    quat_mul,
    quat_rotate,
    translation_pose,
)
from .pointcloud import PointCloud, radius_count, transform

__all__ = [
    "DiffusionConfig",
    "DemoSet",
    "brownian_log_density",
    "brownian_sample",
    "brownian_score",
    "contact_origin_weights",
    "forward_diffuse",
    "target_score",
    "frame_target_score",
    "kernel_log_density",
    "marginal_score_oracle",
    "score_matching_loss",
    "MixtureScore",
    "BrownianScoreFn",
]


@dataclass(frozen=True)
class DiffusionConfig:
    """Diffusion time t, contact radius r (scene units), length unit L."""

    t: float
    r: float
    L: float = 1.0

    def __post_init__(self) -> None:
        if not (self.t > 0.0 and self.r > 0.0 and self.L > 0.0):
            raise ValueError("t, r, L must all be positive")

    @property
    def r_nd(self) -> float:
        return self.r / self.L


@dataclass(frozen=True)
class DemoSet:
    """Demonstration tuples (target pose, scene cloud, grasp cloud)."""

    demos: tuple[tuple[Pose, PointCloud, PointCloud], ...]

    def __post_init__(self) -> None:
        if len(self.demos) == 0:
            raise ValueError("demo set must be nonempty")
        for _, scene, grasp in self.demos:
            if len(scene) == 0 or len(grasp) == 0:
                raise ValueError("demo point clouds must be nonempty")
        object.__setattr__(self, "demos", tuple(self.demos))

    def __len__(self) -> int:
        return len(self.demos)

    def shared_clouds(self) -> tuple[PointCloud, PointCloud]:
        """The single (scene, grasp) pair; raises if demos disagree."""
        _, scene, grasp = self.demos[0]
        for _, s, g in self.demos[1:]:
            if s is not scene and not np.array_equal(s.positions, scene.positions):
                raise ValueError("demo set mixes different scene clouds")
            if g is not grasp and not np.array_equal(g.positions, grasp.positions):
                raise ValueError("demo set mixes different grasp clouds")
        return scene, grasp


def _ig_params(t: float) -> IgParams:
    return IgParams(eps=0.5 * t)


LOG_DENSITY_FLOOR = -745.0  # log of the smallest subnormal double


def brownian_log_density(h: Pose, t: float) -> float:
    """log B_t(h) = log N(p; 0, tI) + log IG(R; t/2).

    Rotational densities that underflow the series' numerical floor
    saturate at LOG_DENSITY_FLOOR.
    """
    if t <= 0.0:
        raise ValueError("t must be positive")
    p2 = float(np.dot(h.p, h.p))
    gauss = -1.5 * math.log(2.0 * math.pi * t) - p2 / (2.0 * t)
    rot = igso3.igso3_density(h.r.angle, _ig_params(t))
    return gauss + (math.log(rot) if rot > 0.0 else LOG_DENSITY_FLOOR)


def brownian_sample(t: float, rng: np.random.Generator) -> Pose:
    """Independent draw: translation N(0, tI), rotation IG_SO3(t/2)."""
    if t <= 0.0:
        raise ValueError("t must be positive")
    rot = igso3.igso3_sample(_ig_params(t), rng)
    p = math.sqrt(t) * rng.standard_normal(3)
    return Pose(p, rot)


def brownian_score(h: Pose, t: float) -> Twist:
    """Score of B_t along right perturbations of h.

    Angular part: the rotational series score.  Linear part: -R^T p / t.
    Verified against finite differences of brownian_log_density.
    """
    if t <= 0.0:
        raise ValueError("t must be positive")
    omega = igso3.igso3_score(h.r, _ig_params(t))
    nu = -h.r.inverse().apply(h.p) / t
    return Twist(nu, omega)


def contact_origin_weights(grasp: PointCloud, scene_in_body: PointCloud, r: float) -> np.ndarray:
    """Per-grasp-point weights proportional to scene contact counts.

    A scene point contributes when its distance is <= r (inclusive).
    When no grasp point has any contact the distribution degenerates and
    falls back to uniform.
    """
    if len(grasp) == 0:
        raise ValueError("empty grasp cloud")
    counts = np.array([radius_count(p, scene_in_body, r) for p in grasp.positions], dtype=np.float64)
    total = counts.sum()
    if total == 0.0:
        return np.full(len(grasp), 1.0 / len(grasp))
    return counts / total


def forward_diffuse(
    g0: Pose,
    scene: PointCloud,
    grasp: PointCloud,
    cfg: DiffusionConfig,
    rng: np.random.Generator,
) -> tuple[Pose, np.ndarray, Pose]:
    """One forward-diffusion draw: returns (g_t, p_de, delta_g).

    The diffusion origin p_de is a grasp point sampled from the contact
    weights against the body-frame scene g0^-1 . O_s; the displacement is
    a Brownian draw applied in the translated frame:
    g_t = g0 T(p_de) delta_g T(p_de)^-1.
    """
    if len(scene) == 0 or len(grasp) == 0:
        raise ValueError("empty point cloud")
    scene_in_body = transform(scene, inverse(g0))
    weights = contact_origin_weights(grasp, scene_in_body, cfg.r_nd)
    idx = int(rng.choice(len(grasp), p=weights))
    p_de = grasp.positions[idx].copy()
    dg = brownian_sample(cfg.t, rng)
    t_p = translation_pose(p_de)
    g_t = compose(compose(compose(g0, t_p), dg), inverse(t_p))
    return g_t, p_de, dg


def _conjugated_kernel_pose(g: Pose, g0: Pose, p_de: np.ndarray) -> Pose:
    """h = T(-p_de) g0^-1 g T(p_de)."""
    t_p = translation_pose(p_de)
    return compose(compose(compose(inverse(t_p), inverse(g0)), g), t_p)


def target_score(g: Pose, g0: Pose, p_de: np.ndarray, t: float) -> Twist:
    """Analytic score target: [Ad_{T(p_de)}]^-T applied to the kernel score.

    For a pure translation the inverse-transpose adjoint keeps the linear
    part and adds the lever-arm term p_de x s_nu to the angular part.
    """
    h = _conjugated_kernel_pose(g, g0, np.asarray(p_de, dtype=np.float64))
    base = brownian_score(h, t)
    return Twist(base.nu, base.omega + np.cross(p_de, base.nu))


def frame_target_score(g: Pose, g0: Pose, g_de: Pose, t: float) -> Twist:
    """Score target for a general SE(3) diffusion frame g_de.

    The shipped origin selection only ever produces pure-translation
    frames (target_score is the fast path for those); this is the
    extension surface for frame mechanisms with a rotational part:
    [Ad_{g_de}]^-T applied to the kernel score of g_de^-1 g0^-1 g g_de.
    """
    from .lie import adjoint_inv_transpose

    h = compose(compose(compose(inverse(g_de), inverse(g0)), g), g_de)
    base = brownian_score(h, t).as_array()
    return Twist.from_array(adjoint_inv_transpose(g_de) @ base)


def _component_log_weights(g0: Pose, scene: PointCloud, grasp: PointCloud, cfg: DiffusionConfig):
    """Contact weights for one demo, restricted to nonzero entries."""
    scene_in_body = transform(scene, inverse(g0))
    w = contact_origin_weights(grasp, scene_in_body, cfg.r_nd)
    keep = np.nonzero(w > 0.0)[0]
    return grasp.positions[keep], np.log(w[keep])


def kernel_log_density(
    g: Pose,
    g0: Pose,
    scene: PointCloud,
    grasp: PointCloud,
    cfg: DiffusionConfig,
) -> float:
    """log sum_p w_p B_t((g0 <| p)^-1 (g <| p)), evaluated via log-sum-exp.

    ``<|`` is right multiplication by the pure translation T(p); the sum
    runs over grasp points with nonzero contact weight.
    """
    if len(scene) == 0 or len(grasp) == 0:
        raise ValueError("empty point cloud")
    points, logw = _component_log_weights(g0, scene, grasp, cfg)
    vals = np.array([
        logw[k] + brownian_log_density(_conjugated_kernel_pose(g, g0, points[k]), cfg.t)
        for k in range(points.shape[0])
    ])
    m = float(np.max(vals))
    return m + math.log(float(np.sum(np.exp(vals - m))))


class MixtureScore:
    """Exact score of the Dirac-mixture diffused marginal.

    Components are (demo, grasp point) pairs weighted by uniform demo
    weights times contact weights; the score is the density-weighted
    average of the adjoint-transported kernel scores, assembled in log
    space.  Instances precompute per-demo data and support vectorized
    evaluation over pose batches (used by the annealed sampler).
    """

    supports_batch = True

    def __init__(self, demos: DemoSet, cfg: DiffusionConfig):
        scene, grasp = demos.shared_clouds()
        self.cfg = cfg
        self._demo_data = []
        logn = -math.log(len(demos))
        for g0, _, _ in demos.demos:
            points, logw = _component_log_weights(g0, scene, grasp, cfg)
            inv0 = inverse(g0)
            self._demo_data.append({
                "q0inv": inv0.r.q.copy(),
                "p0inv": inv0.p.copy(),
                "points": points,
                "logw": logw + logn,
            })

    def score_batch(self, q: np.ndarray, p: np.ndarray, t: float, clamp: bool = True) -> np.ndarray:
        """(N, 6) scores for quaternion/translation stacks at time t."""
        n = q.shape[0]
        params = IgParams(eps=0.5 * t)
        log_parts, nu_parts, om_parts = [], [], []
        for demo in self._demo_data:
            qm = quat_mul(demo["q0inv"][None, :], q)
            pm = quat_rotate(demo["q0inv"][None, :], p) + demo["p0inv"][None, :]
            rotvec = quat_log(qm)
            theta = np.linalg.norm(rotvec, axis=-1)
            ratio = igso3.score_ratio(theta, params, clamp=clamp)
            axis = rotvec / np.where(theta < 1e-12, 1.0, theta)[:, None]
            s_om_base = ratio[:, None] * axis
            dens = igso3.igso3_density(np.minimum(theta, math.pi), params)
            log_f = np.where(dens > 0.0, np.log(np.maximum(dens, 1e-320)), LOG_DENSITY_FLOOR)
            pts = demo["points"]  # (K, 3)
            # h translation per component: p_m + R_m p_k - p_k
            rp = quat_rotate(qm[:, None, :], pts[None, :, :])
            ph = pm[:, None, :] + rp - pts[None, :, :]
            p2 = np.sum(ph * ph, axis=-1)
            log_gauss = -1.5 * math.log(2.0 * math.pi * t) - p2 / (2.0 * t)
            log_parts.append(demo["logw"][None, :] + log_gauss + log_f[:, None])
            s_nu = -quat_rotate(quat_conj(qm)[:, None, :], ph) / t
            nu_parts.append(s_nu)
            om_parts.append(np.cross(pts[None, :, :], s_nu) + s_om_base[:, None, :])
        logs = np.concatenate(log_parts, axis=1)
        nus = np.concatenate(nu_parts, axis=1)
        oms = np.concatenate(om_parts, axis=1)
        m = np.max(logs, axis=1, keepdims=True)
        w = np.exp(logs - m)
        w /= np.sum(w, axis=1, keepdims=True)
        out = np.empty((n, 6))
        out[:, :3] = np.sum(w[:, :, None] * nus, axis=1)
        out[:, 3:] = np.sum(w[:, :, None] * oms, axis=1)
        return out

    def __call__(self, g: Pose, t: float) -> Twist:
        arr = self.score_batch(g.r.q[None, :], g.p[None, :], t, clamp=False)
        return Twist.from_array(arr[0])


def marginal_score_oracle(g: Pose, demos: DemoSet, cfg: DiffusionConfig) -> Twist:
    """Exact score of the uniform Dirac-mixture marginal at time cfg.t."""
    return MixtureScore(demos, cfg)(g, cfg.t)


def score_matching_loss(model_score: Twist, g: Pose, g0: Pose, p_de: np.ndarray, t: float) -> float:
    """Half squared error against the analytic target over all 6 components."""
    diff = model_score.as_array() - target_score(g, g0, p_de, t).as_array()
    return 0.5 * float(np.dot(diff, diff))


class BrownianScoreFn:
    """Score function of the plain Brownian kernel, batch-capable.

    Useful as a stationary-distribution test target for the Langevin
    sampler: with constant schedule time t the chain should equilibrate
    to B_t.
    """

    supports_batch = True

    def __call__(self, g: Pose, t: float) -> Twist:
        return brownian_score(g, t)

    def score_batch(self, q: np.ndarray, p: np.ndarray, t: float) -> np.ndarray:
        params = IgParams(eps=0.5 * t)
        rotvec = quat_log(quat_canonical(q))
        theta = np.linalg.norm(rotvec, axis=-1)
        ratio = igso3.score_ratio(theta, params, clamp=True)
        axis = rotvec / np.where(theta < 1e-12, 1.0, theta)[:, None]
        out = np.empty((q.shape[0], 6))
        out[:, :3] = -quat_rotate(quat_conj(q), p) / t
        out[:, 3:] = ratio[:, None] * axis
        return out
