"""
4点 PnP ソルバー（比較用ベースライン）
機体寸法（プロペラ配置）を事前情報として使い、平面ホモグラフィで初期化してから
Levenberg 減衰付き Gauss-Newton で再投影誤差を最小化する
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from ..data.drone_classes import NUM_KEYPOINTS
from ..geometry.camera import CameraIntrinsics
from ..geometry.pose import RigidPose
from ..geometry.rotations import orthonormalize
from ..interfaces.exceptions import ConfigurationError, ConvergenceError, DegeneracyError

logger = logging.getLogger(__name__)

LAMBDA_INIT = 1e-3
LAMBDA_FACTOR = 10.0
MAX_ITERATIONS = 100
STEP_TOLERANCE = 1e-10
MAX_DAMPING = 1e16
COLLINEARITY_TOLERANCE = 1e-9


@dataclass
class PnPProblem:
    """機体座標系の4点・画素座標の4点・内部パラメータ（同じ順序で対応）"""

    points_3d_body: np.ndarray
    points_2d: np.ndarray
    K: CameraIntrinsics

    def __post_init__(self):
        self.points_3d_body = np.asarray(self.points_3d_body, dtype=float)
        self.points_2d = np.asarray(self.points_2d, dtype=float)
        if self.points_3d_body.shape != (NUM_KEYPOINTS, 3) or self.points_2d.shape != (NUM_KEYPOINTS, 2):
            raise ConfigurationError(
                f"PnP には4組の対応点が必要です: {self.points_3d_body.shape}, {self.points_2d.shape}")
        if not (np.all(np.isfinite(self.points_3d_body)) and np.all(np.isfinite(self.points_2d))):
            raise ConfigurationError("PnP の入力に有限でない値があります")
        singular = np.linalg.svd(self.points_3d_body - self.points_3d_body.mean(axis=0), compute_uv=False)
        if singular[0] <= 0 or singular[1] <= COLLINEARITY_TOLERANCE * singular[0]:
            raise DegeneracyError("3D 点が同一直線上にあるため姿勢が定まりません")


@dataclass
class PnPCandidate:
    pose: RigidPose
    residual: float
    positive_depth: bool
    converged: bool
    iterations: int


@dataclass
class PnPResult:
    pose: RigidPose
    residual: float
    candidates: List[PnPCandidate] = field(default_factory=list)


def _project(K: CameraIntrinsics, points_cam: np.ndarray) -> np.ndarray:
    z = points_cam[:, 2]
    return np.stack([K.fx * points_cam[:, 0] / z + K.cx, K.fy * points_cam[:, 1] / z + K.cy], axis=-1)


def reprojection_residual(problem: PnPProblem, rotation: np.ndarray, translation: np.ndarray) -> float:
    """平均二乗再投影誤差（ピクセル²）、カメラ後方の点があれば inf"""
    points_cam = problem.points_3d_body @ rotation.T + translation
    if np.any(points_cam[:, 2] <= 0):
        return float('inf')
    diff = _project(problem.K, points_cam) - problem.points_2d
    return float(np.mean(np.sum(diff ** 2, axis=-1)))


def _hartley(points: np.ndarray) -> np.ndarray:
    centroid = points.mean(axis=0)
    spread = np.mean(np.linalg.norm(points - centroid, axis=1))
    scale = np.sqrt(2.0) / spread if spread > 0 else 1.0
    return np.array([
        [scale, 0.0, -scale * centroid[0]],
        [0.0, scale, -scale * centroid[1]],
        [0.0, 0.0, 1.0],
    ])


def _homography(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """正規化 DLT による平面ホモグラフィ（src → dst）"""
    t_src, t_dst = _hartley(src), _hartley(dst)
    src_h = np.c_[src, np.ones(len(src))] @ t_src.T
    dst_h = np.c_[dst, np.ones(len(dst))] @ t_dst.T
    rows = []
    for (x, y, _), (u, v, _) in zip(src_h, dst_h):
        rows.append([-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u])
        rows.append([0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v])
    _, _, vt = np.linalg.svd(np.asarray(rows))
    normalized = vt[-1].reshape(3, 3)
    return np.linalg.inv(t_dst) @ normalized @ t_src


def _initial_candidates(problem: PnPProblem) -> List[Tuple[np.ndarray, np.ndarray]]:
    """ホモグラフィ分解による初期姿勢と、法線を視線に対して鏡映したもう一つの候補"""
    points = problem.points_3d_body
    centroid = points.mean(axis=0)
    _, _, vt = np.linalg.svd(points - centroid)
    basis = np.stack([vt[0], vt[1], np.cross(vt[0], vt[1])], axis=1)   # 平面座標系 → 機体座標系
    plane = (points - centroid) @ basis[:, :2]

    rays = np.c_[problem.points_2d, np.ones(NUM_KEYPOINTS)] @ problem.K.inverse_matrix().T
    H = _homography(plane, rays[:, :2] / rays[:, 2:])
    h1, h2, h3 = H[:, 0], H[:, 1], H[:, 2]
    scale = 2.0 / (np.linalg.norm(h1) + np.linalg.norm(h2))
    if h3[2] * scale < 0:
        scale = -scale
    r1, r2 = scale * h1, scale * h2
    rotation_plane = orthonormalize(np.stack([r1, r2, np.cross(r1, r2)], axis=1))
    t_plane = scale * h3

    sight = t_plane / np.linalg.norm(t_plane)
    half_turn = 2.0 * np.outer(sight, sight) - np.eye(3)
    mirrored = half_turn @ rotation_plane @ np.diag([-1.0, -1.0, 1.0])

    candidates = []
    for rotation in (rotation_plane, mirrored):
        body_rotation = rotation @ basis.T
        candidates.append((body_rotation, t_plane - body_rotation @ centroid))
    return candidates


def _jacobian(problem: PnPProblem, rotation: np.ndarray, translation: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """残差 (8,) と左側回転ベクトル摂動・並進に関するヤコビアン (8, 6)"""
    K = problem.K
    rotated = problem.points_3d_body @ rotation.T
    points_cam = rotated + translation
    x, y, z = points_cam[:, 0], points_cam[:, 1], points_cam[:, 2]
    residual = (_project(K, points_cam) - problem.points_2d).reshape(-1)

    jacobian = np.zeros((2 * NUM_KEYPOINTS, 6))
    for k in range(NUM_KEYPOINTS):
        d_proj = np.array([
            [K.fx / z[k], 0.0, -K.fx * x[k] / z[k] ** 2],
            [0.0, K.fy / z[k], -K.fy * y[k] / z[k] ** 2],
        ])
        px, py, pz = rotated[k]
        neg_skew = np.array([[0.0, pz, -py], [-pz, 0.0, px], [py, -px, 0.0]])
        jacobian[2 * k:2 * k + 2, :3] = d_proj @ neg_skew
        jacobian[2 * k:2 * k + 2, 3:] = d_proj
    return residual, jacobian


def refine_pose(problem: PnPProblem, rotation: np.ndarray, translation: np.ndarray) -> PnPCandidate:
    """
    Levenberg-Marquardt による姿勢の精緻化

    Raises:
        ConvergenceError: 最大反復回数で収束しない場合（最良の反復値と残差を保持）
    """
    damping = LAMBDA_INIT
    cost = reprojection_residual(problem, rotation, translation)
    for iteration in range(1, MAX_ITERATIONS + 1):
        residual, jacobian = _jacobian(problem, rotation, translation)
        normal = jacobian.T @ jacobian
        gradient = jacobian.T @ residual
        while True:
            damped = normal + damping * np.diag(np.maximum(np.diag(normal), 1e-12))
            try:
                step = -np.linalg.solve(damped, gradient)
            except np.linalg.LinAlgError:
                step = -np.linalg.lstsq(damped, gradient, rcond=None)[0]
            if not np.all(np.isfinite(step)):
                break
            if np.linalg.norm(step) < STEP_TOLERANCE or damping > MAX_DAMPING:
                return PnPCandidate(RigidPose(rotation, translation), cost,
                                    _positive_depth(problem, rotation, translation), True, iteration)
            trial_rotation = Rotation.from_rotvec(step[:3]).as_matrix() @ rotation
            trial_translation = translation + step[3:]
            trial_cost = reprojection_residual(problem, trial_rotation, trial_translation)
            if trial_cost < cost:
                rotation, translation, cost = trial_rotation, trial_translation, trial_cost
                damping = max(damping / LAMBDA_FACTOR, 1e-12)
                break
            damping *= LAMBDA_FACTOR
    raise ConvergenceError(
        f"PnP が {MAX_ITERATIONS} 回の反復で収束しませんでした (残差 {cost:.3e})",
        best_pose=RigidPose(orthonormalize(rotation), translation),
        residual=cost,
    )


def _positive_depth(problem: PnPProblem, rotation: np.ndarray, translation: np.ndarray) -> bool:
    return bool(np.all((problem.points_3d_body @ rotation.T + translation)[:, 2] > 0))


def pnp_solve_detailed(problem: PnPProblem) -> PnPResult:
    """両候補を精緻化し、全点の奥行きが正の候補のうち残差最小のものを選ぶ"""
    candidates: List[PnPCandidate] = []
    failure: Optional[ConvergenceError] = None
    for rotation, translation in _initial_candidates(problem):
        try:
            candidates.append(refine_pose(problem, rotation, translation))
        except ConvergenceError as e:
            logger.debug("PnP 候補が収束しませんでした: %s", e)
            failure = e
            candidates.append(PnPCandidate(e.best_pose, e.residual,
                                           _positive_depth(problem, e.best_pose.rotation, e.best_pose.translation),
                                           False, MAX_ITERATIONS))
    pool = [c for c in candidates if c.positive_depth] or candidates
    best = min(pool, key=lambda c: c.residual)
    if not best.converged:
        raise ConvergenceError(str(failure), best_pose=best.pose, residual=best.residual)
    return PnPResult(pose=best.pose, residual=best.residual, candidates=candidates)


def pnp_solve(problem: PnPProblem) -> RigidPose:
    return pnp_solve_detailed(problem).pose
