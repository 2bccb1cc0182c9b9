"""
回転表現の変換
正規化オイラー角 r ∈ [0,1)^3 は (x, y, z) 軸まわりの回転量を1回転に対する割合で表し、
R = Rz(2π r_z) · Ry(2π r_y) · Rx(2π r_x)（内因性 Z-Y-X）で合成する
"""
import logging
import warnings

import numpy as np
from scipy.spatial.transform import Rotation

from ..interfaces.exceptions import ConfigurationError

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi


def is_rotation_matrix(R, tol: float = 1e-6) -> bool:
    """直交性と det = +1 を許容誤差内で確認"""
    matrix = np.asarray(R, dtype=float)
    if matrix.shape[-2:] != (3, 3):
        return False
    identity = np.eye(3)
    orthogonal = np.allclose(np.swapaxes(matrix, -1, -2) @ matrix, identity, atol=tol)
    return bool(orthogonal and np.allclose(np.linalg.det(matrix), 1.0, atol=tol))


def canonicalize_euler_norm(r) -> np.ndarray:
    """正規化角を [0, 1) に折り返す（1 と丸め誤差で 1 になる値は 0 にする）"""
    wrapped = np.mod(np.asarray(r, dtype=float), 1.0)
    wrapped[wrapped >= 1.0 - 1e-12] = 0.0
    return wrapped + 0.0  # -0.0 を 0.0 に揃える


def euler_norm_to_matrix(r) -> np.ndarray:
    """
    正規化オイラー角を回転行列に変換

    Args:
        r: (..., 3) の正規化角 (r_x, r_y, r_z)

    Returns:
        (..., 3, 3) の回転行列
    """
    angles = TWO_PI * np.mod(np.asarray(r, dtype=float), 1.0)
    if angles.shape[-1] != 3:
        raise ConfigurationError(f"正規化オイラー角は3成分である必要があります: {angles.shape}")
    flat = angles.reshape(-1, 3)
    # scipy の大文字軸は内因性回転。角度の並びは合成順 (z, y, x)
    matrices = Rotation.from_euler('ZYX', flat[:, ::-1]).as_matrix()
    return matrices.reshape(angles.shape[:-1] + (3, 3))


def matrix_to_euler_norm(R) -> np.ndarray:
    """
    回転行列を正規化オイラー角に変換

    ジンバルロック（r_y = ±1/4）では第3角 r_x を 0 とする解を返す。

    Args:
        R: (..., 3, 3) の回転行列

    Returns:
        (..., 3) の正規化角、各成分 [0, 1)
    """
    matrices = np.asarray(R, dtype=float)
    if not is_rotation_matrix(matrices):
        raise ConfigurationError("有効な回転行列ではありません")
    flat = matrices.reshape(-1, 3, 3)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter('always')
        zyx = Rotation.from_matrix(flat).as_euler('ZYX')
    if caught:
        logger.warning("ジンバルロックを検出しました。第3角を0に設定します")
    r = canonicalize_euler_norm(zyx[:, ::-1] / TWO_PI)
    return r.reshape(matrices.shape[:-2] + (3,))


def relative_rotation_angle(Rp, Rg) -> np.ndarray:
    """
    2つの回転行列の正規化角度差 (1/π)·arccos((tr(Rp^T Rg) - 1) / 2)

    Returns:
        [0, 1] の値（1 が 180 度）
    """
    pred = np.asarray(Rp, dtype=float)
    gt = np.asarray(Rg, dtype=float)
    trace = np.einsum('...ij,...ij->...', pred, gt)
    cosine = np.clip((trace - 1.0) / 2.0, -1.0, 1.0)
    return np.arccos(cosine) / np.pi


def orthonormalize(R) -> np.ndarray:
    """SVD で最も近い回転行列へ射影（小数6桁で保存された行列の復元用）"""
    matrix = np.asarray(R, dtype=float)
    U, _, Vt = np.linalg.svd(matrix)
    D = np.eye(3)
    D[2, 2] = np.sign(np.linalg.det(U @ Vt))
    return U @ D @ Vt
