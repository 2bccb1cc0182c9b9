"""
統合チェックポイント（エンコーダ + デコーダ）の保存と読み込み
"""
import logging
import os
from typing import Any, Dict, Optional, Tuple

import torch

from ..interfaces.exceptions import CheckpointError, CheckpointMismatchError, ConfigurationError
from .dronekey_model import DroneKeyModel
from .model_config import ModelConfig

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT_VERSION = 1


def save_checkpoint(path: str, model: DroneKeyModel, epoch: int,
                    metrics: Optional[Dict[str, float]] = None) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    payload = {
        'header': {'format_version': CHECKPOINT_FORMAT_VERSION, 'model': model.config.to_header()},
        'state_dict': model.state_dict(),
        'epoch': int(epoch),
        'metrics': dict(metrics or {}),
    }
    torch.save(payload, path)
    logger.debug("チェックポイントを保存しました: %s (epoch %d)", path, epoch)
    return path


def _read(path: str) -> Dict[str, Any]:
    if not os.path.isfile(path):
        raise CheckpointError(f"チェックポイントが見つかりません: {path}")
    try:
        payload = torch.load(path, map_location='cpu', weights_only=False)
    except Exception as e:  # torch.load は破損ファイルで様々な例外を投げる
        raise CheckpointError(f"チェックポイントを読み込めません: {path}: {e}") from e
    if not isinstance(payload, dict) or 'header' not in payload or 'state_dict' not in payload:
        raise CheckpointError(f"チェックポイントの形式が不正です: {path}")
    return payload


def load_checkpoint(path: str, expected_resolution: Optional[Tuple[int, int]] = None
                    ) -> Tuple[DroneKeyModel, Dict[str, Any]]:
    """
    チェックポイントからモデルを復元

    Args:
        path: チェックポイントファイル
        expected_resolution: データセットの解像度（指定時はヘッダーと照合）

    Returns:
        (評価モードのモデル, ペイロード)
    """
    payload = _read(path)
    header = payload['header']
    if header.get('format_version') != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointMismatchError(
            f"チェックポイント形式のバージョンが一致しません: {header.get('format_version')} != {CHECKPOINT_FORMAT_VERSION}")
    try:
        config = ModelConfig.from_header(header['model'])
    except (KeyError, TypeError, ConfigurationError) as e:
        raise CheckpointMismatchError(f"チェックポイントのモデル構成が不正です: {path}: {e}") from e
    if expected_resolution is not None and tuple(expected_resolution) != config.resolution:
        raise CheckpointMismatchError(
            f"チェックポイントの解像度 {config.resolution} がデータセットの解像度 {tuple(expected_resolution)} と一致しません")
    model = DroneKeyModel(config)
    try:
        model.load_state_dict(payload['state_dict'])
    except RuntimeError as e:
        raise CheckpointMismatchError(f"重みがモデル構成と一致しません: {path}: {e}") from e
    model.eval()
    return model, payload
