"""
モデル構成
チェックポイントのヘッダーにそのまま記録され、評価時の整合性確認に使う
"""
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, Tuple

from ..data.drone_classes import NUM_CLASSES
from ..interfaces.exceptions import ConfigurationError

BACKBONE_STAGES = 4
DECODER_VARIANTS = (1, 2, 3, 4)
CLASS_INPUTS = ('soft', 'onehot')


@dataclass
class ModelConfig:
    """エンコーダ・デコーダの構成"""

    resolution: Tuple[int, int] = (128, 128)
    patch_size: int = 1
    d_model: int = 64
    num_layers: int = 4
    num_heads: int = 4
    mlp_ratio: int = 2
    num_classes: int = NUM_CLASSES
    use_positional_encoding: bool = True
    use_encoder: bool = True
    # 1: MLP_pose のみ, 2: + レイ埋め込み, 3: + MLP_3D, 4: + クラス埋め込み（完全版）
    decoder_variant: int = 4
    class_input: str = 'soft'
    ray_embed_dim: int = 64
    class_embed_dim: int = 64
    hidden_dim: int = 128

    def __post_init__(self):
        self.resolution = (int(self.resolution[0]), int(self.resolution[1]))
        if self.patch_size < 1:
            raise ConfigurationError("patch_size は1以上である必要があります")
        rows, cols = self.token_grid
        if rows < 1 or cols < 1:
            raise ConfigurationError(f"解像度が小さすぎてトークンを作れません: {self.resolution}")
        if self.d_model % self.num_heads:
            raise ConfigurationError(f"d_model は num_heads で割り切れる必要があります: {self.d_model}, {self.num_heads}")
        if self.num_layers < 1:
            raise ConfigurationError("num_layers は1以上である必要があります")
        if self.decoder_variant not in DECODER_VARIANTS:
            raise ConfigurationError(f"サポートされていないデコーダ構成: {self.decoder_variant}")
        if self.class_input not in CLASS_INPUTS:
            raise ConfigurationError(f"サポートされていないクラス入力: {self.class_input}")

    @property
    def token_grid(self) -> Tuple[int, int]:
        """トークン格子の (高さ, 幅)"""
        def reduce(n: int) -> int:
            for _ in range(BACKBONE_STAGES):
                n = (n + 1) // 2   # kernel 3, stride 2, padding 1
            return n // self.patch_size
        return reduce(self.resolution[1]), reduce(self.resolution[0])

    @property
    def num_tokens(self) -> int:
        rows, cols = self.token_grid
        return rows * cols

    def to_header(self) -> Dict[str, Any]:
        header = asdict(self)
        header['resolution'] = list(self.resolution)
        return header

    @classmethod
    def from_header(cls, header: Dict[str, Any]) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(header) - known
        if unknown:
            raise ConfigurationError(f"未知のモデル構成キー: {sorted(unknown)}")
        values = dict(header)
        if 'resolution' in values:
            values['resolution'] = tuple(values['resolution'])
        return cls(**values)
