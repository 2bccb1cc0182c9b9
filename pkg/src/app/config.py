"""
コマンドライン用の設定
`key = value` 形式のテキストファイル（`#` コメント、`include <path>` 対応）を読み、
既定値 → 設定ファイル → コマンドライン引数 → --set の順に上書きする
"""
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

from ..interfaces.exceptions import ConfigurationError

logger = logging.getLogger(__name__)

EFFECTIVE_CONFIG_NAME = 'effective_config.txt'


def parse_bool(text: str) -> bool:
    lowered = str(text).strip().lower()
    if lowered in ('1', 'true', 'yes', 'on'):
        return True
    if lowered in ('0', 'false', 'no', 'off'):
        return False
    raise ValueError(f"真偽値として解釈できません: {text}")


def _optional_str(text: str) -> Optional[str]:
    text = str(text).strip()
    return None if text in ('', 'none', 'None') else text


# キー → (型変換, 既定値)
DEFAULTS: Dict[str, Tuple[Callable[[str], Any], Any]] = {
    'data': (_optional_str, None),
    'out': (str, 'runs'),
    'seed': (int, 0),
    'overwrite': (parse_bool, False),
    # gen
    'preset': (str, 'desk'),
    'workers': (int, 1),
    'dry_run': (parse_bool, False),
    # train
    'epochs': (int, 20),
    'batch_size': (int, 8),
    'lr': (float, 1e-5),
    'loss_strategy': (str, 'equal'),
    'use_encoder': (parse_bool, True),
    'decoder_variant': (int, 4),
    'class_input': (str, 'soft'),
    'positional_encoding': (parse_bool, True),
    'normalize_keypoint_loss': (parse_bool, True),
    'validation_split': (str, 'valid'),
    'augmentation': (parse_bool, False),
    'device': (str, 'cpu'),
    # eval / baseline
    'ckpt': (_optional_str, None),
    'split': (str, 'test'),
    'source': (str, 'gt'),
    'measure_fps': (parse_bool, False),
    # smooth / plot / analyze
    'predictions': (_optional_str, None),
    'sigma': (float, 2.0),
    'fps': (float, 30.0),
    'features': (_optional_str, None),
    'datasets': (_optional_str, None),
    'max_images': (int, 200),
}


@dataclass
class RunConfig:
    """解決済みの実行設定"""

    command: str
    config_path: Optional[str]
    values: Dict[str, Any] = field(default_factory=dict)
    overrides: List[str] = field(default_factory=list)

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    @property
    def out_dir(self) -> str:
        return self.values['out']

    @property
    def seed(self) -> int:
        return self.values['seed']

    def to_text(self) -> str:
        lines = [f"# command: {self.command}"]
        for key in sorted(self.values):
            value = self.values[key]
            if isinstance(value, bool):
                value = 'true' if value else 'false'
            lines.append(f"{key} = {'' if value is None else value}")
        return '\n'.join(lines) + '\n'

    def echo(self, out_dir: Optional[str] = None) -> str:
        """解決済み設定を出力ディレクトリに書き出す"""
        target = out_dir or self.out_dir
        os.makedirs(target, exist_ok=True)
        path = os.path.join(target, EFFECTIVE_CONFIG_NAME)
        with open(path, 'w', encoding='utf-8') as f:
            f.write(self.to_text())
        return path


def _split_assignment(text: str, origin: str) -> Tuple[str, str]:
    if '=' not in text:
        raise ConfigurationError(f"{origin}: 'key = value' 形式ではありません: {text!r}")
    key, value = text.split('=', 1)
    return key.strip(), value.strip()


def parse_config_file(path: str, _stack: Optional[List[str]] = None) -> Dict[str, str]:
    """
    設定ファイルを読み込み（include は読み込み元からの相対パス、循環は拒否）

    Returns:
        生の文字列値の辞書（後の行が前の行を上書き）
    """
    real = os.path.realpath(path)
    stack = list(_stack or [])
    if real in stack:
        chain = ' -> '.join(stack + [real])
        raise ConfigurationError(f"設定ファイルの include が循環しています: {chain}")
    if not os.path.isfile(path):
        raise ConfigurationError(f"設定ファイルが見つかりません: {path}")
    stack.append(real)

    values: Dict[str, str] = {}
    with open(path, 'r', encoding='utf-8') as f:
        for number, raw in enumerate(f, start=1):
            line = raw.split('#', 1)[0].strip()
            if not line:
                continue
            if line.startswith('include ') or line.startswith('include\t'):
                target = line[len('include'):].strip()
                if not os.path.isabs(target):
                    target = os.path.join(os.path.dirname(path), target)
                values.update(parse_config_file(target, stack))
                continue
            key, value = _split_assignment(line, f"{path}:{number}")
            values[key] = value
    return values


def _convert(key: str, value: Any, origin: str) -> Any:
    if key not in DEFAULTS:
        raise ConfigurationError(f"{origin}: 未知の設定キー '{key}'")
    converter, _ = DEFAULTS[key]
    if not isinstance(value, str):
        return value
    try:
        return converter(value)
    except ValueError as e:
        raise ConfigurationError(f"{origin}: '{key}' の値が不正です: {value!r} ({e})") from e


def resolve_config(command: str, config_path: Optional[str] = None,
                   cli_values: Optional[Dict[str, Any]] = None,
                   overrides: Optional[List[str]] = None) -> RunConfig:
    """
    実行設定を解決

    Args:
        command: サブコマンド名
        config_path: 設定ファイル
        cli_values: コマンドライン引数で明示された値（None は未指定）
        overrides: --set key=value のリスト
    """
    values = {key: default for key, (_, default) in DEFAULTS.items()}
    if config_path:
        for key, value in parse_config_file(config_path).items():
            values[key] = _convert(key, value, config_path)
    for key, value in (cli_values or {}).items():
        if value is not None:
            values[key] = _convert(key, value, 'コマンドライン')
    for item in overrides or []:
        key, value = _split_assignment(item, '--set')
        values[key] = _convert(key, value, '--set')
    logger.debug("設定を解決しました: %s", values)
    return RunConfig(command=command, config_path=config_path, values=values, overrides=list(overrides or []))
