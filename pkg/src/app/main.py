"""
ドローン姿勢推定パイプラインのコマンドラインアプリケーション
サブコマンド: gen, train, eval, baseline, smooth, plot, analyze
"""
import argparse
import glob
import logging
import os
import re
import sys
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

# プロジェクトルートをパスに追加
sys.path.append(os.path.dirname(os.path.dirname(os.path.dirname(__file__))))

from src.analysis.feature_analysis import FeatureCloud, extract_image_features, pca_project  # noqa: E402
from src.analysis.smoothing import PoseTrack, gaussian_smooth_track  # noqa: E402
from src.app.config import RunConfig, resolve_config  # noqa: E402
from src.app.plotting import plot_feature_scatter, plot_trajectory  # noqa: E402
from src.data.data_provider import DroneDataProvider, default_data_dir  # noqa: E402
from src.data.dataset_generator import PRESETS, DatasetManifest, build_manifest, generate_dataset  # noqa: E402
from src.interfaces.exceptions import (  # noqa: E402
    CheckpointError,
    ConfigurationError,
    DroneKeyError,
    PredictionParseError,
)
from src.services.baseline_service import evaluate_baseline  # noqa: E402
from src.services.evaluation_service import PREDICTION_COLUMNS, EvaluationReport, evaluate_checkpoint  # noqa: E402
from src.services.training_service import BEST_CHECKPOINT, CHECKPOINT_DIR, TrainConfig, train  # noqa: E402

logger = logging.getLogger('src.app')

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'
PROJECTION_NAME = 'pca_projection.csv'
PROJECTION_SUMMARY_NAME = 'pca_summary.csv'


# ---------------------------------------------------------------- 予測ファイル

def read_prediction_file(path: str) -> pd.DataFrame:
    """
    予測軌跡ファイル（frame,rx,ry,rz,tx,ty,tz）を読み込み

    Raises:
        PredictionParseError: 書式エラー（行番号はヘッダーを1行目として数える）
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except FileNotFoundError as e:
        raise PredictionParseError(path, 0, "予測ファイルが見つかりません") from e
    except pd.errors.EmptyDataError as e:
        raise PredictionParseError(path, 1, "ファイルが空です") from e
    except pd.errors.ParserError as e:
        match = re.search(r'line (\d+)', str(e))
        raise PredictionParseError(path, int(match.group(1)) if match else 0, f"列数が不正です: {e}") from e

    if list(frame.columns) != PREDICTION_COLUMNS:
        raise PredictionParseError(path, 1, f"ヘッダーが不正です: {list(frame.columns)} (期待: {PREDICTION_COLUMNS})")
    if frame.empty:
        raise PredictionParseError(path, 2, "データ行がありません")
    numeric = frame.apply(pd.to_numeric, errors='coerce')
    bad_rows = np.flatnonzero(numeric.isna().any(axis=1).to_numpy())
    if bad_rows.size:
        row = int(bad_rows[0])
        raise PredictionParseError(path, row + 2, f"数値として解釈できない値があります: {frame.iloc[row].tolist()}")
    frames = numeric['frame'].to_numpy()
    if np.any(frames != np.round(frames)):
        row = int(np.flatnonzero(frames != np.round(frames))[0])
        raise PredictionParseError(path, row + 2, "フレーム番号が整数ではありません")
    gaps = np.flatnonzero(np.diff(frames) != 1)
    if gaps.size:
        raise PredictionParseError(path, int(gaps[0]) + 3, "フレーム番号が連続していません")
    numeric['frame'] = numeric['frame'].astype(int)
    return numeric


def list_prediction_files(path: str) -> List[str]:
    """ファイルならそれ自体、ディレクトリなら配下の CSV（ソート済み）"""
    if os.path.isfile(path):
        return [path]
    if not os.path.isdir(path):
        raise ConfigurationError(f"予測ファイルが見つかりません: {path}")
    found = []
    for root, _, names in os.walk(path):
        found.extend(os.path.join(root, name) for name in names if name.endswith('.csv'))
    if not found:
        raise ConfigurationError(f"予測ファイル (*.csv) がありません: {path}")
    return sorted(found)


def _relative_name(path: str, base: str) -> str:
    if os.path.isfile(base):
        return os.path.basename(path)
    return os.path.relpath(path, base)


def write_track(track: PoseTrack, path: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    track.to_frame().to_csv(path, index=False, float_format='%.6f')
    return path


# ---------------------------------------------------------------- コマンド

def _data_dir(config: RunConfig) -> str:
    return config['data'] or default_data_dir()


def _print_manifest_summary(manifest: DatasetManifest):
    print(f"シーケンス数: {manifest.sequence_count} (サブシーケンス {manifest.subsequence_count})")
    print(f"総フレーム数: {manifest.total_frames}")
    for split, frames in manifest.frames_per_split().items():
        print(f"  {split}: {frames} フレーム, {manifest.sequences_per_split()[split]} シーケンス")


def _print_report(report: EvaluationReport):
    print(report.to_table().to_string(float_format=lambda v: f"{v:.4f}"))
    if report.fps is not None:
        print(f"FPS ({report.device}): {report.fps:.2f}")


def cmd_gen(config: RunConfig) -> int:
    preset = config['preset']
    if preset not in PRESETS:
        raise ConfigurationError(f"未知のプリセット: {preset} (候補: {', '.join(PRESETS)})")
    dataset_config = PRESETS[preset](seed=config.seed)
    if config['dry_run']:
        _print_manifest_summary(build_manifest(dataset_config))
        print(config.to_text(), end='')
        return 0
    manifest = generate_dataset(dataset_config, config.out_dir, overwrite=config['overwrite'],
                                workers=config['workers'])
    config.echo()
    _print_manifest_summary(manifest)
    return 0


def cmd_train(config: RunConfig) -> int:
    train_config = TrainConfig(
        learning_rate=config['lr'],
        batch_size=config['batch_size'],
        epochs=config['epochs'],
        seed=config.seed,
        loss_strategy=config['loss_strategy'],
        use_encoder=config['use_encoder'],
        decoder_variant=config['decoder_variant'],
        class_input=config['class_input'],
        use_positional_encoding=config['positional_encoding'],
        normalize_keypoint_loss=config['normalize_keypoint_loss'],
        validation_split=config['validation_split'],
        augmentation=config['augmentation'],
        device=config['device'],
    )
    provider = DroneDataProvider(_data_dir(config), cache_images=True)
    provider.load_manifest()
    config.echo()
    result = train(train_config, provider, config.out_dir)
    print(f"学習ログ: {result.log_path} ({len(result.records)} エポック)")
    print(f"最良チェックポイント: epoch {result.best_record['epoch']} → {result.best_checkpoint}")
    return 0


def _checkpoint_path(config: RunConfig) -> Optional[str]:
    """'best' と 'last' は出力ディレクトリ内のチェックポイントを指す"""
    ckpt = config['ckpt']
    checkpoint_dir = os.path.join(config.out_dir, CHECKPOINT_DIR)
    if ckpt == 'best':
        return os.path.join(checkpoint_dir, BEST_CHECKPOINT)
    if ckpt == 'last':
        epochs = sorted(glob.glob(os.path.join(checkpoint_dir, 'epoch_*.pt')))
        if not epochs:
            raise CheckpointError(f"チェックポイントが見つかりません: {checkpoint_dir}")
        return epochs[-1]
    return ckpt


def cmd_eval(config: RunConfig) -> int:
    checkpoint = _checkpoint_path(config) or os.path.join(config.out_dir, CHECKPOINT_DIR, BEST_CHECKPOINT)
    provider = DroneDataProvider(_data_dir(config))
    report_dir = os.path.join(config.out_dir, f"eval_{config['split']}")
    report = evaluate_checkpoint(checkpoint, provider, config['split'],
                                 measure_speed=config['measure_fps'], device=config['device'])
    paths = report.save(report_dir)
    config.echo(report_dir)
    _print_report(report)
    print(f"レポート: {paths['report']}")
    return 0


def cmd_baseline(config: RunConfig) -> int:
    provider = DroneDataProvider(_data_dir(config))
    report_dir = os.path.join(config.out_dir, f"baseline_{config['source']}_{config['split']}")
    report = evaluate_baseline(provider, config['split'], config['source'], _checkpoint_path(config))
    paths = report.save(report_dir)
    config.echo(report_dir)
    _print_report(report)
    print(f"レポート: {paths['report']}")
    return 0


def _require_predictions(config: RunConfig) -> str:
    if not config['predictions']:
        raise ConfigurationError("--predictions で予測ファイルまたはディレクトリを指定してください")
    return config['predictions']


def cmd_smooth(config: RunConfig) -> int:
    source = _require_predictions(config)
    files = list_prediction_files(source)
    target_dir = os.path.join(config.out_dir, 'smoothed')
    for path in files:
        track = PoseTrack.from_frame(read_prediction_file(path), fps=config['fps'])
        smoothed = gaussian_smooth_track(track, config['sigma'])
        write_track(smoothed, os.path.join(target_dir, _relative_name(path, source)))
    config.echo(target_dir)
    print(f"{len(files)} 本のトラックを平滑化しました (sigma={config['sigma']}): {target_dir}")
    return 0


def cmd_plot(config: RunConfig) -> int:
    written = []
    plot_dir = os.path.join(config.out_dir, 'plots')
    if config['predictions']:
        source = config['predictions']
        for path in list_prediction_files(source):
            name = _relative_name(path, source)
            track = PoseTrack.from_frame(read_prediction_file(path), fps=config['fps'])
            image = os.path.join(plot_dir, os.path.splitext(name)[0].replace(os.sep, '_') + '.png')
            written.append(plot_trajectory({'prediction': track}, image, title=name))
    if config['features']:
        projection = pd.read_csv(config['features'])
        summary_path = os.path.join(os.path.dirname(config['features']), PROJECTION_SUMMARY_NAME)
        explained = None
        if os.path.isfile(summary_path):
            explained = pd.read_csv(summary_path)['explained_variance_ratio'].tolist()
        written.append(plot_feature_scatter(projection, os.path.join(plot_dir, 'feature_pca.png'), explained))
    if not written:
        raise ConfigurationError("--predictions または --features を指定してください")
    config.echo(plot_dir)
    print(f"{len(written)} 枚の図を書き出しました: {plot_dir}")
    return 0


def _parse_datasets(text: str) -> Dict[str, str]:
    datasets = {}
    for item in filter(None, (part.strip() for part in text.split(','))):
        label, _, path = item.rpartition('=')
        datasets[label or os.path.basename(os.path.normpath(path))] = path
    return datasets


def cmd_analyze(config: RunConfig) -> int:
    datasets = _parse_datasets(config['datasets'] or _data_dir(config))
    clouds = []
    for label, path in datasets.items():
        provider = DroneDataProvider(path)
        total = len(provider)
        count = min(config['max_images'], total)
        indices = np.unique(np.linspace(0, total - 1, count).round().astype(int))
        images = [provider.load_image(int(i)) for i in indices]
        clouds.append(extract_image_features(images, label=label))
        logger.info("%s: %d 枚の画像から特徴を抽出しました", label, len(images))
    projection = pca_project(FeatureCloud.concat(clouds))
    labels = [label for cloud in clouds for label in cloud.labels]
    table = pd.DataFrame({'label': labels, 'pc1': projection.points[:, 0], 'pc2': projection.points[:, 1]})
    os.makedirs(config.out_dir, exist_ok=True)
    table.to_csv(os.path.join(config.out_dir, PROJECTION_NAME), index=False, float_format='%.6f')
    pd.DataFrame({'component': ['pc1', 'pc2'], 'explained_variance_ratio': projection.explained_variance}) \
        .to_csv(os.path.join(config.out_dir, PROJECTION_SUMMARY_NAME), index=False, float_format='%.6f')
    config.echo()
    print(f"寄与率: PC1 {projection.explained_variance[0]:.3f}, PC2 {projection.explained_variance[1]:.3f}")
    return 0


COMMANDS = {
    'gen': cmd_gen,
    'train': cmd_train,
    'eval': cmd_eval,
    'baseline': cmd_baseline,
    'smooth': cmd_smooth,
    'plot': cmd_plot,
    'analyze': cmd_analyze,
}


# ---------------------------------------------------------------- 引数

def _bool_flag(parser: argparse.ArgumentParser, name: str, dest: str, help_text: str):
    group = parser.add_mutually_exclusive_group()
    group.add_argument(f'--{name}', dest=dest, action='store_const', const=True, default=None, help=help_text)
    group.add_argument(f'--no-{name}', dest=dest, action='store_const', const=False)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='key = value 形式の設定ファイル')
    common.add_argument('--out', help='出力ディレクトリ')
    common.add_argument('--seed', type=int, help='乱数シード')
    common.add_argument('--overwrite', action='store_const', const=True, default=None,
                        help='既存の出力を上書き')
    common.add_argument('--set', dest='overrides', action='append', default=[], metavar='KEY=VALUE',
                        help='設定値の上書き（複数指定可）')
    common.add_argument('--log-level', default='INFO', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    common.add_argument('--data', help='データセットのルート（既定: 環境変数 DRONEKEY_DATA）')
    common.add_argument('--device', help='cpu / cuda')

    parser = argparse.ArgumentParser(prog='dronekey', description='単眼カメラによるドローン姿勢推定パイプライン')
    commands = parser.add_subparsers(dest='command', required=True)

    gen = commands.add_parser('gen', parents=[common], help='合成データセットを生成')
    gen.add_argument('--preset', choices=sorted(PRESETS))
    gen.add_argument('--workers', type=int)
    gen.add_argument('--dry-run', dest='dry_run', action='store_const', const=True, default=None,
                     help='描画せずにフレーム数だけ計算')

    train_parser = commands.add_parser('train', parents=[common], help='モデルを学習')
    train_parser.add_argument('--epochs', type=int)
    train_parser.add_argument('--batch-size', dest='batch_size', type=int)
    train_parser.add_argument('--lr', type=float)
    train_parser.add_argument('--loss-strategy', dest='loss_strategy',
                              choices=['equal', 'tanh-weighted', 'smoothly-shifted', '3d-biased'])
    train_parser.add_argument('--decoder-variant', dest='decoder_variant', type=int, choices=[1, 2, 3, 4])
    train_parser.add_argument('--class-input', dest='class_input', choices=['soft', 'onehot'])
    _bool_flag(train_parser, 'encoder', 'use_encoder', 'エンコーダを使う（--no-encoder で正解キーポイントを入力）')
    _bool_flag(train_parser, 'positional-encoding', 'positional_encoding', '位置符号化を使う')

    eval_parser = commands.add_parser('eval', parents=[common], help='チェックポイントを評価')
    eval_parser.add_argument('--ckpt', help="チェックポイントのパス、または 'best' / 'last'")
    eval_parser.add_argument('--split')
    eval_parser.add_argument('--measure-fps', dest='measure_fps', action='store_const', const=True, default=None)

    baseline = commands.add_parser('baseline', parents=[common], help='キーポイント + PnP ベースライン')
    baseline.add_argument('--source', choices=['gt', 'encoder'])
    baseline.add_argument('--ckpt')
    baseline.add_argument('--split')

    smooth = commands.add_parser('smooth', parents=[common], help='予測軌跡をガウス平滑化')
    smooth.add_argument('--predictions')
    smooth.add_argument('--sigma', type=float)

    plot = commands.add_parser('plot', parents=[common], help='軌跡・特徴分布の図を出力')
    plot.add_argument('--predictions')
    plot.add_argument('--features', help=f'analyze が出力した {PROJECTION_NAME}')

    analyze = commands.add_parser('analyze', parents=[common], help='データセットの特徴分布を PCA で分析')
    analyze.add_argument('--datasets', help='label=path をカンマ区切りで指定')
    analyze.add_argument('--max-images', dest='max_images', type=int)
    return parser


NON_CONFIG_ARGS = ('command', 'config', 'overrides', 'log_level')


def main(argv: Optional[List[str]] = None) -> int:
    """
    エントリーポイント

    Returns:
        終了コード（成功 0、パイプラインのエラー 1、引数エラーは argparse が 2 で終了）
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT, force=True)
    cli_values = {key: value for key, value in vars(args).items() if key not in NON_CONFIG_ARGS}
    try:
        config = resolve_config(args.command, args.config, cli_values, args.overrides)
        return COMMANDS[args.command](config)
    except DroneKeyError as e:
        logger.debug("コマンドが失敗しました", exc_info=True)
        print(f"エラー: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
