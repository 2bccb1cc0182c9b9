"""
コマンドラインアプリケーションのテスト
"""
import contextlib
import filecmp
import io
import os
import sys
import unittest

import numpy as np
import pandas as pd

# プロジェクトルートをパスに追加
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.analysis.smoothing import PoseTrack  # noqa: E402
from src.app.main import list_prediction_files, main, read_prediction_file, write_track  # noqa: E402
from src.interfaces.exceptions import ConfigurationError, PredictionParseError  # noqa: E402
from tests.fixtures import micro_dataset, scratch_dir  # noqa: E402

QUIET = ['--log-level', 'ERROR']


def _run(argv):
    """main を実行して (終了コード, 標準出力) を返す"""
    buffer = io.StringIO()
    with contextlib.redirect_stdout(buffer), contextlib.redirect_stderr(io.StringIO()):
        code = main(argv + QUIET)
    return code, buffer.getvalue()


def _write_text(path: str, text: str) -> str:
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        f.write(text)
    return path


def _moving_track(n: int = 12) -> PoseTrack:
    frames = np.arange(n)
    rotations = np.c_[0.1 + 0.01 * frames, np.full(n, 0.5), np.full(n, 0.95)]
    translations = np.c_[0.02 * frames, np.zeros(n), 1.0 + 0.01 * frames]
    return PoseTrack(rotations % 1.0, translations)


class TestPredictionFiles(unittest.TestCase):
    """予測ファイルの読み込みのテストクラス"""

    HEADER = 'frame,rx,ry,rz,tx,ty,tz\n'

    def setUp(self):
        """テスト前の準備"""
        self.root = scratch_dir('predictions')

    def _file(self, body: str, name: str = 'track.csv') -> str:
        return _write_text(os.path.join(self.root, name), body)

    def test_read_valid(self):
        """正しい予測ファイルの読み込みテスト"""
        path = write_track(_moving_track(), os.path.join(self.root, 'ok.csv'))
        frame = read_prediction_file(path)
        self.assertEqual(len(frame), 12)
        self.assertEqual(frame['frame'].tolist(), list(range(12)))

    def test_bad_value_line_number(self):
        """数値でない値の行番号テスト"""
        path = self._file(self.HEADER + '0,0.1,0.2,0.3,0,0,1\n1,0.1,abc,0.3,0,0,1\n')
        with self.assertRaises(PredictionParseError) as context:
            read_prediction_file(path)
        self.assertEqual(context.exception.line, 3)

    def test_bad_header(self):
        """ヘッダー不正の行番号テスト"""
        path = self._file('frame,a,b,c,d,e,f\n0,0,0,0,0,0,1\n')
        with self.assertRaises(PredictionParseError) as context:
            read_prediction_file(path)
        self.assertEqual(context.exception.line, 1)

    def test_frame_gap(self):
        """フレーム番号の欠落の行番号テスト"""
        rows = ''.join(f'{k},0.1,0.2,0.3,0,0,1\n' for k in (0, 1, 3))
        path = self._file(self.HEADER + rows)
        with self.assertRaises(PredictionParseError) as context:
            read_prediction_file(path)
        self.assertEqual(context.exception.line, 4)

    def test_empty_and_missing(self):
        """データ行が無い・ファイルが無い場合のテスト"""
        with self.assertRaises(PredictionParseError):
            read_prediction_file(self._file(self.HEADER, 'empty.csv'))
        with self.assertRaises(PredictionParseError):
            read_prediction_file(os.path.join(self.root, 'missing.csv'))

    def test_list_files(self):
        """ディレクトリ配下の CSV の列挙テスト"""
        write_track(_moving_track(), os.path.join(self.root, 'b', 'x.csv'))
        write_track(_moving_track(), os.path.join(self.root, 'a', 'y.csv'))
        files = list_prediction_files(self.root)
        self.assertEqual([os.path.relpath(f, self.root) for f in files],
                         [os.path.join('a', 'y.csv'), os.path.join('b', 'x.csv')])
        with self.assertRaises(ConfigurationError):
            list_prediction_files(os.path.join(self.root, 'nowhere'))


class TestCommands(unittest.TestCase):
    """サブコマンドのテストクラス"""

    def setUp(self):
        """テスト前の準備"""
        self.data = micro_dataset()
        self.out = scratch_dir('cli')

    def test_gen_dry_run(self):
        """table2 プリセットの件数表示テスト"""
        code, output = _run(['gen', '--preset', 'table2', '--dry-run'])
        self.assertEqual(code, 0)
        self.assertIn('総フレーム数: 52920', output)
        self.assertIn('シーケンス数: 91', output)
        self.assertIn('preset = table2', output)

    def test_gen(self):
        """データセット生成と既存ディレクトリの拒否テスト"""
        target = os.path.join(self.out, 'desk')
        code, output = _run(['gen', '--preset', 'desk', '--out', target])
        self.assertEqual(code, 0)
        self.assertIn('総フレーム数: 120', output)
        self.assertTrue(os.path.isfile(os.path.join(target, 'effective_config.txt')))
        code, _ = _run(['gen', '--preset', 'desk', '--out', target])
        self.assertEqual(code, 1)

    def test_train_eval_baseline(self):
        """学習・評価・ベースラインを続けて実行するテスト"""
        common = ['--data', self.data, '--out', self.out]
        code, _ = _run(['train', *common, '--epochs', '1', '--batch-size', '4', '--lr', '1e-4'])
        self.assertEqual(code, 0)
        self.assertTrue(os.path.isfile(os.path.join(self.out, 'checkpoints', 'best.pt')))
        self.assertTrue(os.path.isfile(os.path.join(self.out, 'train_log.jsonl')))

        code, output = _run(['eval', *common, '--ckpt', 'best', '--split', 'test'])
        self.assertEqual(code, 0)
        self.assertIn('Average', output)
        report_dir = os.path.join(self.out, 'eval_test')
        self.assertTrue(os.path.isfile(os.path.join(report_dir, 'report.csv')))
        self.assertTrue(os.path.isfile(os.path.join(report_dir, 'effective_config.txt')))
        self.assertEqual(len(list_prediction_files(os.path.join(report_dir, 'predictions'))), 2)

        code, _ = _run(['baseline', *common, '--source', 'gt', '--split', 'valid'])
        self.assertEqual(code, 0)
        report = pd.read_csv(os.path.join(self.out, 'baseline_gt_valid', 'per_sample_errors.csv'))
        self.assertLess(report['rot_err_deg'].max(), 0.01)

    def test_eval_missing_checkpoint(self):
        """チェックポイントが無い場合に終了コード1になるテスト"""
        code, _ = _run(['eval', '--data', self.data, '--out', self.out, '--ckpt', 'last'])
        self.assertEqual(code, 1)

    def test_smooth_constant_track_is_unchanged(self):
        """一定値のトラックを平滑化してもファイルが変わらないテスト"""
        track = PoseTrack(np.tile([0.3, 0.7, 0.05], (20, 1)), np.tile([0.1, -0.2, 1.5], (20, 1)))
        source = write_track(track, os.path.join(self.out, 'in', 'constant.csv'))
        code, _ = _run(['smooth', '--predictions', source, '--out', self.out, '--sigma', '2'])
        self.assertEqual(code, 0)
        smoothed = os.path.join(self.out, 'smoothed', 'constant.csv')
        self.assertTrue(filecmp.cmp(source, smoothed, shallow=False))

    def test_smooth_directory_keeps_layout(self):
        """ディレクトリ指定時に相対パスを保って書き出すテスト"""
        source = os.path.join(self.out, 'predictions')
        write_track(_moving_track(), os.path.join(source, '06', 'Tello', 'bg00.csv'))
        code, _ = _run(['smooth', '--predictions', source, '--out', self.out])
        self.assertEqual(code, 0)
        smoothed = read_prediction_file(os.path.join(self.out, 'smoothed', '06', 'Tello', 'bg00.csv'))
        self.assertEqual(len(smoothed), 12)

    def test_smooth_bad_file(self):
        """書式エラーのファイルで終了コード1になるテスト"""
        source = _write_text(os.path.join(self.out, 'bad.csv'), 'frame,rx\n0,0.1\n')
        code, _ = _run(['smooth', '--predictions', source, '--out', self.out])
        self.assertEqual(code, 1)
        code, _ = _run(['smooth', '--out', self.out])
        self.assertEqual(code, 1)

    def test_plot_and_analyze(self):
        """軌跡の図・特徴分析・散布図の出力テスト"""
        source = os.path.join(self.out, 'tracks')
        write_track(_moving_track(), os.path.join(source, 'a.csv'))
        write_track(_moving_track(8), os.path.join(source, 'b.csv'))
        code, _ = _run(['plot', '--predictions', source, '--out', self.out])
        self.assertEqual(code, 0)
        self.assertTrue(os.path.isfile(os.path.join(self.out, 'plots', 'a.png')))
        self.assertTrue(os.path.isfile(os.path.join(self.out, 'plots', 'b.png')))

        code, output = _run(['analyze', '--datasets', f'first={self.data},second={self.data}',
                             '--max-images', '10', '--out', self.out])
        self.assertEqual(code, 0)
        self.assertIn('PC1', output)
        projection = pd.read_csv(os.path.join(self.out, 'pca_projection.csv'))
        self.assertEqual(len(projection), 20)
        self.assertEqual(sorted(projection['label'].unique()), ['first', 'second'])
        summary = pd.read_csv(os.path.join(self.out, 'pca_summary.csv'))
        self.assertEqual(summary['component'].tolist(), ['pc1', 'pc2'])

        code, _ = _run(['plot', '--features', os.path.join(self.out, 'pca_projection.csv'), '--out', self.out])
        self.assertEqual(code, 0)
        self.assertTrue(os.path.isfile(os.path.join(self.out, 'plots', 'feature_pca.png')))

    def test_plot_requires_input(self):
        """入力を指定しない plot のテスト"""
        code, _ = _run(['plot', '--out', self.out])
        self.assertEqual(code, 1)

    def test_argument_errors(self):
        """引数エラーで argparse が終了コード2で終了するテスト"""
        with contextlib.redirect_stderr(io.StringIO()):
            with self.assertRaises(SystemExit) as context:
                main(['train', '--epochs', 'many'])
        self.assertEqual(context.exception.code, 2)
        with contextlib.redirect_stderr(io.StringIO()):
            with self.assertRaises(SystemExit):
                main(['render'])

    def test_unknown_override(self):
        """未知の --set キーで終了コード1になるテスト"""
        code, _ = _run(['gen', '--dry-run', '--set', 'colour=red'])
        self.assertEqual(code, 1)


if __name__ == '__main__':
    unittest.main()
