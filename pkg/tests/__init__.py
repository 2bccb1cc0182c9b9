"""
テストパッケージ
共有の合成データセットは tests/fixtures.py が一時ディレクトリに生成する
"""
