"""
アプリケーションパッケージ（dronekey コマンド、設定ファイル、図の出力）
"""
