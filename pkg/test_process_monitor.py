"""
대시보드 프로세스 모니터 테스트

하위 프로세스를 띄우지 않는 범위 (명령 생성, 상태, 로그, 결과 목록)만 검증합니다.
"""

import json
import logging
import sys
import tempfile
from pathlib import Path

from gui.utils.process_monitor import PROJECT_ROOT, SUBCOMMANDS, ExperimentProcessMonitor

logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


def _monitor(tmp: Path) -> ExperimentProcessMonitor:
    return ExperimentProcessMonitor(
        output_root=tmp / "runs",
        log_file=tmp / "magpend.log",
        status_file=tmp / "status.json",
        python="python3",
    )


def test_build_command():
    with tempfile.TemporaryDirectory() as tmp:
        monitor = _monitor(Path(tmp))
        argv = monitor.build_command("ilc", config="magpend.env", seed=3,
                                     extra_args=["--iterations", "2"])
        assert argv[:3] == ["python3", str(PROJECT_ROOT / "magpend.py"), "ilc"]
        assert argv[argv.index("--config") + 1] == "magpend.env"
        assert argv[argv.index("--seed") + 1] == "3"
        assert argv[argv.index("--out") + 1] == str(Path(tmp) / "runs" / "ilc")
        assert argv[-2:] == ["--iterations", "2"]

        plain = monitor.build_command("balance", out="elsewhere")
        assert "--config" not in plain and "--seed" not in plain
        assert plain[plain.index("--out") + 1] == "elsewhere"

        for subcommand in SUBCOMMANDS:
            assert monitor.build_command(subcommand)[2] == subcommand

        try:
            monitor.build_command("trade")
        except ValueError:
            pass
        else:
            raise AssertionError("알 수 없는 서브커맨드 허용됨")


def test_idle_status():
    with tempfile.TemporaryDirectory() as tmp:
        monitor = _monitor(Path(tmp))
        status = monitor.get_status()
        assert status["status"] == "IDLE"
        assert status["process_running"] is False
        assert status["process_pid"] is None
        assert monitor.stop_run() is True


def test_recent_logs():
    with tempfile.TemporaryDirectory() as tmp:
        monitor = _monitor(Path(tmp))
        assert monitor.get_recent_logs() == []
        monitor.log_file.write_text("".join(f"line {i}\n" for i in range(100)), encoding="utf-8")
        logs = monitor.get_recent_logs(lines=5)
        assert logs == [f"line {i}\n" for i in range(95, 100)]


def test_list_runs():
    with tempfile.TemporaryDirectory() as tmp:
        monitor = _monitor(Path(tmp))
        assert monitor.list_runs() == []

        root = Path(tmp) / "runs"
        (root / "balance").mkdir(parents=True)
        (root / "balance" / "summary.json").write_text(json.dumps({"subcommand": "balance"}), encoding="utf-8")
        (root / "sysid" / "seed1").mkdir(parents=True)
        (root / "sysid" / "seed1" / "summary.json").write_text("{broken", encoding="utf-8")
        (root / "empty").mkdir()

        runs = monitor.list_runs()
        logger.info(f"   실행 목록: {[r['name'] for r in runs]}")
        assert [r["name"] for r in runs] == ["balance", str(Path("sysid") / "seed1")]
        assert runs[0]["subcommand"] == "balance"
        assert runs[1]["subcommand"] == "unknown"


def main():
    tests = [
        ("명령 생성", test_build_command),
        ("대기 상태", test_idle_status),
        ("최근 로그", test_recent_logs),
        ("실행 목록", test_list_runs),
    ]

    results = []
    for name, test in tests:
        try:
            test()
            results.append((name, True))
        except Exception as e:
            logger.error(f"❌ {name}: {e}")
            results.append((name, False))

    logger.info("=" * 80)
    for name, passed in results:
        logger.info(f"{'✅ PASS' if passed else '❌ FAIL'}: {name}")
    logger.info("=" * 80)
    return all(passed for _, passed in results)


if __name__ == "__main__":
    sys.exit(0 if main() else 1)
