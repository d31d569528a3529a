"""
실험 프로세스 모니터

magpend CLI 서브커맨드를 하위 프로세스로 실행하고 상태를 추적합니다.
"""

import json
import subprocess
import sys
from datetime import datetime
from pathlib import Path
from typing import Optional, Sequence

PROJECT_ROOT = Path(__file__).resolve().parent.parent.parent
SUBCOMMANDS = ("balance", "sysid", "ilc", "steady-state")


class ExperimentProcessMonitor:
    """magpend 실험 프로세스 실행/중지 및 결과 디렉터리 조회"""

    def __init__(self, output_root="runs", log_file="magpend.log", status_file=".magpend_status.json",
                 python: Optional[str] = None):
        """
        Args:
            output_root: 실행 결과 루트 디렉터리
            log_file: CLI 로그 파일
            status_file: 상태 기록 파일
            python: 인터프리터 경로 (생략 시 현재 인터프리터)
        """
        self.process: Optional[subprocess.Popen] = None
        self.output_root = Path(output_root)
        self.log_file = Path(log_file)
        self.status_file = Path(status_file)
        self.python = python or sys.executable
        self.command: Optional[str] = None
        self.out_dir: Optional[Path] = None
        self._console = None

    def build_command(self, subcommand: str, config=None, seed: Optional[int] = None, out=None,
                      extra_args: Sequence[str] = ()) -> list[str]:
        """
        CLI 인자 목록 생성

        Raises:
            ValueError: 알 수 없는 서브커맨드
        """
        if subcommand not in SUBCOMMANDS:
            raise ValueError(f"알 수 없는 서브커맨드: {subcommand} (가능: {SUBCOMMANDS})")
        argv = [self.python, str(PROJECT_ROOT / "magpend.py"), subcommand]
        if config:
            argv += ["--config", str(config)]
        if seed is not None:
            argv += ["--seed", str(int(seed))]
        argv += ["--out", str(out or self.output_root / subcommand)]
        argv += list(extra_args)
        return argv

    def start_run(self, subcommand: str, config=None, seed: Optional[int] = None, out=None,
                  extra_args: Sequence[str] = ()) -> bool:
        """
        실험 시작 (이미 실행 중이면 False)

        콘솔 출력은 <out>/console.txt 에 기록된다.
        """
        if self.is_running():
            return False

        out = Path(out) if out else self.output_root / subcommand
        try:
            argv = self.build_command(subcommand, config, seed, out, extra_args)
            out.mkdir(parents=True, exist_ok=True)
            self._console = open(out / "console.txt", "w", encoding="utf-8")
            self.process = subprocess.Popen(
                argv,
                stdout=self._console,
                stderr=subprocess.STDOUT,
                text=True,
                cwd=str(PROJECT_ROOT),
            )
            self.command = subcommand
            self.out_dir = out
            self._update_status("RUNNING")
            return True

        except Exception as e:
            self._close_console()
            self._update_status("ERROR", f"시작 실패: {str(e)}")
            return False

    def stop_run(self, force: bool = False) -> bool:
        """
        실행 중인 실험 중지

        Args:
            force: 강제 종료 여부
        """
        if not self.process:
            return True

        try:
            if force:
                self.process.kill()
            else:
                self.process.terminate()

            try:
                self.process.wait(timeout=10)
            except subprocess.TimeoutExpired:
                self.process.kill()
                self.process.wait()

            self._update_status("STOPPED", "사용자 중지")
            self.process = None
            self._close_console()
            return True

        except Exception as e:
            self._update_status("ERROR", f"중지 실패: {str(e)}")
            return False

    def is_running(self) -> bool:
        if not self.process:
            return False
        return self.process.poll() is None

    def get_status(self) -> dict:
        """
        프로세스 상태

        Returns:
            dict: process_running, process_pid, status, command, out_dir, returncode, error, last_update
        """
        returncode = self.process.poll() if self.process else None
        status = {
            "process_running": self.is_running(),
            "process_pid": self.process.pid if self.process else None,
            "status": "IDLE",
            "command": self.command,
            "out_dir": str(self.out_dir) if self.out_dir else None,
            "returncode": returncode,
            "error": None,
            "last_update": None,
        }

        # 종료된 프로세스는 종료 코드로 상태 확정
        if self.process is not None and returncode is not None:
            self._close_console()
            if returncode == 0:
                self._update_status("FINISHED")
            else:
                self._update_status("FAILED", f"종료 코드 {returncode}")

        if self.status_file.exists():
            try:
                with open(self.status_file, 'r', encoding='utf-8') as f:
                    data = json.load(f)
                status["status"] = data.get("status", "IDLE")
                status["error"] = data.get("error")
                status["last_update"] = data.get("timestamp")
                status["command"] = status["command"] or data.get("command")
                status["out_dir"] = status["out_dir"] or data.get("out_dir")
            except Exception:
                pass

        return status

    def get_recent_logs(self, lines: int = 50) -> list[str]:
        """CLI 로그 파일의 최근 lines 줄"""
        if not self.log_file.exists():
            return []

        try:
            with open(self.log_file, 'r', encoding='utf-8') as f:
                return f.readlines()[-lines:]
        except Exception:
            return []

    def list_runs(self) -> list[dict]:
        """
        summary.json 이 있는 실행 디렉터리 목록 (이름순)

        Returns:
            list: {"name", "path", "subcommand"} 딕셔너리
        """
        if not self.output_root.exists():
            return []

        runs = []
        for summary in sorted(self.output_root.rglob("summary.json")):
            try:
                with open(summary, 'r', encoding='utf-8') as f:
                    subcommand = json.load(f).get("subcommand", "unknown")
            except Exception:
                subcommand = "unknown"
            run_dir = summary.parent
            runs.append({
                "name": str(run_dir.relative_to(self.output_root)),
                "path": run_dir,
                "subcommand": subcommand,
            })
        return runs

    def _update_status(self, status: str, error: str = None):
        status_data = {
            "status": status,
            "command": self.command,
            "out_dir": str(self.out_dir) if self.out_dir else None,
            "timestamp": datetime.now().isoformat(),
            "error": error,
        }

        try:
            with open(self.status_file, 'w', encoding='utf-8') as f:
                json.dump(status_data, f, indent=2, ensure_ascii=False)
        except Exception:
            pass

    def _close_console(self):
        if self._console is not None:
            self._console.close()
            self._console = None

    def cleanup(self):
        """리소스 정리"""
        if self.is_running():
            self.stop_run(force=True)
        self._close_console()

    def __del__(self):
        self.cleanup()
