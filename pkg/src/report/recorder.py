"""결과 기록 모듈 (JSON/CSV 아티팩트와 manifest)"""
import json
import logging
import os
import platform
from datetime import datetime
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd

logger = logging.getLogger("billiard_thermo")

CODE_VERSION = "0.1.0"


def _to_builtin(obj: Any):
    """json.dump default: numpy/pandas 값을 기본형으로"""
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, pd.DataFrame):
        return obj.to_dict(orient="list")
    return str(obj)


def versions() -> Dict[str, str]:
    import scipy
    import yaml

    return {
        "billiard_thermo": CODE_VERSION,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
        "pyyaml": yaml.__version__,
    }


class ResultRecorder:
    """suite 결과와 판정을 모아 출력 디렉토리에 저장

    JSON 은 키 정렬로 쓰므로 같은 입력이면 같은 바이트가 나온다. 시각은 manifest 에만 남긴다.
    """

    def __init__(self, output_dir: str):
        self.output_dir = output_dir
        self.diagnostics_dir = os.path.join(output_dir, "diagnostics")
        self.cache_dir = os.path.join(output_dir, "cache")
        self.suites: Dict[str, Dict] = {}
        self.artifacts: Dict[str, str] = {}
        os.makedirs(self.diagnostics_dir, exist_ok=True)
        os.makedirs(self.cache_dir, exist_ok=True)

    def path(self, name: str, diagnostics: bool = False) -> str:
        return os.path.join(self.diagnostics_dir if diagnostics else self.output_dir, name)

    def save_json(self, name: str, payload: Dict, diagnostics: bool = False) -> str:
        path = self.path(name, diagnostics)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, ensure_ascii=False, indent=2, sort_keys=True, default=_to_builtin)
            f.write("\n")
        self.artifacts[name] = os.path.relpath(path, self.output_dir)
        logger.info(f"결과 저장: {path}")
        return path

    def save_frame(self, name: str, frame: pd.DataFrame, diagnostics: bool = False) -> str:
        path = self.path(name, diagnostics)
        frame.to_csv(path, index=False, float_format="%.12g")
        self.artifacts[name] = os.path.relpath(path, self.output_dir)
        logger.info(f"결과 저장: {path}")
        return path

    def record_suite(self, suite: str, status: str, seconds: float, error: Optional[str] = None,
                     verdicts: Optional[Dict[str, bool]] = None):
        """suite 상태 기록 (status: ok | failed | error)"""
        entry = {"status": status, "seconds": round(seconds, 3)}
        if error:
            entry["error"] = error
        if verdicts is not None:
            entry["verdicts"] = verdicts
        self.suites[suite] = entry

    def write_manifest(self, config: Dict, seeds: Dict[str, Any], exit_code: int) -> str:
        manifest = {
            "created": datetime.now().isoformat(timespec="seconds"),
            "versions": versions(),
            "config": config,
            "seeds": seeds,
            "suites": self.suites,
            "artifacts": dict(sorted(self.artifacts.items())),
            "exit_code": exit_code,
        }
        return self.save_json("manifest.json", manifest)
