"""유틸리티 헬퍼 함수"""
import os
from typing import Any, Dict, Iterable, List

import yaml
from dotenv import load_dotenv

ENV_OVERRIDES = {
    "BILLIARD_THERMO_SEED": "seed",
    "BILLIARD_THERMO_THREADS": "threads",
    "BILLIARD_THERMO_OUT": "output_dir",
}


def load_config(config_path: str = "config/config.yaml") -> Dict[str, Any]:
    """설정 파일 로드"""
    with open(config_path, "r", encoding="utf-8") as f:
        return yaml.safe_load(f) or {}


def apply_env_overrides(config: Dict[str, Any]) -> Dict[str, Any]:
    """.env / 환경변수 값으로 설정 덮어쓰기"""
    load_dotenv()
    merged = dict(config)
    for env_key, config_key in ENV_OVERRIDES.items():
        value = os.getenv(env_key)
        if value is not None and value != "":
            merged[config_key] = yaml.safe_load(value)
    return merged


def parse_overrides(items: Iterable[str]) -> Dict[str, Any]:
    """`key=value` 목록을 dict로 변환 (값은 YAML 문법으로 파싱)"""
    overrides = {}
    for item in items:
        if "=" not in item:
            raise ValueError(f"key=value 형식이 아님: {item}")
        key, raw = item.split("=", 1)
        overrides[key.strip().lstrip("-").replace("-", "_")] = yaml.safe_load(raw)
    return overrides


def linspace_grid(start: float, stop: float, count: int) -> List[float]:
    """t 격자 생성 (반올림으로 float 잡음 제거)"""
    if count < 2:
        return [round(float(start), 12)]
    step = (stop - start) / (count - 1)
    return [round(start + i * step, 12) for i in range(count)]
