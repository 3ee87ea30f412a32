#!/usr/bin/env python3
"""
billiard-thermo: 유한 지평 Sinai 당구의 열역학 형식 수치 실험

사용법:
  python -m src.main run --config config/config.yaml            # 모든 suite
  python -m src.main run --suite geometry --threads 4           # suite 선택
  python -m src.main run --seed 7 --t_grid="[0.8, 1.0, 1.2]"    # key=value 덮어쓰기
  python -m src.main validate --config config/config.yaml       # 설정/당구대 검증만
  python -m src.main clean --out ./results                      # 캐시 삭제

종료 코드: 0 정상, 1 수치 판정 실패, 2 설정 오류, 3 내부 오류
"""
import argparse
import json
import os
import sys

# 프로젝트 루트를 path에 추가
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from experiments.runner import (
    EXIT_CONFIG, EXIT_INTERNAL, EXIT_OK, ExperimentConfig, ExperimentRunner, clean,
)
from src.geometry.table import load_table_config, pairwise_gaps
from src.geometry.validation import validate_table
from src.utils.errors import ConfigError, InvalidTableError
from src.utils.helpers import apply_env_overrides, load_config, parse_overrides
from src.utils.logger import configure_logging


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="billiard-thermo",
        description="Sinai 당구 충돌 사상의 압력, 평형 측도, 통계 검증",
    )
    parser.add_argument("command", choices=["run", "validate", "clean"], help="실행할 명령")
    parser.add_argument("--config", default="config/config.yaml", help="설정 파일 경로")
    parser.add_argument("--suite", default=None,
                        help="geometry | complexity | spectrum | statistics | all (쉼표로 여러 개)")
    parser.add_argument("--threads", type=int, default=None, help="병렬 스레드 상한")
    parser.add_argument("--seed", type=int, default=None, help="64비트 시드")
    parser.add_argument("--out", default=None, help="결과 출력 디렉토리")
    return parser


def resolve_config(args: argparse.Namespace, extra) -> ExperimentConfig:
    """YAML < .env < CLI 플래그 순서로 합친 뒤 검증"""
    try:
        raw = load_config(args.config)
    except FileNotFoundError:
        raise ConfigError("config", f"파일 없음: {args.config}")
    except Exception as e:
        raise ConfigError("config", f"YAML 파싱 실패: {e}")
    experiment = dict(raw.get("experiment", {}) or {})
    experiment = apply_env_overrides(experiment)
    try:
        experiment.update(parse_overrides(extra))
    except ValueError as e:
        raise ConfigError("overrides", str(e))
    if args.suite:
        experiment["suites"] = [s.strip() for s in args.suite.split(",")]
    if args.threads is not None:
        experiment["threads"] = args.threads
    if args.seed is not None:
        experiment["seed"] = args.seed
    if args.out:
        experiment["output_dir"] = args.out
    return ExperimentConfig.from_dict(experiment)


def main(argv=None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)

    raw_logging = {}
    if os.path.exists(args.config):
        try:
            raw_logging = load_config(args.config).get("logging", {}) or {}
        except Exception:
            raw_logging = {}
    # 설정 확정 전에는 콘솔만
    logger = configure_logging({"level": raw_logging.get("level", "INFO")})

    try:
        config = resolve_config(args, extra)
    except ConfigError as e:
        logger.error(f"❌ {e}")
        return EXIT_CONFIG

    logger = configure_logging(raw_logging, config.output_dir)

    if args.command == "clean":
        clean(config)
        return EXIT_OK

    try:
        table = load_table_config(config.table, horizon_bound=config.horizon_bound)
        if pairwise_gaps(table, config.horizon_bound).min() <= 0:
            raise InvalidTableError(f"산란체가 겹침: {config.table}")
    except FileNotFoundError:
        logger.error(f"❌ 설정 오류 [table]: 파일 없음: {config.table}")
        return EXIT_CONFIG
    except (ConfigError, InvalidTableError) as e:
        logger.error(f"❌ {e}")
        return EXIT_CONFIG

    if args.command == "validate":
        report = validate_table(table, config.direction_samples, config.horizon_bound)
        print(json.dumps(report.to_dict(), ensure_ascii=False, indent=2, sort_keys=True))
        return EXIT_OK

    logger.info("🚀 billiard-thermo 시작")
    logger.info(f"  당구대: {config.table} (Λ = {table.Lambda:.4f})")
    logger.info(f"  t 격자: {config.t_grid}")
    try:
        return ExperimentRunner(config, table).run()
    except Exception as e:
        logger.error(f"❌ 내부 오류: {e!r}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
