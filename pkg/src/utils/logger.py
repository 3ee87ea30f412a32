"""로깅 설정 모듈

모든 모듈이 logging.getLogger("billiard_thermo") 를 공유한다.
설정은 config.yaml 의 logging 절에서 온다:

  logging:
    level: INFO
    file: run.log        # 상대 경로면 실험 출력 디렉토리 아래
"""
import logging
import os
from typing import Dict, Optional

LOGGER_NAME = "billiard_thermo"
LOG_FORMAT = "[%(asctime)s] %(levelname)s %(name)s: %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"


def _is_console(handler: logging.Handler) -> bool:
    return isinstance(handler, logging.StreamHandler) and not isinstance(handler, logging.FileHandler)


def setup_logger(name: str = LOGGER_NAME, level: str = "INFO", log_file: str = None) -> logging.Logger:
    """로거 설정 및 반환

    여러 번 불러도 콘솔 핸들러는 하나. 로그 파일이 바뀌면 이전 파일 핸들러를 닫고 교체한다.
    """
    logger = logging.getLogger(name)
    logger.setLevel(getattr(logging, str(level).upper(), logging.INFO))
    formatter = logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT)

    # 콘솔 핸들러
    if not any(_is_console(h) for h in logger.handlers):
        console = logging.StreamHandler()
        console.setFormatter(formatter)
        logger.addHandler(console)

    # 파일 핸들러
    target = os.path.abspath(log_file) if log_file else None
    for handler in [h for h in logger.handlers if isinstance(h, logging.FileHandler)]:
        if handler.baseFilename == target:
            return logger
        logger.removeHandler(handler)
        handler.close()
    if target:
        os.makedirs(os.path.dirname(target), exist_ok=True)
        file_handler = logging.FileHandler(target, encoding="utf-8")
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    return logger


def configure_logging(section: Optional[Dict] = None, output_dir: Optional[str] = None) -> logging.Logger:
    """logging 절 적용. 상대 경로 로그 파일은 output_dir 기준"""
    section = section or {}
    log_file = section.get("file")
    if log_file and output_dir and not os.path.isabs(log_file):
        log_file = os.path.join(output_dir, log_file)
    return setup_logger(level=section.get("level", "INFO"), log_file=log_file)
