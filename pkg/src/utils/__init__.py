from .logger import setup_logger, configure_logging, LOGGER_NAME
from .helpers import load_config, apply_env_overrides, parse_overrides
