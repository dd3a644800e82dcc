import os
import sys
import logging
import logging.handlers
import structlog
from dataclasses import dataclass
from dotenv import load_dotenv

SOLVER_METHODS = ("direct", "cg")


def configure_logging(log_dir: str = "logs", quiet: bool = False):
    """Configures structlog for the command-line tool.

    JSON lines go to a rotating file under ``log_dir``; warnings and errors are
    echoed to stderr unless ``quiet`` is set.
    """
    os.makedirs(log_dir, exist_ok=True)
    logging.basicConfig(
        format="%(message)s",
        handlers=[],  # Do not add default console handler
        level=logging.INFO,
    )
    structlog.configure(
        processors=[
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            structlog.stdlib.ProcessorFormatter.wrap_for_formatter,
        ],
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )
    file_formatter = structlog.stdlib.ProcessorFormatter(
        processor=structlog.processors.JSONRenderer(),
        fmt="%(message)s",
    )
    file_handler = logging.handlers.RotatingFileHandler(
        os.path.join(log_dir, "harmcanon.log"),
        maxBytes=10 * 1024 * 1024,  # 10 MB
        backupCount=5,
    )
    file_handler.setFormatter(file_formatter)
    file_handler.setLevel(logging.INFO)

    root_logger = logging.getLogger()
    for handler in list(root_logger.handlers):
        root_logger.removeHandler(handler)
    root_logger.addHandler(file_handler)

    if not quiet:
        console_formatter = structlog.stdlib.ProcessorFormatter(
            processor=structlog.dev.ConsoleRenderer(colors=False),
            fmt="%(message)s",
        )
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setFormatter(console_formatter)
        console_handler.setLevel(logging.WARNING)
        root_logger.addHandler(console_handler)

    root_logger.setLevel(logging.INFO)


@dataclass(frozen=True)
class Config:
    """Numerical and runtime settings, loaded from environment variables."""
    solver_tol: float = 1e-10
    solver_method: str = "direct"
    max_iterations: int = 20000
    log_dir: str = "logs"


def load_config() -> Config:
    """Loads all configuration from environment variables.

    Every variable is optional. Raises ValueError if a variable is set to a value
    that cannot be used.
    """
    load_dotenv()

    tol_str = os.environ.get("HARMCANON_SOLVER_TOL", "1e-10")
    method = os.environ.get("HARMCANON_SOLVER", "direct").strip().lower()
    max_iter_str = os.environ.get("HARMCANON_MAX_ITER", "20000")
    log_dir = os.environ.get("HARMCANON_LOG_DIR", "logs")

    try:
        solver_tol = float(tol_str)
    except ValueError:
        raise ValueError(
            f"Configuration error: HARMCANON_SOLVER_TOL must be a number, but got '{tol_str}'."
        )
    if not 0.0 < solver_tol < 1.0:
        raise ValueError(
            f"Configuration error: HARMCANON_SOLVER_TOL must lie in (0, 1), but got '{tol_str}'."
        )

    if method not in SOLVER_METHODS:
        raise ValueError(
            f"Configuration error: HARMCANON_SOLVER must be one of {', '.join(SOLVER_METHODS)}, but got '{method}'."
        )

    try:
        max_iterations = int(max_iter_str)
    except ValueError:
        raise ValueError(
            f"Configuration error: HARMCANON_MAX_ITER must be an integer, but got '{max_iter_str}'."
        )
    if max_iterations < 1:
        raise ValueError(
            f"Configuration error: HARMCANON_MAX_ITER must be positive, but got '{max_iter_str}'."
        )

    return Config(
        solver_tol=solver_tol,
        solver_method=method,
        max_iterations=max_iterations,
        log_dir=log_dir,
    )
