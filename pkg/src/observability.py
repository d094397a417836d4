import json
import logging
from enum import Enum
from typing import Any, Dict, Optional

logger = logging.getLogger("clonemix.telemetry")

LOG_FORMAT = "[%(asctime)s] %(levelname)s: %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"


class SamplerStage(str, Enum):
    INIT = "INIT"
    BURN_IN = "BURN_IN"
    SAMPLING = "SAMPLING"
    RJ_MOVE = "RJ_MOVE"
    SUMMARIZE = "SUMMARIZE"
    EMIT = "EMIT"
    IDLE = "IDLE"


def configure_logging(level: str = "INFO", log_file: Optional[str] = None) -> None:
    """Console handler always; file handler when a path is given. Safe to call twice."""
    root = logging.getLogger()
    root.setLevel(level.upper())
    for handler in list(root.handlers):
        if getattr(handler, "_clonemix", False):
            root.removeHandler(handler)
    formatter = logging.Formatter(LOG_FORMAT, DATE_FORMAT)
    handlers = [logging.StreamHandler()]
    if log_file:
        handlers.append(logging.FileHandler(log_file, mode="a"))
    for handler in handlers:
        handler.setFormatter(formatter)
        handler._clonemix = True
        root.addHandler(handler)


class SamplerTelemetry:
    @staticmethod
    def emit(stage: SamplerStage, chain_id: int, details: Dict[str, Any],
             metrics: Optional[Dict[str, Any]] = None, level: int = logging.INFO):
        """
        Logs one structured event. No timestamps in the payload: the log formatter adds
        them, and payloads stay comparable across reruns.
        """
        if not logger.isEnabledFor(level):
            return
        payload = {"stage": stage.value, "chain": chain_id, "details": details}
        if metrics is not None:
            payload["metrics"] = metrics
        logger.log(level, "[%s] chain %d | %s", stage.value, chain_id, json.dumps(payload, default=str, sort_keys=True))
