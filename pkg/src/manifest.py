"""
Run manifest and failure marker.
The manifest holds the full RunConfig, so a run can be repeated from it alone.
"""
import json
import logging
import os
import platform
from importlib import metadata
from typing import Any, Dict, List, Optional

from src import __version__
from src.config import RunConfig

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
FAILED_NAME = "FAILED"
PACKAGES = ["numpy", "scipy", "pandas", "pydantic", "matplotlib", "click"]


def package_versions() -> Dict[str, str]:
    versions = {"clonemix": __version__, "python": platform.python_version()}
    for name in PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


class RunManifest:
    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        self.path = os.path.join(out_dir, MANIFEST_NAME)

    def write(self, config: RunConfig, outputs: Optional[List[str]] = None, extra: Optional[Dict[str, Any]] = None):
        os.makedirs(self.out_dir, exist_ok=True)
        record = {
            "config": config.model_dump(mode="json"),
            "seed": config.chain.seed,
            "versions": package_versions(),
            "outputs": sorted(os.path.basename(p) for p in outputs or []),
        }
        if extra:
            record.update(extra)
        with open(self.path, "w", encoding="utf-8") as f:
            json.dump(record, f, indent=2, sort_keys=True)
            f.write("\n")
        logger.info("manifest written to %s", self.path)

    @staticmethod
    def load_config(path: str) -> RunConfig:
        with open(path, "r", encoding="utf-8") as f:
            record = json.load(f)
        return RunConfig.model_validate(record["config"])

    def mark_failed(self, error: BaseException):
        os.makedirs(self.out_dir, exist_ok=True)
        with open(os.path.join(self.out_dir, FAILED_NAME), "w", encoding="utf-8") as f:
            f.write(f"{type(error).__name__}: {error}\n")

    def clear_failed(self):
        marker = os.path.join(self.out_dir, FAILED_NAME)
        if os.path.exists(marker):
            os.remove(marker)
