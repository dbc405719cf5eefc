import os
from pathlib import Path
from typing import Any, Dict, Optional

import yaml

DEFAULT_CONFIG_PATH = Path(__file__).resolve().parent.parent / "config.yaml"


class Config:
    def __init__(self, config_path: Optional[str] = None):
        explicit = config_path or os.getenv("CONFBAND_CONFIG")
        self.config_path = Path(explicit) if explicit else DEFAULT_CONFIG_PATH
        self._config = self._load_config(required=explicit is not None)

    def _load_config(self, required: bool) -> Dict[str, Any]:
        if not self.config_path.exists():
            if required:
                raise FileNotFoundError(f"Config file not found: {self.config_path}")
            return {}
        with open(self.config_path, "r", encoding="utf-8") as f:
            return yaml.safe_load(f) or {}

    def get(self, key: str, default: Any = None) -> Any:
        keys = key.split(".")
        value = self._config
        for k in keys:
            if isinstance(value, dict):
                value = value.get(k)
            else:
                return default
        return value if value is not None else default


config = Config()
