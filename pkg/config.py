import os
import json

BASE_PATH = os.path.dirname(os.path.abspath(__file__))
CONFIG_DIR = os.path.join(BASE_PATH, "configs")


def load_config(name, defaults=None):
    """Load configs/<name>.json merged over defaults; fall back to defaults on any read error."""
    merged = dict(defaults or {})
    config_path = os.path.join(CONFIG_DIR, f"{name}.json")
    try:
        with open(config_path, "r", encoding="utf-8") as f:
            merged.update(json.load(f))
    except Exception:
        pass
    return merged
