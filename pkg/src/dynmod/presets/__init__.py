"""Bundled scenario configs, one per reproduced figure group."""

from __future__ import annotations

from importlib import resources
from pathlib import Path


def preset_names() -> list[str]:
    root = resources.files(__name__)
    names = [p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml")]
    # numeric figure order: fig3 before fig12
    return sorted(names, key=lambda n: (int("".join(c for c in n.split("_")[0] if c.isdigit()) or 0), n))


def preset_path(name: str) -> Path:
    if name not in preset_names():
        raise KeyError(f"unknown preset {name!r}; expected one of {preset_names()}")
    return Path(str(resources.files(__name__).joinpath(name + ".yaml")))


def load_preset(name: str, **overrides):
    """Load a preset; keyword overrides replace ScenarioConfig fields."""
    from dataclasses import replace

    from ..config import load_config

    cfg = load_config(preset_path(name))
    return replace(cfg, **overrides) if overrides else cfg
