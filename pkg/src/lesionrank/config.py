"""Evaluation settings. Every default reproduces the challenge settings, so no file is needed."""

import logging
from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from lesionrank.errors import ConfigError

logger = logging.getLogger(__name__)

# Corner-to-corner distance of the 240x240x155 1 mm atlas grid, rounded.
ATLAS_DIAGONAL_MM = 374.0


class EvalConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    dilation_iterations: int = Field(3, ge=0, description="3x3x3 dilation passes defining a GT lesion's catchment")
    connectivity: Literal[6, 26] = Field(26, description="neighborhood for connected components")
    min_lesion_voxels: int = Field(50, ge=0, description="components below this size are dropped")
    missing_region_hd95_mm: float = Field(ATLAS_DIAGONAL_MM, ge=0, description="HD95 when exactly one side lacks the region")
    unmatched_lesion_hd95_mm: float = Field(ATLAS_DIAGONAL_MM, ge=0, description="HD95 charged per FN or FP lesion")
    hd_percentile: float = Field(0.95, ge=0, le=1, description="surface-distance quantile")
    filter_pred_components: bool = Field(True, description="apply the size cutoff to prediction components too")


def load_config(path: Optional[Path] = None) -> EvalConfig:
    """Read a flat `key: value` YAML file. No path means the built-in defaults."""
    if path is None:
        return EvalConfig()
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config: {e.strerror or e}", path=str(path)) from e
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"malformed config: {e}", path=str(path)) from e
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a flat mapping of key: value pairs", path=str(path))
    nested = [k for k, v in data.items() if isinstance(v, (dict, list))]
    if nested:
        raise ConfigError(f"config must be flat; nested values under {', '.join(map(str, nested))}", path=str(path))
    try:
        cfg = EvalConfig(**data)
    except ValidationError as e:
        problems = "; ".join(f"{'.'.join(map(str, err['loc']))}: {err['msg']}" for err in e.errors())
        raise ConfigError(f"invalid config: {problems}", path=str(path)) from e
    logger.info("loaded eval config from %s", path)
    return cfg


def dump_config(cfg: EvalConfig, path: Optional[Path] = None) -> str:
    """Render cfg as flat YAML; also write it when a path is given."""
    text = yaml.safe_dump(cfg.model_dump(), sort_keys=False)
    if path is not None:
        try:
            Path(path).write_text(text, encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot write config: {e.strerror or e}", path=str(path)) from e
    return text
