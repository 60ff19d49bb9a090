import logging
import os
from pathlib import Path
from typing import Union

import pandas as pd
import yaml
from dotenv import load_dotenv

from fgts.errors import ConfigError
from fgts.schemas import ExperimentConfig, parse_config

logger = logging.getLogger(__name__)

load_dotenv()

OUTPUT_DIR_VAR = "FGTS_OUTPUT_DIR"

RAW_COLUMNS = ["run_id", "lambda", "t", "regret", "cum_regret"]
AGGREGATE_COLUMNS = ["lambda", "t", "mean_cum_regret", "se", "runs"]


def output_dir(configured: Union[str, Path]) -> Path:
    """The config's output directory unless FGTS_OUTPUT_DIR overrides it."""
    override = os.getenv(OUTPUT_DIR_VAR)
    path = Path(override) if override else Path(configured)
    if override:
        logger.info("📁 output directory overridden by %s: %s", OUTPUT_DIR_VAR, path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"❌ {path} is not valid YAML: {exc}") from None
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"❌ {path}: top level must be a mapping")
    return parse_config(data)


def write_csv(frame: pd.DataFrame, path: Union[str, Path], columns) -> Path:
    path = Path(path)
    frame[columns].to_csv(path, index=False, lineterminator="\n")
    logger.info("✅ wrote %s (%d rows)", path, len(frame))
    return path


def read_csv(path: Union[str, Path]) -> pd.DataFrame:
    return pd.read_csv(path, float_precision="round_trip")
