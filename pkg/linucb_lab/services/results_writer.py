"""
Persistence for configs, episode records, aggregates and run metadata
"""

import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Union

import orjson
import pandas as pd
from pydantic import ValidationError

from linucb_lab.core.exceptions import SchemaError
from linucb_lab.models.records import (
    AGGREGATE_CSV_COLUMNS,
    EPISODE_CSV_COLUMNS,
    TRIAL_CSV_COLUMNS,
    EpisodeRecord,
    TrialOutcome,
)
from linucb_lab.schemas.experiment import CONFIG_VERSION, ExperimentConfig

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _prepare(path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _to_csv(frame: pd.DataFrame, path: PathLike) -> Path:
    path = _prepare(path)
    frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
    return path


# === CONFIG ===

def parse_config(data: Dict[str, Any]) -> ExperimentConfig:
    """
    Validate a config dictionary

    Raises:
        SchemaError: naming the first offending field
    """
    if not isinstance(data, dict):
        raise SchemaError("Config must be a JSON object")
    if "version" in data and data["version"] != CONFIG_VERSION:
        raise SchemaError(f"Unsupported config version {data['version']!r} (expected {CONFIG_VERSION})",
                          field="version")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        loc = ".".join(str(part) for part in first.get("loc", ())) or "<root>"
        raise SchemaError(f"Invalid config field '{loc}': {first.get('msg')}", field=loc) from e


def read_config(path: PathLike) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise SchemaError(f"Config file not found: {path}", field="path")
    try:
        data = orjson.loads(path.read_bytes())
    except orjson.JSONDecodeError as e:
        raise SchemaError(f"Config is not valid JSON: {e}") from e
    return parse_config(data)


def write_config(cfg: ExperimentConfig, path: PathLike) -> Path:
    path = _prepare(path)
    path.write_bytes(orjson.dumps(cfg.model_dump(mode="json"), option=orjson.OPT_INDENT_2))
    return path


# === RECORDS ===

def records_frame(records: Sequence[EpisodeRecord]) -> pd.DataFrame:
    """Episode records as a DataFrame with the episode CSV columns"""
    return pd.DataFrame([r.csv_row() for r in records], columns=EPISODE_CSV_COLUMNS)


def write_csv(records: Sequence[EpisodeRecord], path: PathLike) -> Path:
    """Episode CSV; an empty record list gives a header-only file"""
    path = _to_csv(records_frame(records), path)
    logger.info(f"Wrote {len(records)} episode records to {path}")
    return path


def read_csv(path: PathLike) -> pd.DataFrame:
    return pd.read_csv(path)


def write_jsonl(records: Iterable[Any], path: PathLike) -> Path:
    """One JSON object per line; records may be dataclasses with to_dict() or dicts"""
    path = _prepare(path)
    with open(path, "wb") as fh:
        for record in records:
            payload = record.to_dict() if hasattr(record, "to_dict") else record
            fh.write(orjson.dumps(payload, option=orjson.OPT_SERIALIZE_NUMPY))
            fh.write(b"\n")
    return path


def read_jsonl(path: PathLike) -> List[Dict[str, Any]]:
    with open(path, "rb") as fh:
        return [orjson.loads(line) for line in fh if line.strip()]


def write_aggregate_csv(frame: pd.DataFrame, path: PathLike) -> Path:
    return _to_csv(frame[AGGREGATE_CSV_COLUMNS], path)


def write_trials_csv(outcomes: Sequence[TrialOutcome], path: PathLike) -> Path:
    frame = pd.DataFrame([[o.trial_id, o.violated, o.tightness, o.argmax_t] for o in outcomes],
                         columns=TRIAL_CSV_COLUMNS)
    return _to_csv(frame, path)


def write_metadata(metadata: Dict[str, Any], path: PathLike) -> Path:
    path = _prepare(path)
    path.write_bytes(orjson.dumps(metadata, option=orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY
                                  | orjson.OPT_NON_STR_KEYS))
    return path


def read_metadata(path: PathLike) -> Dict[str, Any]:
    return orjson.loads(Path(path).read_bytes())


# === PLOT DATA ===

PLOT_TABLE_COLUMNS = ["agent", "k", "stat", "value"]


def plot_table(paths: Sequence[PathLike], labels: Sequence[str] = ()) -> pd.DataFrame:
    """
    Reshape aggregate CSVs into one long table (agent, k, stat, value)

    Series are named by `labels` when given, else by the file stem.
    """
    labels = list(labels)
    if labels and len(labels) != len(paths):
        raise SchemaError(f"Got {len(labels)} labels for {len(paths)} aggregate files", field="labels")
    frames = []
    for i, path in enumerate(paths):
        frame = pd.read_csv(path)
        missing = [c for c in AGGREGATE_CSV_COLUMNS if c not in frame.columns]
        if missing:
            raise SchemaError(f"{path} is not an aggregate CSV (missing {', '.join(missing)})", field=missing[0])
        frame = frame[AGGREGATE_CSV_COLUMNS].copy()
        frame.insert(0, "agent", labels[i] if labels else Path(path).stem)
        frames.append(frame.melt(id_vars=["agent", "k"], var_name="stat", value_name="value"))
    if not frames:
        return pd.DataFrame(columns=PLOT_TABLE_COLUMNS)
    return pd.concat(frames, ignore_index=True)[PLOT_TABLE_COLUMNS]


def write_plot_table(frame: pd.DataFrame, path: PathLike) -> Path:
    return _to_csv(frame[PLOT_TABLE_COLUMNS], path)
