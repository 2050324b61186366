"""
Hash generation utilities for models, configs and runs
Stable identifiers derived from canonical JSON documents
"""

import hashlib
import logging
from typing import Any, Dict

import numpy as np
import orjson

logger = logging.getLogger(__name__)

RUN_ID_LENGTH = 12


def canonical_json(obj: Any) -> bytes:
    """
    Serialize to canonical JSON bytes for hashing

    Args:
        obj: JSON-compatible object, numpy arrays allowed

    Returns:
        UTF-8 JSON with sorted keys and shortest round-trip floats
    """
    return orjson.dumps(obj, option=orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY)


def generate_model_hash(document: Dict[str, Any]) -> str:
    """
    Generate the SHA-256 fingerprint of a model document

    Args:
        document: Versioned model document (see linmdp.model_to_document)

    Returns:
        Hex digest
    """
    return hashlib.sha256(canonical_json(document)).hexdigest()


def generate_config_hash(config: Dict[str, Any], length: int = RUN_ID_LENGTH) -> str:
    """Short hash of a config dictionary"""
    return hashlib.sha256(canonical_json(config)).hexdigest()[:length]


def generate_run_id(config: Dict[str, Any], seed: int) -> str:
    """
    Generate a run identifier from the config and the seed

    Args:
        config: Experiment config as a plain dictionary
        seed: Run seed

    Returns:
        12-character hex id, identical for identical (config, seed)
    """
    payload = canonical_json({"config": config, "seed": int(seed)})
    return hashlib.sha256(payload).hexdigest()[:RUN_ID_LENGTH]


def seed_stream(seed: int, *stream: int) -> np.random.Generator:
    """Independent generator for the (seed, stream...) substream"""
    return np.random.default_rng([int(seed), *[int(s) for s in stream]])
