from dataclasses import fields, is_dataclass
from typing import Dict, Any

import numpy as np


def _plain(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if is_dataclass(value) and not isinstance(value, type):
        return {f.name: _plain(getattr(value, f.name)) for f in fields(value)}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    return value


class RecordMixin:
    """Common serialization helpers for result dataclasses"""

    def to_dict(self) -> Dict[str, Any]:
        """Convert record to a dictionary of plain Python values"""
        return {f.name: _plain(getattr(self, f.name)) for f in fields(self)}

    @classmethod
    def field_names(cls) -> list:
        """Declared field names, in order"""
        return [f.name for f in fields(cls)]
