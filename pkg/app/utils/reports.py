"""
Standard report envelopes printed by every command and stored as report.json
"""

from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
from pydantic import BaseModel


def serialize_value(obj: Any) -> Any:
    """Convert numpy values, models, paths and datetimes to JSON-safe values."""
    if isinstance(obj, datetime):
        return obj.isoformat()
    elif isinstance(obj, Path):
        return str(obj)
    elif isinstance(obj, BaseModel):
        return obj.model_dump(mode="json")
    elif isinstance(obj, np.ndarray):
        return serialize_value(obj.tolist())
    elif isinstance(obj, np.generic):
        return serialize_value(obj.item())
    elif isinstance(obj, complex):
        return [obj.real, obj.imag]
    elif isinstance(obj, float) and not np.isfinite(obj):
        return None
    elif isinstance(obj, dict):
        return {str(key): serialize_value(value) for key, value in obj.items()}
    elif isinstance(obj, (list, tuple)):
        return [serialize_value(item) for item in obj]
    return obj


def success_report(data: Any = None, message: str = "Success") -> Dict[str, Any]:
    """Create a success report."""
    report = {
        "success": True,
        "message": message
    }

    if data is not None:
        report["data"] = serialize_value(data)

    return report


def error_report(message: str = "Error occurred", error_code: Optional[str] = None,
                 exit_code: int = 2) -> Dict[str, Any]:
    """Create an error report."""
    report = {
        "success": False,
        "message": message,
        "exit_code": exit_code
    }

    if error_code:
        report["error_code"] = error_code

    return report
