"""
Run directories, trajectory tables, JSON records, binary checkpoints and
content-hashed oracle fixtures.
"""

import hashlib
import json
import logging
import platform
import struct
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Tuple

import numpy as np
import pandas as pd

from app.models.network import ParamStore
from app.models.quantum import SystemSpec, density_to_features, operator_to_features
from app.models.trajectory import TimeGrid, Trajectory
from app.services.metrics import (
    coherence_l1,
    concurrence,
    expectation,
    fidelity_series,
    populations,
    safe_metric,
)
from app.utils.errors import ConfigValidationError, DimensionError
from app.utils.reports import serialize_value
from app.utils.validation import NetworkConfig
from config.settings import config

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"FPNN"
_PREAMBLE = struct.Struct("<4sII")
FLOAT_FORMAT = "%.17g"


class StorageService:
    """Service class for everything written to or read from disk."""

    # run directories

    @staticmethod
    def create_run_dir(path) -> Path:
        """Create a fresh run directory; an existing one is never reused."""
        path = Path(path)
        if path.exists():
            raise ConfigValidationError(f"Output directory {path} already exists; choose a new --out")
        path.mkdir(parents=True)
        return path

    @staticmethod
    def write_metadata(run_dir: Path, seeds: Dict[str, int], deterministic: bool,
                       fixtures: Optional[Dict[str, str]] = None, **extra: Any) -> Path:
        metadata = {
            "tool": config.APP_NAME,
            "tool_version": config.APP_VERSION,
            "numpy_version": np.__version__,
            "pandas_version": pd.__version__,
            "python_version": platform.python_version(),
            "seeds": seeds,
            "deterministic": deterministic,
            "fixtures": fixtures or {},
            **extra,
        }
        return StorageService.write_json(run_dir / "metadata.json", metadata)

    # JSON

    @staticmethod
    def write_json(path, data: Any) -> Path:
        path = Path(path)
        path.write_text(json.dumps(serialize_value(data), indent=2, sort_keys=False) + "\n")
        return path

    @staticmethod
    def read_json(path) -> Any:
        path = Path(path)
        try:
            return json.loads(path.read_text())
        except OSError as e:
            raise ConfigValidationError(f"Cannot read {path}: {e}")
        except json.JSONDecodeError as e:
            raise ConfigValidationError(f"{path}:{e.lineno}:{e.colno}: {e.msg}")

    # trajectory tables

    @staticmethod
    def trajectory_frame(grid: TimeGrid, columns: Dict[str, np.ndarray]) -> pd.DataFrame:
        frame = pd.DataFrame({"t": grid.times})
        for name, values in columns.items():
            values = np.asarray(values, dtype=np.float64)
            if values.shape != (grid.t_f,):
                raise DimensionError(f"Column '{name}' has shape {values.shape}, expected ({grid.t_f},)")
            frame[name] = values
        return frame

    @staticmethod
    def write_table(path, frame: pd.DataFrame, comment: Optional[str] = None) -> Path:
        path = Path(path)
        with path.open("w", newline="") as handle:
            if comment:
                for line in comment.splitlines():
                    handle.write(f"# {line}\n")
            frame.to_csv(handle, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        return path

    @staticmethod
    def read_table(path) -> pd.DataFrame:
        path = Path(path)
        if not path.is_file():
            raise ConfigValidationError(f"Table {path} does not exist")
        return pd.read_csv(path, comment="#")

    @staticmethod
    def operator_columns(traj: Trajectory, layout) -> Dict[str, np.ndarray]:
        features = operator_to_features(traj.values, layout)
        return {name: features[:, i] for i, name in enumerate(layout.names)}

    @staticmethod
    def density_columns(traj: Trajectory, spec: SystemSpec) -> Dict[str, np.ndarray]:
        features = density_to_features(traj.values, spec.rho_layout)
        return {name: features[:, i] for i, name in enumerate(spec.rho_layout.names)}

    @staticmethod
    def derived_columns(traj: Trajectory, spec: SystemSpec,
                        ref: Optional[Trajectory] = None) -> Dict[str, np.ndarray]:
        """Observables, populations, coherence, concurrence and fidelity; NaN where undefined."""
        def series(fn, *args):
            values = [safe_metric(fn, m, *args) for m in traj.values]
            return np.array([np.nan if v is None else v for v in values])

        columns = {name: series(expectation, obs) for name, obs in spec.observables.items()}
        pops = np.array([populations(m) for m in traj.values])
        for i in range(spec.dim):
            columns[f"p_{i + 1}{i + 1}"] = pops[:, i]
        columns["coherence"] = series(coherence_l1)
        if spec.dim == 4:
            columns["concurrence"] = series(concurrence)
        if ref is not None:
            columns["fidelity_vs_ref"] = fidelity_series(traj, ref)
        return columns

    @staticmethod
    def write_operator_tables(run_dir: Path, prefix: str, spec: SystemSpec,
                              O: Trajectory, Q: Trajectory) -> Tuple[Path, Path]:
        o_path = StorageService.write_table(
            run_dir / f"{prefix}_O.csv",
            StorageService.trajectory_frame(O.grid, StorageService.operator_columns(O, spec.o_layout)))
        q_path = StorageService.write_table(
            run_dir / f"{prefix}_Q.csv",
            StorageService.trajectory_frame(Q.grid, StorageService.operator_columns(Q, spec.q_layout)))
        return o_path, q_path

    @staticmethod
    def write_density_tables(run_dir: Path, prefix: str, spec: SystemSpec, rho: Trajectory,
                             ref: Optional[Trajectory] = None) -> Tuple[Path, Path]:
        rho_path = StorageService.write_table(
            run_dir / f"{prefix}_rho.csv",
            StorageService.trajectory_frame(rho.grid, StorageService.density_columns(rho, spec)))
        obs_path = StorageService.write_table(
            run_dir / f"{prefix}_observables.csv",
            StorageService.trajectory_frame(rho.grid, StorageService.derived_columns(rho, spec, ref)))
        return rho_path, obs_path

    @staticmethod
    def losses_frame(history: Iterable) -> pd.DataFrame:
        rows = [item.flat() for item in history]
        if not rows:
            return pd.DataFrame(columns=["epoch", "lr", "l_tot"])
        return pd.DataFrame(rows)

    # checkpoints

    @staticmethod
    def save_checkpoint(path, net_config: NetworkConfig, params: ParamStore,
                        meta: Optional[Dict[str, Any]] = None) -> Path:
        """Preamble (magic, version, header length), JSON header, little-endian f64 payload."""
        path = Path(path)
        header = {
            "network": net_config.model_dump(mode="json"),
            "params": [[group, name, list(shape)] for group, name, shape in params.structure()],
            "meta": serialize_value(meta or {}),
        }
        header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
        payload = [np.ascontiguousarray(a, dtype="<f8").tobytes() for _, a in params.items()]
        with path.open("wb") as handle:
            handle.write(_PREAMBLE.pack(CHECKPOINT_MAGIC, config.CHECKPOINT_VERSION, len(header_bytes)))
            handle.write(header_bytes)
            for chunk in payload:
                handle.write(chunk)
        return path

    @staticmethod
    def load_checkpoint(path) -> Tuple[NetworkConfig, ParamStore, Dict[str, Any]]:
        path = Path(path)
        try:
            blob = path.read_bytes()
        except OSError as e:
            raise ConfigValidationError(f"Cannot read checkpoint {path}: {e}")
        if len(blob) < _PREAMBLE.size:
            raise ConfigValidationError(f"{path} is too short to be a checkpoint")
        magic, version, header_len = _PREAMBLE.unpack_from(blob)
        if magic != CHECKPOINT_MAGIC:
            raise ConfigValidationError(f"{path} is not a checkpoint (bad magic {magic!r})")
        if version != config.CHECKPOINT_VERSION:
            raise ConfigValidationError(
                f"{path} has checkpoint version {version}, expected {config.CHECKPOINT_VERSION}")
        start = _PREAMBLE.size
        header = json.loads(blob[start:start + header_len].decode("utf-8"))
        offset = start + header_len

        groups: Dict[str, Dict[str, np.ndarray]] = {}
        for group, name, shape in header["params"]:
            count = int(np.prod(shape)) if shape else 1
            end = offset + 8 * count
            if end > len(blob):
                raise ConfigValidationError(f"{path} is truncated at parameter '{name}'")
            values = np.frombuffer(blob, dtype="<f8", count=count, offset=offset)
            groups.setdefault(group, {})[name] = values.astype(np.float64).reshape(shape)
            offset = end
        if offset != len(blob):
            raise ConfigValidationError(f"{path} has {len(blob) - offset} trailing bytes")
        return NetworkConfig(**header["network"]), ParamStore(groups), header.get("meta", {})

    # fixtures

    @staticmethod
    def sha256(path) -> str:
        return hashlib.sha256(Path(path).read_bytes()).hexdigest()

    @staticmethod
    def write_fixture(fixture_dir, name: str, frame: pd.DataFrame, command: str) -> Tuple[Path, str]:
        """Write a fixture table and record its hash in index.json."""
        fixture_dir = Path(fixture_dir)
        fixture_dir.mkdir(parents=True, exist_ok=True)
        path = StorageService.write_table(fixture_dir / name, frame, comment=f"generated by: {command}")
        digest = StorageService.sha256(path)
        index_path = fixture_dir / "index.json"
        index = StorageService.read_json(index_path) if index_path.exists() else {}
        index[name] = digest
        StorageService.write_json(index_path, dict(sorted(index.items())))
        return path, digest

    @staticmethod
    def verify_fixture(path) -> str:
        """Hash of a fixture, checked against the index next to it."""
        path = Path(path)
        index_path = path.parent / "index.json"
        if not index_path.exists():
            raise ConfigValidationError(f"No fixture index next to {path}")
        index = StorageService.read_json(index_path)
        if path.name not in index:
            raise ConfigValidationError(f"Fixture {path.name} is not listed in {index_path}")
        digest = StorageService.sha256(path)
        if digest != index[path.name]:
            raise ConfigValidationError(
                f"Fixture {path.name} hash {digest[:12]} does not match index {index[path.name][:12]}")
        return digest

    @staticmethod
    def fixture_name(system: str) -> str:
        return f"{system}_O.csv"

    @staticmethod
    def fixture_references(fixture_dir, system: str) -> Dict[str, str]:
        """Verified hash of the system's fixture, or nothing when none has been generated."""
        path = Path(fixture_dir) / StorageService.fixture_name(system)
        if not path.is_file():
            return {}
        return {path.name: StorageService.verify_fixture(path)}
