"""
Input validation utilities using Pydantic
"""

import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Literal, Optional, Tuple, get_args

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from app.utils.errors import ConfigValidationError
from config.settings import config

Architecture = Literal["forked", "unified", "separated", "plain"]
SystemName = Literal["spin_boson", "xxz"]
InitialState = Literal["ket0", "ket00", "bell", "custom"]

ARCHITECTURES = get_args(Architecture)
SYSTEM_NAMES = get_args(SystemName)


class StrictModel(BaseModel):
    """Base schema: unknown keys are rejected."""
    model_config = ConfigDict(extra="forbid")


def layer_stacks(architecture: str, width: int = 256) -> Tuple[List[int], List[int]]:
    """(shared, branch) widths with matched capacity: branch and separated layers are half the trunk width."""
    half = max(1, width // 2)
    stacks = {
        "forked": ([width] * 3, [half]),
        "unified": ([width] * 4, []),
        "separated": ([], [half] * 4),
        "plain": ([], [width] * 3),
    }
    if architecture not in stacks:
        raise ConfigValidationError(f"Unknown architecture '{architecture}'")
    return stacks[architecture]


class NetworkConfig(StrictModel):
    """Network architecture validation schema."""
    architecture: Architecture = "forked"
    shared_layers: List[int] = Field(default_factory=lambda: [256, 256, 256])
    branch_layers: List[int] = Field(default_factory=lambda: [128])
    heads: Dict[str, int] = Field(default_factory=dict)
    activation: Literal["silu"] = "silu"
    dropout_rate: float = 0.1
    layer_norm: bool = True
    seed: int = 0

    @field_validator('shared_layers', 'branch_layers')
    @classmethod
    def validate_widths(cls, v):
        if any(w < 1 for w in v):
            raise ValueError('Layer widths must be at least 1')
        return v

    @field_validator('heads')
    @classmethod
    def validate_heads(cls, v):
        if any(n < 1 for n in v.values()):
            raise ValueError('Every head needs at least one output feature')
        return v

    @field_validator('dropout_rate')
    @classmethod
    def validate_dropout(cls, v):
        if not 0.0 <= v < 1.0:
            raise ValueError('Dropout rate must lie in [0, 1)')
        return v

    @model_validator(mode='after')
    def validate_topology(self):
        arch = self.architecture
        if arch == "forked" and not (self.shared_layers and self.branch_layers):
            raise ValueError('Forked networks need shared and branch layers')
        if arch == "unified" and (not self.shared_layers or self.branch_layers):
            raise ValueError('Unified networks have shared layers only')
        if arch == "separated" and (self.shared_layers or not self.branch_layers):
            raise ValueError('Separated networks have branch layers only')
        if arch == "plain" and len(self.heads) > 1:
            raise ValueError('Plain networks have a single head')
        if arch in ("forked", "separated") and len(self.heads) == 1:
            raise ValueError(f'{arch} networks need at least two heads')
        return self

    def with_heads(self, heads: Dict[str, int]) -> "NetworkConfig":
        try:
            return NetworkConfig(**{**self.model_dump(), "heads": dict(heads)})
        except ValidationError as e:
            raise ConfigValidationError(f"{self.architecture} network cannot carry heads "
                                        f"{sorted(heads)}:\n{format_validation_error(e)}")

    @classmethod
    def for_architecture(cls, architecture: str, width: int = 256, **kwargs) -> "NetworkConfig":
        shared, branch = layer_stacks(architecture, width)
        return cls(architecture=architecture, shared_layers=shared, branch_layers=branch, **kwargs)


class TrainConfig(StrictModel):
    """Optimizer, schedule and loss-weight validation schema."""
    eta0: float = 5e-3
    eta_min: float = 1e-5
    T_max: int = 30000
    weight_decay: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    lambda_er: float = 0.01
    lambda_er_rho: Optional[float] = None
    tau: float = Field(default_factory=lambda: config.TV_TAU)
    seed: int = 0
    determinism: bool = True

    @field_validator('T_max')
    @classmethod
    def validate_epochs(cls, v):
        if v < 0:
            raise ValueError('T_max cannot be negative')
        return v

    @field_validator('lambda_er')
    @classmethod
    def validate_lambda_er(cls, v):
        if v < 0:
            raise ValueError('lambda_er cannot be negative')
        return v

    @field_validator('tau')
    @classmethod
    def validate_tau(cls, v):
        if v <= 0:
            raise ValueError('tau must be positive')
        return v

    @field_validator('beta1', 'beta2')
    @classmethod
    def validate_beta(cls, v):
        if not 0.0 <= v < 1.0:
            raise ValueError('Momentum parameters must lie in [0, 1)')
        return v

    @model_validator(mode='after')
    def validate_schedule(self):
        if not 0.0 < self.eta_min <= self.eta0:
            raise ValueError('Learning rates must satisfy 0 < eta_min <= eta0')
        return self

    @property
    def rho_lambda_er(self) -> float:
        return self.lambda_er if self.lambda_er_rho is None else self.lambda_er_rho


class SystemBlock(StrictModel):
    """Benchmark system validation schema."""
    name: SystemName = "spin_boson"
    J: float = 2.0
    Delta: float = 0.5
    Gamma: float = 0.1
    gamma: float = 0.3
    T: float = 20.0
    rho0: InitialState = "ket0"
    rho0_matrix: Optional[List[List[List[float]]]] = None

    @field_validator('Gamma', 'gamma', 'T')
    @classmethod
    def validate_positive(cls, v):
        if v <= 0:
            raise ValueError('Bath parameters must be positive')
        return v

    @model_validator(mode='after')
    def validate_initial_state(self):
        if self.rho0 == "custom" and self.rho0_matrix is None:
            raise ValueError('rho0 "custom" requires rho0_matrix as [[[re, im], ...], ...]')
        if self.rho0 == "ket0" and self.name != "spin_boson":
            raise ValueError('rho0 "ket0" is a single-qubit state')
        if self.rho0 in ("ket00", "bell") and self.name != "xxz":
            raise ValueError(f'rho0 "{self.rho0}" is a two-qubit state')
        return self


class GridBlock(StrictModel):
    """Time grid validation schema."""
    t_f: int = 201
    T_tot: float = 6.0
    substeps: int = Field(default_factory=lambda: config.ORACLE_SUBSTEPS)

    @field_validator('t_f', 'substeps')
    @classmethod
    def validate_counts(cls, v):
        if v < 1:
            raise ValueError('Counts must be at least 1')
        return v

    @field_validator('T_tot')
    @classmethod
    def validate_duration(cls, v):
        if v <= 0:
            raise ValueError('T_tot must be positive')
        return v


class CompareBlock(StrictModel):
    """Architecture comparison validation schema."""
    architectures: List[Architecture] = Field(default_factory=lambda: ["forked", "unified", "separated"])
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2])
    width: int = 256
    lambda_er: Dict[str, float] = Field(default_factory=dict)

    @field_validator('architectures')
    @classmethod
    def validate_architectures(cls, v):
        if not v:
            raise ValueError('At least one architecture is required')
        if "plain" in v:
            raise ValueError('The plain network cannot model two operators')
        return v

    @field_validator('seeds')
    @classmethod
    def validate_seeds(cls, v):
        if not v:
            raise ValueError('At least one seed is required')
        return v

    @field_validator('width')
    @classmethod
    def validate_width(cls, v):
        if v < 2:
            raise ValueError('Comparison width must be at least 2')
        return v

    @field_validator('lambda_er')
    @classmethod
    def validate_lambda_er(cls, v):
        if any(w < 0 for w in v.values()):
            raise ValueError('lambda_er weights cannot be negative')
        return v


class ExperimentConfig(StrictModel):
    """Complete experiment validation schema."""
    system: SystemBlock = Field(default_factory=SystemBlock)
    grid: GridBlock = Field(default_factory=GridBlock)
    network: NetworkConfig = Field(default_factory=NetworkConfig)
    rho_network: NetworkConfig = Field(
        default_factory=lambda: NetworkConfig.for_architecture("plain"))
    train: TrainConfig = Field(default_factory=TrainConfig)
    compare: CompareBlock = Field(default_factory=CompareBlock)
    output_dir: str = Field(default_factory=lambda: config.OUTPUT_DIR)

    @model_validator(mode='after')
    def validate_networks(self):
        if self.network.architecture == "plain":
            raise ValueError('network: the plain network cannot model two operators')
        if self.rho_network.architecture not in ("plain", "unified"):
            raise ValueError('rho_network: the density-matrix network has a single head; use "plain"')
        return self

    @classmethod
    def json_schema(cls) -> Dict[str, Any]:
        return cls.model_json_schema()


# spin-boson forked-network weights by bath frequency
_LAMBDA_ER_BY_GAMMA = {0.3: 0.01, 0.5: 0.01, 1.0: 0.001}


def default_lambda_er(system: str, gamma: float, architecture: str = "forked") -> float:
    """Default evolution-regularization weight for a system/architecture pair."""
    if system == "xxz":
        return 0.1
    if architecture != "forked":
        return 0.01
    for g, weight in _LAMBDA_ER_BY_GAMMA.items():
        if abs(g - gamma) < 1e-9:
            return weight
    return 0.01


# layer widths by profile; the stacks follow each block's architecture
PROFILE_WIDTHS = {"full": 256, "ci": 64}

PROFILES: Dict[str, Dict[str, Any]] = {
    "full": {"train.T_max": 30000},
    "ci": {"train.T_max": 5000, "compare.width": 64},
}

NETWORK_BLOCKS = {"network": "forked", "rho_network": "plain"}


def parse_override(item: str) -> tuple:
    """Split 'a.b=value'; the value is JSON when it parses, a plain string otherwise."""
    if "=" not in item:
        raise ConfigValidationError(f"Override '{item}' must look like key.path=value")
    key, raw = item.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def apply_overrides(data: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    for key, value in overrides.items():
        node = data
        parts = key.split(".")
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigValidationError(f"Override '{key}' descends into a non-object value")
            node = child
        node[parts[-1]] = value
    return data


def format_validation_error(error: ValidationError) -> str:
    lines = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"{location}: {item['msg']}")
    return "\n".join(lines)


def fill_network_blocks(data: Dict[str, Any], width: int) -> Dict[str, Any]:
    """Give each network block the layer stacks of its architecture wherever the config leaves them out."""
    for name, default_architecture in NETWORK_BLOCKS.items():
        block = data.setdefault(name, {})
        if not isinstance(block, dict):
            continue
        architecture = block.setdefault("architecture", default_architecture)
        if architecture not in ARCHITECTURES:
            continue
        shared, branch = layer_stacks(architecture, width)
        block.setdefault("shared_layers", shared)
        block.setdefault("branch_layers", branch)
    return data


def fill_lambda_er(data: Dict[str, Any]) -> Dict[str, Any]:
    """Resolve unset lambda_er from the system, its bath frequency and the architecture."""
    train, compare, system = data.get("train", {}), data.get("compare", {}), data.get("system", {})
    network = data.get("network", {})
    if not all(isinstance(block, dict) for block in (train, compare, system, network)):
        return data
    if "lambda_er" in train:
        return data
    name, gamma = system.get("name", "spin_boson"), system.get("gamma", 0.3)
    if name not in SYSTEM_NAMES or isinstance(gamma, bool) or not isinstance(gamma, (int, float)):
        return data
    architecture = network.get("architecture", "forked")
    if architecture in ARCHITECTURES:
        data.setdefault("train", train)["lambda_er"] = default_lambda_er(name, gamma, architecture)
    architectures = compare.get("architectures", list(CompareBlock().architectures))
    if isinstance(architectures, list) and "lambda_er" not in compare:
        data.setdefault("compare", compare)["lambda_er"] = {
            a: default_lambda_er(name, gamma, a) for a in architectures if a in ARCHITECTURES}
    return data


def build_experiment_config(data: Dict[str, Any], overrides: Iterable[str] = (),
                            profile: Optional[str] = None) -> ExperimentConfig:
    """Validate a raw config dict after applying profile and command-line overrides."""
    data = json.loads(json.dumps(data))
    width = PROFILE_WIDTHS["full"]
    if profile is not None:
        if profile not in PROFILES:
            raise ConfigValidationError(f"Unknown profile '{profile}'; choose from {sorted(PROFILES)}")
        apply_overrides(data, PROFILES[profile])
        width = PROFILE_WIDTHS[profile]
    apply_overrides(data, dict(parse_override(item) for item in overrides))
    fill_network_blocks(data, width)
    fill_lambda_er(data)
    try:
        return ExperimentConfig(**data)
    except ValidationError as e:
        raise ConfigValidationError(f"Validation error:\n{format_validation_error(e)}")


def load_experiment_config(path, overrides: Iterable[str] = (),
                           profile: Optional[str] = None) -> ExperimentConfig:
    """Read, override and validate a JSON experiment config."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigValidationError(f"Cannot read config {path}: {e}")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigValidationError(f"{path}:{e.lineno}:{e.colno}: {e.msg}")
    if not isinstance(data, dict):
        raise ConfigValidationError(f"{path}: top level must be a JSON object")
    return build_experiment_config(data, overrides, profile)
