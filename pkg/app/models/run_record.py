"""
Per-epoch loss records and the summary of one training run
"""

from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field

from app.utils.validation import GridBlock, NetworkConfig, SystemBlock, TrainConfig
from config.settings import config


class LossBreakdown(BaseModel):
    """Loss terms of one epoch, keyed by head."""
    epoch: int
    lr: float
    total: float
    mod: Dict[str, float]
    ini: Dict[str, float]
    er: Dict[str, float]

    def parts_sum(self) -> float:
        return sum(self.mod.values()) + sum(self.ini.values()) + sum(self.er.values())

    def flat(self) -> Dict[str, float]:
        """One row for the losses table."""
        row: Dict[str, Any] = {"epoch": self.epoch, "lr": self.lr, "l_tot": self.total}
        for kind in ("mod", "ini", "er"):
            for head, value in getattr(self, kind).items():
                row[f"l_{kind}_{head.lower()}"] = value
        return row


class RunRecord(BaseModel):
    """Everything needed to reproduce and audit a run."""
    phase: Literal["operators", "rho"]
    system: Optional[SystemBlock] = None
    grid: GridBlock
    network: NetworkConfig
    train: TrainConfig
    variant: str = "ER"
    history: List[LossBreakdown] = Field(default_factory=list)
    checkpoint: Optional[str] = None
    wall_time: float = 0.0
    loss_normalization: str = "mean over grid points"
    tool_version: str = Field(default_factory=lambda: config.APP_VERSION)
    results: Dict[str, Any] = Field(default_factory=dict)

    @property
    def epochs_executed(self) -> int:
        return len(self.history)

    @property
    def final(self) -> Optional[LossBreakdown]:
        return self.history[-1] if self.history else None
