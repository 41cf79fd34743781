"""
Multilayer networks from scalar time to per-head feature vectors.

A network is a trunk of hidden blocks shared by all heads followed by one
branch per head (hidden blocks plus a linear output layer). The architecture
tag decides which parameter group each layer belongs to:

    forked     trunk -> "shared", each branch -> its head
    unified    everything -> "shared" (heads split only at the output layer)
    separated  no trunk, each branch -> its head (disjoint networks)
    plain      single head, everything -> that head

Hidden block: linear -> SiLU -> dropout -> layer norm.
"""

from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from app.autodiff.layers import Dual, dropout_dual, layer_norm_dual, linear_dual, silu_dual
from app.autodiff.tape import Tape, Tensor
from app.utils.errors import DimensionError, NumericalError
from app.utils.validation import NetworkConfig


class ParamStore:
    """Named parameter arrays partitioned into disjoint groups."""

    def __init__(self, groups: Dict[str, Dict[str, np.ndarray]]):
        self._groups = groups
        self._owner = {}
        for group, params in groups.items():
            for name in params:
                if name in self._owner:
                    raise DimensionError(f"Parameter '{name}' appears in two groups")
                self._owner[name] = group

    @property
    def group_names(self) -> List[str]:
        return list(self._groups)

    def group(self, name: str) -> Dict[str, np.ndarray]:
        return self._groups[name]

    def group_of(self, param: str) -> str:
        return self._owner[param]

    def items(self) -> Iterator[Tuple[str, np.ndarray]]:
        for params in self._groups.values():
            yield from params.items()

    def __getitem__(self, name: str) -> np.ndarray:
        return self._groups[self._owner[name]][name]

    def vector(self, group: str) -> np.ndarray:
        """The group as one flat real array."""
        arrays = [a.ravel() for a in self._groups[group].values()]
        return np.concatenate(arrays) if arrays else np.zeros(0)

    def count(self) -> int:
        return sum(a.size for _, a in self.items())

    def copy(self) -> "ParamStore":
        return ParamStore({g: {n: a.copy() for n, a in p.items()} for g, p in self._groups.items()})

    def zeros_like(self) -> "ParamStore":
        return ParamStore({g: {n: np.zeros_like(a) for n, a in p.items()} for g, p in self._groups.items()})

    def bind(self, tape: Tape) -> Dict[str, Tensor]:
        """Register every parameter as a tape variable."""
        return {name: tape.variable(array) for name, array in self.items()}

    def structure(self) -> List[Tuple[str, str, Tuple[int, ...]]]:
        return [(self._owner[name], name, a.shape) for name, a in self.items()]


@dataclass(frozen=True)
class ForwardMode:
    """Evaluation (dropout off) or training with per-epoch frozen dropout masks."""
    train: bool = False
    epoch_seed: Optional[int] = None

    @classmethod
    def training(cls, epoch_seed: int) -> "ForwardMode":
        return cls(train=True, epoch_seed=epoch_seed)


EVAL = ForwardMode()


@dataclass
class EvalOutput:
    """Features and their exact time derivatives, one (N, n_out) array per head."""
    features: Dict[str, np.ndarray]
    dfeatures_dt: Dict[str, np.ndarray]


@dataclass(frozen=True)
class _Block:
    name: str
    fan_in: int
    fan_out: int
    hidden: bool


class Network:
    """Layer plan for one architecture; parameters live in a separate ParamStore."""

    def __init__(self, config: NetworkConfig):
        if not config.heads:
            raise DimensionError("Network config has no output heads")
        self.config = config
        self.heads = dict(config.heads)
        self.trunk: List[_Block] = []
        self.branches: Dict[str, List[_Block]] = {}

        width = 1
        for i, w in enumerate(config.shared_layers):
            self.trunk.append(_Block(f"trunk.{i}", width, w, True))
            width = w
        for head, n_out in self.heads.items():
            blocks, w_in = [], width
            for i, w in enumerate(config.branch_layers):
                blocks.append(_Block(f"{head}.{i}", w_in, w, True))
                w_in = w
            blocks.append(_Block(f"{head}.out", w_in, n_out, False))
            self.branches[head] = blocks

    @property
    def architecture(self) -> str:
        return self.config.architecture

    def group_for(self, head: Optional[str]) -> str:
        arch = self.config.architecture
        if arch == "unified" or (arch == "forked" and head is None):
            return "shared"
        if head is None:
            return next(iter(self.heads))
        return head

    def blocks(self) -> Iterator[Tuple[str, _Block]]:
        for block in self.trunk:
            yield self.group_for(None), block
        for head, blocks in self.branches.items():
            for block in blocks:
                yield self.group_for(head), block

    def init_params(self) -> ParamStore:
        """Seeded uniform initialization with limit 1/sqrt(fan_in); layer norm starts at identity."""
        rng = np.random.default_rng(self.config.seed)
        groups: Dict[str, Dict[str, np.ndarray]] = {}
        for group, block in self.blocks():
            params = groups.setdefault(group, {})
            limit = 1.0 / np.sqrt(block.fan_in)
            params[f"{block.name}.weight"] = rng.uniform(-limit, limit, (block.fan_in, block.fan_out))
            params[f"{block.name}.bias"] = rng.uniform(-limit, limit, block.fan_out)
            if block.hidden and self.config.layer_norm:
                params[f"{block.name}.ln_gain"] = np.ones(block.fan_out)
                params[f"{block.name}.ln_bias"] = np.zeros(block.fan_out)
        return ParamStore(groups)

    def _dropout_masks(self, mode: ForwardMode, n_points: int) -> Dict[str, np.ndarray]:
        rate = self.config.dropout_rate
        if not mode.train or rate == 0.0:
            return {}
        if mode.epoch_seed is None:
            raise DimensionError("Training mode needs an epoch seed")
        rng = np.random.default_rng(mode.epoch_seed)
        masks = {}
        for _, block in self.blocks():
            if block.hidden:
                masks[block.name] = rng.random((n_points, block.fan_out)) >= rate
        return masks

    def _apply(self, block: _Block, x: Dual, bound: Dict[str, Tensor], masks) -> Dual:
        x = linear_dual(x, bound[f"{block.name}.weight"], bound[f"{block.name}.bias"])
        if block.hidden:
            x = silu_dual(x)
            if block.name in masks:
                x = dropout_dual(x, masks[block.name], self.config.dropout_rate)
            if self.config.layer_norm:
                x = layer_norm_dual(x, bound[f"{block.name}.ln_gain"], bound[f"{block.name}.ln_bias"])
        if not x.is_finite():
            raise NumericalError(f"Non-finite activations after layer '{block.name}'")
        return x

    def forward_dual(self, bound: Dict[str, Tensor], times, mode: ForwardMode, tape: Tape) -> Dict[str, Dual]:
        """Features and d(features)/dt for every head, recorded on `tape`."""
        t = np.asarray(times, dtype=np.float64).reshape(-1, 1)
        if not np.isfinite(t).all():
            raise NumericalError("Non-finite time input")
        masks = self._dropout_masks(mode, t.shape[0])
        x = Dual(tape.constant(t), tape.constant(np.ones_like(t)))
        for block in self.trunk:
            x = self._apply(block, x, bound, masks)
        out = {}
        for head, blocks in self.branches.items():
            y = x
            for block in blocks:
                y = self._apply(block, y, bound, masks)
            out[head] = y
        return out


def build_network(config: NetworkConfig) -> Tuple[ParamStore, Network]:
    net = Network(config)
    return net.init_params(), net


def forward(net: Network, params: ParamStore, t, mode: ForwardMode = EVAL) -> EvalOutput:
    """Plain-array evaluation of features and their time derivatives."""
    tape = Tape()
    duals = net.forward_dual(params.bind(tape), t, mode, tape)
    return EvalOutput(
        features={h: d.value.data.copy() for h, d in duals.items()},
        dfeatures_dt={h: d.tangent.data.copy() for h, d in duals.items()},
    )


def backward(tape: Tape, loss: Tensor, bound: Dict[str, Tensor], params: ParamStore) -> ParamStore:
    """Reverse-accumulate a scalar loss into a ParamStore-shaped set of gradients."""
    names = [name for name, _ in params.items()]
    grads = tape.backward(loss, [bound[name] for name in names])
    by_name = dict(zip(names, grads))
    return ParamStore({g: {n: by_name[n] for n in params.group(g)} for g in params.group_names})
