"""Index map between named variable blocks and flat MLCP positions."""

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .case import MarketCase

Z_BLOCKS = ("d", "g", "lambda", "mu1", "mu2", "p", "kr", "s", "rho", "upsilon", "ks", "ell")
PI_BLOCKS = ("theta_d", "theta_x", "theta_k", "omega", "alpha", "y", "gamma", "eta", "psi")
FORWARD_BLOCK = "beta"


@dataclass(frozen=True)
class Block:
    name: str
    keys: tuple[tuple, ...]
    start: int
    _positions: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        positions = {key: offset for offset, key in enumerate(self.keys)}
        if len(positions) != len(self.keys):
            raise ValueError(f"block {self.name} has duplicate keys")
        object.__setattr__(self, "_positions", positions)

    @property
    def stop(self) -> int:
        return self.start + len(self.keys)

    @property
    def slice(self) -> slice:
        return slice(self.start, self.stop)

    def __len__(self) -> int:
        return len(self.keys)

    def __contains__(self, key) -> bool:
        return key in self._positions

    def index(self, key: tuple) -> int:
        return self.start + self._positions[key]


def _stack(blocks: Iterable[tuple[str, Sequence[tuple]]]) -> dict[str, Block]:
    stacked: dict[str, Block] = {}
    start = 0
    for name, keys in blocks:
        if name in stacked:
            raise ValueError(f"duplicate block {name}")
        block = Block(name=name, keys=tuple(keys), start=start)
        stacked[name] = block
        start = block.stop
    return stacked


class BlockLayout:
    """Ordered nonnegative blocks (z) and free blocks (pi)."""

    def __init__(self, z_blocks: Sequence[tuple[str, Sequence[tuple]]], pi_blocks: Sequence[tuple[str, Sequence[tuple]]]):
        self.z_blocks = _stack(z_blocks)
        self.pi_blocks = _stack(pi_blocks)
        self.n_z = sum(len(block) for block in self.z_blocks.values())
        self.n_pi = sum(len(block) for block in self.pi_blocks.values())

    def z(self, name: str, key: tuple) -> int:
        return self.z_blocks[name].index(key)

    def pi(self, name: str, key: tuple) -> int:
        return self.pi_blocks[name].index(key)

    def z_slice(self, name: str) -> slice:
        return self.z_blocks[name].slice

    def pi_slice(self, name: str) -> slice:
        return self.pi_blocks[name].slice

    def with_z_block(self, name: str, keys: Sequence[tuple]) -> "BlockLayout":
        """New layout with one more nonnegative block appended after the existing ones."""
        z = [(block.name, block.keys) for block in self.z_blocks.values()] + [(name, tuple(keys))]
        pi = [(block.name, block.keys) for block in self.pi_blocks.values()]
        return BlockLayout(z, pi)

    def z_label(self, index: int) -> str:
        return _label(self.z_blocks, index)

    def pi_label(self, index: int) -> str:
        return _label(self.pi_blocks, index)

    def sizes(self) -> dict[str, int]:
        sizes = {name: len(block) for name, block in self.z_blocks.items()}
        sizes.update({name: len(block) for name, block in self.pi_blocks.items()})
        return sizes

    def __eq__(self, other) -> bool:
        if not isinstance(other, BlockLayout):
            return NotImplemented
        return self.z_blocks == other.z_blocks and self.pi_blocks == other.pi_blocks

    def __repr__(self) -> str:
        return f"BlockLayout(n_z={self.n_z}, n_pi={self.n_pi})"


def _label(blocks: dict[str, Block], index: int) -> str:
    for block in blocks.values():
        if block.start <= index < block.stop:
            key = block.keys[index - block.start]
            return f"{block.name}[{','.join(str(part) for part in key)}]"
    raise IndexError(index)


def build_layout(case: MarketCase) -> BlockLayout:
    """Layout for the five-agent market.

    Blocks follow the fixed order of Z_BLOCKS / PI_BLOCKS; keys inside a block
    are ordered by batch, generator (bus, id), buyer bus, then period.
    Generator keys are (bus, id) pairs. Contract blocks only hold the
    (generator, buyer) pairs allowed by the buyer's supplier list.
    """
    periods = range(case.periods)
    sorted_gens = case.sorted_generators
    gens = [gen.key for gen in sorted_gens]
    buses = sorted(case.network.bus_ids)
    loads = sorted(case.load_buses)
    mdcs = sorted(case.mdc_buses)
    hubs = sorted(case.hyperscaler_buses)
    buyers = sorted(case.buyer_buses)
    batches = [batch.id for batch in case.batches]
    lines = range(len(case.network.lines))

    admissible = []
    for b in batches:
        for i in mdcs:
            if b in case.mdc(i).admissible_batches:
                admissible.extend((b, i, t) for t in periods)

    def per_gen(buyer_set):
        return [(*gen.key, i, t) for gen in sorted_gens for i in buyer_set if case.sells_to(gen, i) for t in periods]

    ell = [(b, *key) for b in batches for key in per_gen(hubs)]

    z_blocks = [
        ("d", per_gen(loads)),
        ("g", per_gen(buyers)),
        ("lambda", [(j, h, t) for (j, h) in gens for t in periods]),
        ("mu1", [(k, t) for k in lines for t in periods]),
        ("mu2", [(k, t) for k in lines for t in periods]),
        ("p", per_gen(mdcs)),
        ("kr", admissible),
        ("s", [(i, t) for i in mdcs for t in periods]),
        ("rho", [(i, t) for i in mdcs for t in periods]),
        ("upsilon", [(i, t) for i in mdcs for t in periods]),
        ("ks", admissible),
        ("ell", ell),
    ]
    pi_blocks = [
        ("theta_d", per_gen(loads)),
        ("theta_x", per_gen(mdcs)),
        ("theta_k", per_gen(hubs)),
        ("omega", [(i, t) for i in buses for t in periods]),
        ("alpha", admissible),
        ("y", [(i, t) for i in buses for t in periods]),
        ("gamma", [(t,) for t in periods]),
        ("eta", [(i, t) for i in mdcs for t in periods]),
        ("psi", [(b, t) for b in batches for t in periods]),
    ]
    return BlockLayout(z_blocks, pi_blocks)
