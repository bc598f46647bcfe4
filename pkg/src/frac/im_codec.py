"""Index-modulation codec: message bits <-> per-pulse transmit selections.

Each pulse carries a fixed-length word split into four groups, in order:

    [carrier-set bits][antenna-set bits][pairing bits][PSK bits]

The carrier-set group selects K of M sub-carriers through the lexicographic
rank of the sorted subset; the antenna-set group does the same for K of P
transmit elements; the pairing group is the Lehmer rank of the permutation
assigning carriers to antennas; each of the K PSK groups is the index of a
J-ary phase.  Group widths are floor(log2 C(M,K)), floor(log2 C(P,K)),
floor(log2 K!) and K*log2(J), so some subsets/permutations are unreachable
whenever the counts are not powers of two.

Unranking is arithmetic (no tables), so large M and P cost O(K log M) work.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .config import ConfigError, SystemConfig

__all__ = [
    "PulseSelection",
    "MappingTable",
    "comb_rank",
    "comb_unrank",
    "perm_rank",
    "perm_unrank",
    "encode",
    "decode",
    "random_selection_sequence",
    "selection_arrays",
]


@dataclass(frozen=True)
class PulseSelection:
    """Transmit choice for one pulse.

    ``carriers[k]`` is the sub-carrier index radiated from element
    ``antennas[k]`` with phase ``phases[k]`` (radians); the pairing order
    is what carries the permutation bits.  ``antennas`` is kept sorted.
    """

    carriers: tuple[int, ...]
    antennas: tuple[int, ...]
    phases: tuple[float, ...]

    def __post_init__(self) -> None:
        k = len(self.carriers)
        if len(self.antennas) != k or len(self.phases) != k:
            raise ValueError("carriers, antennas and phases must have equal length")
        if len(set(self.carriers)) != k or len(set(self.antennas)) != k:
            raise ValueError("carrier and antenna indices must be distinct")

    def xi(self, cfg: SystemConfig) -> np.ndarray:
        """Carrier-dependent frequency ratios (f_c + m * delta_f) / f_c."""
        m = np.asarray(self.carriers, dtype=float)
        return (cfg.f_c + m * cfg.delta_f) / cfg.f_c


# ----------------------------------------------------------------------
# combinatorial (un)ranking
# ----------------------------------------------------------------------

def comb_rank(subset: tuple[int, ...], n: int) -> int:
    """Lexicographic rank of a sorted k-subset of range(n)."""
    k = len(subset)
    if list(subset) != sorted(set(subset)):
        raise ValueError(f"subset must be sorted and distinct, got {subset}")
    if subset and not (0 <= subset[0] and subset[-1] < n):
        raise ValueError(f"subset {subset} out of range(0, {n})")
    rank = 0
    prev = -1
    for i, c in enumerate(subset):
        for x in range(prev + 1, c):
            rank += math.comb(n - x - 1, k - i - 1)
        prev = c
    return rank

def comb_unrank(rank: int, n: int, k: int) -> tuple[int, ...]:
    """Inverse of :func:`comb_rank`: the rank-th k-subset of range(n)."""
    total = math.comb(n, k)
    if not 0 <= rank < total:
        raise ValueError(f"rank {rank} out of range for C({n},{k})={total}")
    out = []
    x = 0
    r = rank
    for i in range(k):
        while True:
            block = math.comb(n - x - 1, k - i - 1)
            if r < block:
                out.append(x)
                x += 1
                break
            r -= block
            x += 1
    return tuple(out)

def perm_rank(perm: tuple[int, ...]) -> int:
    """Lehmer (lexicographic) rank of a permutation of range(k)."""
    k = len(perm)
    if sorted(perm) != list(range(k)):
        raise ValueError(f"not a permutation of range({k}): {perm}")
    rank = 0
    for i in range(k):
        smaller = sum(1 for j in range(i + 1, k) if perm[j] < perm[i])
        rank += smaller * math.factorial(k - 1 - i)
    return rank

def perm_unrank(rank: int, k: int) -> tuple[int, ...]:
    """Inverse of :func:`perm_rank`: the rank-th permutation of range(k)."""
    total = math.factorial(k)
    if not 0 <= rank < total:
        raise ValueError(f"rank {rank} out of range for {k}! = {total}")
    pool = list(range(k))
    out = []
    r = rank
    for i in range(k):
        f = math.factorial(k - 1 - i)
        idx, r = divmod(r, f)
        out.append(pool.pop(idx))
    return tuple(out)


# ----------------------------------------------------------------------
# explicit mapping-table override
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class MappingTable:
    """Explicit word -> selection table overriding the arithmetic codec.

    The table must be a bijection over all 2**n_total_bits words; decode is
    reverse lookup.  File format (JSON)::

        {"bits_per_word": 3,
         "entries": {"110": {"carriers": [1], "antennas": [1], "pm_indices": [0]}}}
    """

    bits_per_word: int
    entries: dict = field(repr=False)

    def __post_init__(self) -> None:
        expected = 1 << self.bits_per_word
        if len(self.entries) != expected:
            raise ConfigError(
                f"mapping table has {len(self.entries)} entries, needs {expected}"
            )
        seen = set()
        for word, sel in self.entries.items():
            if len(word) != self.bits_per_word or set(word) - {"0", "1"}:
                raise ConfigError(f"bad word {word!r} in mapping table")
            key = (sel.carriers, sel.antennas, sel.phases)
            if key in seen:
                raise ConfigError(f"mapping table is not injective at word {word!r}")
            seen.add(key)

    @classmethod
    def load(cls, path, cfg: SystemConfig) -> "MappingTable":
        with open(path) as fh:
            raw = json.load(fh)
        nbits = int(raw["bits_per_word"])
        if nbits != cfg.n_total_bits:
            raise ConfigError(
                f"mapping table carries {nbits} bits/word, config carries "
                f"{cfg.n_total_bits}"
            )
        entries = {}
        for word, spec in raw["entries"].items():
            pm = [int(j) for j in spec["pm_indices"]]
            if any(not 0 <= j < cfg.J for j in pm):
                raise ConfigError(f"PM index out of range in word {word!r}")
            sel = PulseSelection(
                carriers=tuple(int(m) for m in spec["carriers"]),
                antennas=tuple(int(p) for p in spec["antennas"]),
                phases=tuple(2.0 * math.pi * j / cfg.J for j in pm),
            )
            _check_selection(sel, cfg)
            entries[word] = sel
        return cls(bits_per_word=nbits, entries=entries)

    def encode(self, bits: str) -> PulseSelection:
        try:
            return self.entries[bits]
        except KeyError:
            raise ValueError(f"word {bits!r} not in mapping table") from None

    def decode(self, sel: PulseSelection) -> str:
        for word, cand in self.entries.items():
            if (
                cand.carriers == sel.carriers
                and cand.antennas == sel.antennas
                and np.allclose(cand.phases, sel.phases, atol=1e-12)
            ):
                return word
        raise ValueError(f"selection {sel} not present in mapping table")


def _check_selection(sel: PulseSelection, cfg: SystemConfig) -> None:
    if len(sel.carriers) != cfg.K:
        raise ValueError(f"selection has {len(sel.carriers)} entries, K={cfg.K}")
    if any(not 0 <= m < cfg.M for m in sel.carriers):
        raise ValueError(f"carrier index out of range(0, {cfg.M}): {sel.carriers}")
    if any(not 0 <= p < cfg.P for p in sel.antennas):
        raise ValueError(f"antenna index out of range(0, {cfg.P}): {sel.antennas}")


# ----------------------------------------------------------------------
# arithmetic codec
# ----------------------------------------------------------------------

def _split_word(bits: str, cfg: SystemConfig) -> tuple[int, int, int, list[int]]:
    if len(bits) != cfg.n_total_bits or set(bits) - {"0", "1"}:
        raise ValueError(
            f"expected a {cfg.n_total_bits}-bit binary word, got {bits!r}"
        )
    n_car = math.comb(cfg.M, cfg.K).bit_length() - 1
    n_ant = math.comb(cfg.P, cfg.K).bit_length() - 1
    n_perm = math.factorial(cfg.K).bit_length() - 1
    j_bits = cfg.J.bit_length() - 1
    pos = 0

    def take(width: int) -> int:
        nonlocal pos
        val = int(bits[pos:pos + width], 2) if width else 0
        pos += width
        return val

    car_rank = take(n_car)
    ant_rank = take(n_ant)
    perm_rank_ = take(n_perm)
    pm = [take(j_bits) for _ in range(cfg.K)]
    return car_rank, ant_rank, perm_rank_, pm

def encode(bits: str, cfg: SystemConfig, mapping: MappingTable | None = None) -> PulseSelection:
    """Map one n_total_bits word to a transmit selection."""
    if mapping is not None:
        return mapping.encode(bits)
    car_rank, ant_rank, prank, pm = _split_word(bits, cfg)
    carriers_sorted = comb_unrank(car_rank, cfg.M, cfg.K)
    antennas = comb_unrank(ant_rank, cfg.P, cfg.K)
    pi = perm_unrank(prank, cfg.K)
    carriers = tuple(carriers_sorted[pi[k]] for k in range(cfg.K))
    phases = tuple(2.0 * math.pi * j / cfg.J for j in pm)
    return PulseSelection(carriers=carriers, antennas=antennas, phases=phases)

def decode(sel: PulseSelection, cfg: SystemConfig, mapping: MappingTable | None = None) -> str:
    """Inverse of :func:`encode`; raises ValueError for unreachable selections."""
    if mapping is not None:
        return mapping.decode(sel)
    _check_selection(sel, cfg)
    n_car = math.comb(cfg.M, cfg.K).bit_length() - 1
    n_ant = math.comb(cfg.P, cfg.K).bit_length() - 1
    n_perm = math.factorial(cfg.K).bit_length() - 1
    j_bits = cfg.J.bit_length() - 1

    carriers_sorted = tuple(sorted(sel.carriers))
    car_rank = comb_rank(carriers_sorted, cfg.M)
    ant_rank = comb_rank(sel.antennas, cfg.P)
    pi = tuple(carriers_sorted.index(m) for m in sel.carriers)
    prank = perm_rank(pi)
    pm = []
    for phi in sel.phases:
        j = int(round(phi * cfg.J / (2.0 * math.pi))) % cfg.J
        if abs(phi - 2.0 * math.pi * j / cfg.J) > 1e-9:
            raise ValueError(f"phase {phi!r} is not on the {cfg.J}-PSK grid")
        pm.append(j)

    for name, val, width in (
        ("carrier set", car_rank, n_car),
        ("antenna set", ant_rank, n_ant),
        ("pairing", prank, n_perm),
    ):
        if val >= (1 << width):
            raise ValueError(
                f"{name} rank {val} is unreachable with {width} bits"
            )
    word = (
        format(car_rank, f"0{n_car}b") if n_car else ""
    ) + (
        format(ant_rank, f"0{n_ant}b") if n_ant else ""
    ) + (
        format(prank, f"0{n_perm}b") if n_perm else ""
    )
    for j in pm:
        word += format(j, f"0{j_bits}b") if j_bits else ""
    return word


# ----------------------------------------------------------------------
# random draws
# ----------------------------------------------------------------------

def random_selection_sequence(
    cfg: SystemConfig,
    rng: np.random.Generator,
    n_pulses: int | None = None,
    encodable_only: bool = False,
) -> list[PulseSelection]:
    """Draw one selection per pulse for a CPI.

    By default every K-subset, pairing and phase is equally likely, i.e. the
    radar sees the full selection space including combinations the codec
    cannot reach.  With ``encodable_only=True`` draws are restricted to the
    2**n_total_bits encodable words (uniform over those), which is what a
    live link transmitting uniform random bits produces.
    """
    n = cfg.N if n_pulses is None else int(n_pulses)
    out = []
    if encodable_only:
        for _ in range(n):
            word = "".join("01"[b] for b in rng.integers(0, 2, cfg.n_total_bits))
            out.append(encode(word, cfg))
        return out
    for _ in range(n):
        carriers_sorted = sorted(int(m) for m in rng.choice(cfg.M, size=cfg.K, replace=False))
        antennas = tuple(sorted(int(p) for p in rng.choice(cfg.P, size=cfg.K, replace=False)))
        pi = rng.permutation(cfg.K)
        carriers = tuple(carriers_sorted[pi[k]] for k in range(cfg.K))
        phases = tuple(2.0 * math.pi * int(j) / cfg.J for j in rng.integers(0, cfg.J, cfg.K))
        out.append(PulseSelection(carriers=carriers, antennas=antennas, phases=phases))
    return out

def selection_arrays(selections: list[PulseSelection]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack a CPI's selections into (N, K) index/phase arrays."""
    m_idx = np.array([s.carriers for s in selections], dtype=np.int64)
    p_idx = np.array([s.antennas for s in selections], dtype=np.int64)
    phases = np.array([s.phases for s in selections], dtype=float)
    return m_idx, p_idx, phases
