"""Delay-Doppler grid, vectorization and pilot/guard/data placement.

Cells are ``(m, n)`` pairs, ``m`` the delay bin and ``n`` the Doppler bin,
both zero-based. Flat indices follow column-major order, ``m + n * M``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class LayoutError(ValueError):
    """Raised when a placement does not fit the grid or breaks an invariant."""


class Scheme(str, enum.Enum):
    IMPULSE_FULL_GRID = "impulse"
    EMBEDDED = "embedded"


class Allocation(str, enum.Enum):
    PARTITIONED = "partitioned"
    SHARED = "shared"


@dataclass(frozen=True)
class GridDims:
    M: int
    N: int
    delta_f: float = 15e3

    def __post_init__(self):
        if int(self.M) < 1 or int(self.N) < 1:
            raise ValueError(f"grid needs M, N >= 1, got {self.M}x{self.N}")
        if self.delta_f <= 0:
            raise ValueError("delta_f must be positive")

    @property
    def T(self) -> float:
        return 1.0 / self.delta_f

    @property
    def MN(self) -> int:
        return self.M * self.N

    @property
    def delay_resolution(self) -> float:
        return 1.0 / (self.M * self.delta_f)

    @property
    def doppler_resolution(self) -> float:
        return 1.0 / (self.N * self.T)

    def flat(self, m: int, n: int) -> int:
        return (m % self.M) + (n % self.N) * self.M

    def cell(self, index: int) -> tuple[int, int]:
        return int(index) % self.M, int(index) // self.M


@dataclass
class DDGrid:
    dims: GridDims
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.values.shape != (self.dims.M, self.dims.N):
            raise ValueError(
                f"grid values have shape {self.values.shape}, expected {(self.dims.M, self.dims.N)}"
            )

    @classmethod
    def zeros(cls, dims: GridDims) -> "DDGrid":
        return cls(dims, np.zeros((dims.M, dims.N), dtype=np.complex128))


def vectorize(grid) -> np.ndarray:
    """Stack the grid column by column: entry ``m + n*M`` holds ``(m, n)``."""
    values = grid.values if isinstance(grid, DDGrid) else np.asarray(grid)
    return values.reshape(-1, order="F").astype(np.complex128, copy=False)


def devectorize(vec, dims: GridDims) -> DDGrid:
    vec = np.asarray(vec)
    if vec.size != dims.MN:
        raise ValueError(f"vector of length {vec.size} does not match {dims.M}x{dims.N}")
    return DDGrid(dims, vec.reshape(dims.M, dims.N, order="F"))


# --------------------------------------------------------------------------
# layouts
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PilotSpec:
    user_id: int
    cell: tuple[int, int]
    value: complex


@dataclass(frozen=True)
class GuardBudget:
    user_index: int
    cells: int


@dataclass(frozen=True)
class FrameLayout:
    dims: GridDims
    scheme: Scheme
    users: tuple[PilotSpec, ...]
    guard_cells: frozenset
    data_cells: tuple[frozenset, ...]
    l_max: int = 0
    k_max: int = 0
    allocation: Allocation = Allocation.PARTITIONED
    _data_index_cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        self._check()

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def pilot_cells(self) -> frozenset:
        return frozenset(p.cell for p in self.users)

    def data_indices(self, user: int) -> np.ndarray:
        """Sorted column-major flat indices of one user's data cells."""
        if user not in self._data_index_cache:
            idx = sorted(self.dims.flat(m, n) for m, n in self.data_cells[user])
            self._data_index_cache[user] = np.asarray(idx, dtype=np.int64)
        return self._data_index_cache[user]

    def _check(self):
        M, N = self.dims.M, self.dims.N

        def in_grid(c):
            return 0 <= c[0] < M and 0 <= c[1] < N

        pilots = [p.cell for p in self.users]
        if len(set(pilots)) != len(pilots):
            raise LayoutError("two users share a pilot cell")
        pilot_set = set(pilots)
        if not all(in_grid(c) for c in pilot_set | set(self.guard_cells)):
            raise LayoutError("pilot or guard cell outside the grid")
        if pilot_set & self.guard_cells:
            raise LayoutError("pilot cell listed as guard")
        if len(self.data_cells) != len(self.users):
            raise LayoutError("one data-cell set per user is required")
        union = set()
        for cells in self.data_cells:
            if not all(in_grid(c) for c in cells):
                raise LayoutError("data cell outside the grid")
            if cells & pilot_set or cells & self.guard_cells:
                raise LayoutError("data cell overlaps a pilot or guard cell")
            if self.allocation is Allocation.PARTITIONED and cells & union:
                raise LayoutError("partitioned data cells overlap between users")
            union |= cells
        if self.scheme is Scheme.IMPULSE_FULL_GRID and union:
            raise LayoutError("impulse layout carries no data")
        if self.scheme is Scheme.EMBEDDED:
            expected = M * N - len(pilot_set) - len(self.guard_cells)
            if len(union) != expected:
                raise LayoutError("embedded layout leaves cells unassigned")

    def describe(self) -> str:
        """Plain-text dump for debugging; cell sets as flat-index runs."""
        d = self.dims
        lines = [
            f"scheme {self.scheme.value}",
            f"dims M={d.M} N={d.N} delta_f={d.delta_f:g}",
            f"spread l_max={self.l_max} k_max={self.k_max}",
            f"allocation {self.allocation.value}",
        ]
        for p in self.users:
            lines.append(f"user {p.user_id} pilot {p.cell[0]},{p.cell[1]} value {p.value!r}")
        lines.append("guard " + _runs(d.flat(m, n) for m, n in self.guard_cells))
        for u, cells in enumerate(self.data_cells):
            lines.append(f"data {u} " + _runs(d.flat(m, n) for m, n in cells))
        return "\n".join(lines) + "\n"


def _runs(indices) -> str:
    idx = sorted(indices)
    if not idx:
        return "-"
    out = []
    start = prev = idx[0]
    for i in idx[1:]:
        if i == prev + 1:
            prev = i
            continue
        out.append(f"{start}" if start == prev else f"{start}-{prev}")
        start = prev = i
    out.append(f"{start}" if start == prev else f"{start}-{prev}")
    return ",".join(out)


def max_simultaneous_users(dims: GridDims, l_max: int, k_max: int) -> int:
    block = (l_max + 1) * (k_max + 1)
    if l_max < 0 or k_max < 0:
        raise LayoutError("spreads must be non-negative")
    if block > dims.MN:
        raise LayoutError(f"a single {l_max + 1}x{k_max + 1} pilot block does not fit the grid")
    return dims.MN // block


def _pilot_values(pilot_values, U):
    if pilot_values is None:
        return [1.0 + 0j] * U
    values = [complex(v) for v in pilot_values]
    if len(values) != U:
        raise LayoutError(f"{len(values)} pilot values for {U} users")
    if any(v == 0 for v in values):
        raise LayoutError("pilot values must be nonzero")
    return values


def build_impulse_layout(dims: GridDims, U: int, l_max: int, k_max: int, pilot_values=None) -> FrameLayout:
    """Tile the grid with one (l_max+1) x (k_max+1) pilot block per user.

    The pilot sits at the top-left of its block and the rest of the block is
    guard. Blocks are taken row of blocks by row of blocks.
    """
    bound = max_simultaneous_users(dims, l_max, k_max)
    if U < 1 or U > bound:
        raise LayoutError(f"{U} users exceed the bound of {bound} for l_max={l_max}, k_max={k_max}")
    rows, cols = dims.M // (l_max + 1), dims.N // (k_max + 1)
    if U > rows * cols:
        raise LayoutError(
            f"{U} blocks do not tile a {dims.M}x{dims.N} grid with pitch ({l_max + 1}, {k_max + 1})"
        )
    values = _pilot_values(pilot_values, U)
    users, guard = [], set()
    for u in range(U):
        a, b = divmod(u, cols)
        m0, n0 = a * (l_max + 1), b * (k_max + 1)
        users.append(PilotSpec(u, (m0, n0), values[u]))
        for dl in range(l_max + 1):
            for dk in range(k_max + 1):
                if dl or dk:
                    guard.add((m0 + dl, n0 + dk))
    return FrameLayout(
        dims=dims,
        scheme=Scheme.IMPULSE_FULL_GRID,
        users=tuple(users),
        guard_cells=frozenset(guard),
        data_cells=tuple(frozenset() for _ in range(U)),
        l_max=l_max,
        k_max=k_max,
    )


def embedded_guard_overhead(user_index: int, l_max: int, k_max: int) -> GuardBudget:
    """Pilot+guard cells newly claimed by the ``user_index``-th embedded pilot (1-based)."""
    l, k = l_max, k_max
    table = {
        1: 4 * l * k + 2 * l + 2 * k + 1,
        2: 2 * l * k + l + 2 * k + 1,
        3: 2 * l * k + 2 * l + k + 1,
        4: l * k + l + k + 1,
    }
    if user_index not in table:
        raise LayoutError("guard budgets exist for embedded users 1 to 4 only")
    return GuardBudget(user_index, table[user_index])


# lattice offsets (delay block, Doppler block) in user order
EMBEDDED_LATTICE = ((0, 0), (1, 0), (0, 1), (1, 1))


def footprint(cell, l_max: int, k_max: int, dims: GridDims) -> set:
    """Cyclic interference footprint of a pilot: +-l_max rows, +-k_max columns."""
    m0, n0 = cell
    return {
        ((m0 + dl) % dims.M, (n0 + dk) % dims.N)
        for dl in range(-l_max, l_max + 1)
        for dk in range(-k_max, k_max + 1)
    }


def build_embedded_layout(
    dims: GridDims,
    U: int,
    l_max: int,
    k_max: int,
    pilot_values=None,
    allocation: Allocation = Allocation.PARTITIONED,
) -> FrameLayout:
    if not 1 <= U <= 4:
        raise LayoutError("embedded placement supports 1 to 4 users")
    allocation = Allocation(allocation)
    lattice = EMBEDDED_LATTICE[:U]
    a_max = max(a for a, _ in lattice)
    b_max = max(b for _, b in lattice)
    rows_needed = 2 * l_max + 1 + a_max * (l_max + 1)
    cols_needed = 2 * k_max + 1 + b_max * (k_max + 1)
    if rows_needed > dims.M or cols_needed > dims.N:
        raise LayoutError(
            f"{U}-user footprint {rows_needed}x{cols_needed} exceeds the {dims.M}x{dims.N} grid"
        )
    values = _pilot_values(pilot_values, U)
    users = []
    reserved = set()
    for u, (a, b) in enumerate(lattice):
        cell = (a * (l_max + 1), b * (k_max + 1))
        users.append(PilotSpec(u, cell, values[u]))
        reserved |= footprint(cell, l_max, k_max, dims)
    pilots = {p.cell for p in users}
    guard = reserved - pilots
    free = sorted(
        (c for c in ((m, n) for n in range(dims.N) for m in range(dims.M)) if c not in reserved),
        key=lambda c: dims.flat(*c),
    )
    if allocation is Allocation.PARTITIONED:
        data = [set() for _ in range(U)]
        for j, c in enumerate(free):
            data[j % U].add(c)
        data_cells = tuple(frozenset(s) for s in data)
    else:
        shared = frozenset(free)
        data_cells = tuple(shared for _ in range(U))
    return FrameLayout(
        dims=dims,
        scheme=Scheme.EMBEDDED,
        users=tuple(users),
        guard_cells=frozenset(guard),
        data_cells=data_cells,
        l_max=l_max,
        k_max=k_max,
        allocation=allocation,
    )


def observation_windows(layout: FrameLayout, l_max: int, k_max: int) -> list[np.ndarray]:
    """Per-user flat indices of the (l_max+1) x (k_max+1) window after each pilot.

    Index ``l + k*(l_max+1)`` of a window holds the cell at delay offset ``l``
    and Doppler offset ``k`` from that user's pilot.
    """
    dims = layout.dims
    out = []
    for p in layout.users:
        m0, n0 = p.cell
        idx = [dims.flat(m0 + l, n0 + k) for k in range(k_max + 1) for l in range(l_max + 1)]
        out.append(np.asarray(idx, dtype=np.int64))
    return out
