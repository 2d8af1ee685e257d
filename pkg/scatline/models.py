"""
Domain types for line scattering with a point transfer condition.

The types here describe the objects every service works with: the
transfer matrix acting at the origin, a sampled potential with compact
support, solution states, scattering data and the traces produced by
the forward and inverse pipelines. Construction validates the
invariants each type carries, raising :class:`~scatline.errors.DomainError`
when an object would be meaningless (for instance ``det M != 1``).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
from scipy.integrate import trapezoid

from .errors import DomainError

DET_TOLERANCE = 1e-12
DIAG_PRODUCT_TOLERANCE = 1e-10


class Interpolation(enum.Enum):
    """How a potential is evaluated between its nodes."""
    CONSTANT = "constant"
    LINEAR = "linear"


class Side(enum.Enum):
    """Which side of the origin a state lives on."""
    MINUS = "minus"
    PLUS = "plus"
    NONE = "none"


class Propagation(enum.Enum):
    """Propagation method selector for the ODE kernel."""
    AUTO = "auto"
    RK = "rk"
    EXACT = "exact"


class MatrixCase(enum.Enum):
    """Transfer-matrix structure visible in the reflection data."""
    DIAG = "diag"
    OFFDIAG = "offdiag"


class EntryStatus(enum.Enum):
    """Status of a single transfer-matrix entry in a reconstruction."""
    RESOLVED = "resolved"
    UNDETERMINED = "undetermined"
    CONSTRAINED = "constrained"


class ContourKind(enum.Enum):
    """Contour family in the ``S*sqrt(lambda)`` plane."""
    GAMMA = "gamma"
    UPSILON = "upsilon"


@dataclass(frozen=True)
class SolverOptions:
    """Tolerances and method choice shared by every propagation."""
    rtol: float = 1e-10
    atol: float = 1e-10
    method: Propagation = Propagation.AUTO
    threads: int = 1

    def __post_init__(self) -> None:
        if self.rtol <= 0 or self.atol <= 0:
            raise DomainError("Tolerances must be positive.", fields={"rtol": self.rtol, "atol": self.atol})
        if self.threads < 1:
            raise DomainError("Thread count must be at least one.", fields={"threads": self.threads})
        if not isinstance(self.method, Propagation):
            object.__setattr__(self, "method", Propagation(self.method))


@dataclass(frozen=True)
class TransferMatrix:
    """Real 2x2 matrix coupling ``(y, y')`` across the origin.

    The determinant must equal one; anything else is rejected at
    construction time.
    """
    m11: float
    m12: float
    m21: float
    m22: float

    def __post_init__(self) -> None:
        for name in ("m11", "m12", "m21", "m22"):
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise DomainError(f"Transfer matrix entry {name} is not finite.")
            object.__setattr__(self, name, value)
        if abs(self.det - 1.0) > DET_TOLERANCE:
            raise DomainError(
                "Transfer matrix must have unit determinant.",
                fields={"det": self.det},
            )

    @classmethod
    def identity(cls) -> "TransferMatrix":
        return cls(1.0, 0.0, 0.0, 1.0)

    @property
    def det(self) -> float:
        return self.m11 * self.m22 - self.m12 * self.m21

    @property
    def trace(self) -> float:
        return self.m11 + self.m22

    def is_diagonal_case(self, tol: float = 1e-14) -> bool:
        """Return True when ``m12`` vanishes to within ``tol``."""
        return abs(self.m12) < tol

    def inverse(self) -> "TransferMatrix":
        return TransferMatrix(self.m22, -self.m12, -self.m21, self.m11)

    def as_array(self) -> np.ndarray:
        return np.array([[self.m11, self.m12], [self.m21, self.m22]], dtype=float)

    def __repr__(self) -> str:
        return f"<TransferMatrix [[{self.m11:g}, {self.m12:g}], [{self.m21:g}, {self.m22:g}]]>"


@dataclass(eq=False)
class PotentialGrid:
    """Sampled real potential with essential support in ``[-S, S]``.

    With ``CONSTANT`` interpolation ``values[i]`` holds on
    ``[nodes[i], nodes[i+1])`` and the last value is unused. With
    ``LINEAR`` interpolation values are joined linearly. The potential
    is zero outside ``[nodes[0], nodes[-1]]`` in both modes.
    """
    support: float
    nodes: np.ndarray
    values: np.ndarray
    interpolation: Interpolation = Interpolation.CONSTANT

    def __post_init__(self) -> None:
        self.support = float(self.support)
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if not isinstance(self.interpolation, Interpolation):
            self.interpolation = Interpolation(self.interpolation)
        if not np.isfinite(self.support) or self.support <= 0:
            raise DomainError("Support bound must be finite and positive.", fields={"support": self.support})
        if self.nodes.ndim != 1 or self.nodes.shape != self.values.shape or self.nodes.size < 2:
            raise DomainError("Potential needs at least two nodes with one value each.")
        if np.any(np.diff(self.nodes) <= 0):
            raise DomainError("Potential nodes must be strictly increasing.")
        if self.nodes[0] < -self.support - 1e-12 or self.nodes[-1] > self.support + 1e-12:
            raise DomainError(
                "Potential nodes must lie inside the support interval.",
                fields={"support": self.support, "nodes": [self.nodes[0], self.nodes[-1]]},
            )
        if not np.all(np.isfinite(self.values)):
            raise DomainError("Potential values must be finite.")

    @classmethod
    def from_cells(
        cls,
        support: float,
        cell_values,
        interpolation: Interpolation = Interpolation.CONSTANT,
    ) -> "PotentialGrid":
        """Uniform piecewise-constant potential over ``[-S, S]``."""
        cells = np.asarray(cell_values, dtype=float)
        nodes = np.linspace(-support, support, cells.size + 1)
        return cls(support, nodes, np.append(cells, 0.0), interpolation)

    @classmethod
    def from_function(
        cls,
        fn: Callable[[np.ndarray], np.ndarray],
        support: float,
        n: int,
        interpolation: Interpolation = Interpolation.LINEAR,
    ) -> "PotentialGrid":
        """Sample ``fn`` on ``n`` uniform cells (midpoints for constant mode)."""
        nodes = np.linspace(-support, support, n + 1)
        if Interpolation(interpolation) is Interpolation.CONSTANT:
            mids = 0.5 * (nodes[:-1] + nodes[1:])
            return cls(support, nodes, np.append(fn(mids), 0.0), interpolation)
        return cls(support, nodes, fn(nodes), interpolation)

    @classmethod
    def zero(cls, support: float) -> "PotentialGrid":
        return cls(support, np.array([-support, support]), np.zeros(2))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.interpolation is Interpolation.LINEAR:
            return np.interp(x, self.nodes, self.values, left=0.0, right=0.0)
        idx = np.searchsorted(self.nodes, x, side="right") - 1
        inside = (idx >= 0) & (idx < self.nodes.size - 1)
        out = np.where(inside, self.values[np.clip(idx, 0, self.nodes.size - 1)], 0.0)
        return out if out.ndim else float(out)

    def breakpoints(self, a: float, b: float) -> np.ndarray:
        """Nodes strictly between ``a`` and ``b``, ordered from ``a`` to ``b``."""
        lo, hi = min(a, b), max(a, b)
        inner = self.nodes[(self.nodes > lo) & (self.nodes < hi)]
        return inner if a <= b else inner[::-1]

    def is_zero_on(self, a: float, b: float) -> bool:
        """True when ``q`` vanishes on a segment free of interior nodes."""
        if self.interpolation is Interpolation.LINEAR:
            return self(a) == 0.0 and self(b) == 0.0
        return self(0.5 * (a + b)) == 0.0

    def growth_condition(self) -> float:
        """Discrete ``sum (1+|x|)|q(x)| dx`` over the grid."""
        if self.interpolation is Interpolation.LINEAR:
            return float(trapezoid((1 + np.abs(self.nodes)) * np.abs(self.values), self.nodes))
        mids = 0.5 * (self.nodes[:-1] + self.nodes[1:])
        return float(np.sum((1 + np.abs(mids)) * np.abs(self.values[:-1]) * np.diff(self.nodes)))

    def cell_averages(self, n_cells: int) -> np.ndarray:
        """Averages of ``q`` over ``n_cells`` uniform cells of ``[-S, S]``."""
        from .util.quadrature import panel_rule

        edges = np.linspace(-self.support, self.support, n_cells + 1)
        out = np.empty(n_cells)
        for i in range(n_cells):
            x, w = panel_rule(np.concatenate(([edges[i]], self.breakpoints(edges[i], edges[i + 1]), [edges[i + 1]])))
            out[i] = np.dot(w, self(x)) / (edges[i + 1] - edges[i])
        return out

    def __repr__(self) -> str:
        return f"<PotentialGrid S={self.support:g} n={self.nodes.size} {self.interpolation.value}>"


@dataclass(frozen=True)
class StateVector:
    """Solution pair ``(y, y')`` at ``x`` for spectral parameter ``zeta``."""
    y: complex
    yp: complex
    x: float
    zeta: complex
    side: Side = Side.NONE

    def __post_init__(self) -> None:
        if not (np.isfinite(self.y) and np.isfinite(self.yp)):
            raise DomainError("State vector components must be finite.", fields={"x": self.x})

    def as_array(self) -> np.ndarray:
        return np.array([self.y, self.yp], dtype=complex)


@dataclass(eq=False)
class ComplexFunctionTrace:
    """Samples of a complex function, optionally with derivative samples."""
    abscissae: np.ndarray
    values: np.ndarray
    label: str
    derivatives: Optional[np.ndarray] = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.abscissae = np.atleast_1d(np.asarray(self.abscissae))
        self.values = np.atleast_1d(np.asarray(self.values, dtype=complex))
        if self.abscissae.shape != self.values.shape:
            raise DomainError(
                "Trace abscissae and values must have equal lengths.",
                fields={"label": self.label},
            )
        if self.derivatives is not None:
            self.derivatives = np.atleast_1d(np.asarray(self.derivatives, dtype=complex))

    def __len__(self) -> int:
        return self.values.size


@dataclass(eq=False)
class ScatteringData:
    """Reflection samples on a real grid plus bound-state parameters.

    ``A`` and ``B`` are optional coefficient samples on the same grid,
    present when the data come from the forward solver or from an
    inversion run.
    """
    xi: np.ndarray
    R: np.ndarray
    etas: np.ndarray = field(default_factory=lambda: np.empty(0))
    A: Optional[np.ndarray] = None
    B: Optional[np.ndarray] = None
    support: Optional[float] = None

    def __post_init__(self) -> None:
        self.xi = np.atleast_1d(np.asarray(self.xi, dtype=float))
        self.R = np.atleast_1d(np.asarray(self.R, dtype=complex))
        self.etas = np.atleast_1d(np.asarray(self.etas, dtype=float))
        if self.xi.shape != self.R.shape:
            raise DomainError("Frequency grid and reflection samples differ in length.")
        if np.any(self.xi == 0):
            raise DomainError("Frequency grid must not contain zero.")
        if np.any(np.abs(self.R) >= 1):
            raise DomainError(
                "Reflection coefficient must satisfy |R| < 1.",
                fields={"max_abs_R": float(np.max(np.abs(self.R)))},
            )
        if self.etas.size and (np.any(self.etas <= 0) or np.any(np.diff(self.etas) <= 0)):
            raise DomainError("Bound-state parameters must be positive and strictly increasing.")
        for name in ("A", "B"):
            value = getattr(self, name)
            if value is not None:
                value = np.atleast_1d(np.asarray(value, dtype=complex))
                if value.shape != self.xi.shape:
                    raise DomainError(f"Coefficient trace {name} does not match the frequency grid.")
                setattr(self, name, value)

    @property
    def has_coefficients(self) -> bool:
        return self.A is not None and self.B is not None


@dataclass(eq=False)
class JostSide:
    """Jost solution samples on one side, normalised at the matching infinity."""
    side: Side
    zeta: complex
    x: np.ndarray
    y: np.ndarray
    yp: np.ndarray

    @property
    def samples(self) -> ComplexFunctionTrace:
        return ComplexFunctionTrace(self.x, self.y, f"f_{self.side.value}", derivatives=self.yp)


@dataclass(frozen=True)
class MatrixBranch:
    """One sign branch of a reconstructed transfer matrix."""
    m11: float
    m12: float
    m21: Optional[float]
    m22: float

    @property
    def trace(self) -> float:
        return self.m11 + self.m22

    def to_matrix(self) -> TransferMatrix:
        if self.m21 is None:
            raise DomainError("m21 is not determined by the data for this branch.")
        return TransferMatrix(self.m11, self.m12, self.m21, self.m22)


@dataclass(eq=False)
class MReconstruction:
    """Transfer-matrix information recovered from reflection data."""
    case: MatrixCase
    branches: List[MatrixBranch]
    m21_status: EntryStatus
    C1: Optional[float] = None
    C2: Optional[float] = None
    K1: Optional[float] = None
    K2: Optional[float] = None
    constraint: Optional[str] = None
    selected: int = 0
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.case is MatrixCase.DIAG:
            for branch in self.branches:
                if abs(branch.m11 * branch.m22 - 1.0) > DIAG_PRODUCT_TOLERANCE:
                    raise DomainError("Diagonal branch violates m11*m22 = 1.", fields={"branch": repr(branch)})
        elif self.C1 is not None:
            for branch in self.branches:
                if branch.m21 is not None and abs(branch.m12 * (self.C1 * branch.m11 - branch.m21) - 1.0) > 1e-10:
                    raise DomainError("Branch violates m12*(C1*m11 - m21) = 1.", fields={"branch": repr(branch)})

    @classmethod
    def from_matrix(cls, matrix: TransferMatrix) -> "MReconstruction":
        """Wrap a known matrix so it can drive the dispersion integral."""
        branch = MatrixBranch(matrix.m11, matrix.m12, matrix.m21, matrix.m22)
        if matrix.is_diagonal_case():
            c2 = (matrix.m22 - matrix.m11) / matrix.trace
            return cls(MatrixCase.DIAG, [branch], EntryStatus.RESOLVED, C2=c2)
        return cls(
            MatrixCase.OFFDIAG,
            [branch],
            EntryStatus.RESOLVED,
            C1=matrix.m22 / matrix.m12,
            K1=matrix.m12 ** 2,
            K2=matrix.trace ** 2,
        )

    @property
    def resolved(self) -> bool:
        return bool(self.branches)

    @property
    def branch(self) -> MatrixBranch:
        if not self.branches:
            raise DomainError(
                "Reconstruction is a one-parameter family; supply K1 and K2 to resolve it.",
                fields={"constraint": self.constraint},
            )
        return self.branches[self.selected]

    def select(self, sign: int = 1) -> "MReconstruction":
        """Select the first branch whose trace has the given sign."""
        for i, branch in enumerate(self.branches):
            if np.sign(branch.trace) == np.sign(sign) or (branch.trace == 0 and branch.m12 * sign > 0):
                self.selected = i
                return self
        raise DomainError("No branch matches the requested trace sign.", fields={"sign": sign})

    def complete(
        self,
        m21: Optional[float] = None,
        m11: Optional[float] = None,
        m12: Optional[float] = None,
    ) -> TransferMatrix:
        """Build a concrete matrix, supplying what the data leave free."""
        if self.case is MatrixCase.DIAG:
            if m21 is None:
                raise DomainError("m21 is undetermined in the diagonal case and must be supplied.")
            b = self.branch
            return TransferMatrix(b.m11, 0.0, m21, b.m22)
        if self.branches:
            return self.branch.to_matrix()
        if m11 is None or m12 is None or m12 == 0:
            raise DomainError("Completing the constraint family needs m11 and a nonzero m12.")
        return TransferMatrix(m11, m12, self.C1 * m11 - 1.0 / m12, self.C1 * m12)


@dataclass(eq=False)
class FundamentalPair:
    """Columns of the solution matrix started from ``H = [[-1,0],[0,1]]`` at ``-S``."""
    lam: np.ndarray
    x: np.ndarray
    w1: np.ndarray
    w1p: np.ndarray
    w2: np.ndarray
    w2p: np.ndarray
    support: float

    def wronskian(self) -> np.ndarray:
        return self.w1 * self.w2p - self.w2 * self.w1p

    def at_support(self) -> tuple:
        """Return ``(w1, w1', w2, w2')`` at ``x = S``."""
        x = np.asarray(self.x)
        if x.ndim == 0:
            if not np.isclose(x, self.support):
                raise DomainError("Pair was not evaluated at the support bound.", fields={"x": float(x)})
            return self.w1, self.w1p, self.w2, self.w2p
        hits = np.flatnonzero(np.isclose(x, self.support))
        if not hits.size:
            raise DomainError("Pair was not evaluated at the support bound.")
        i = hits[-1]
        return self.w1[i], self.w1p[i], self.w2[i], self.w2p[i]


@dataclass(eq=False)
class MFunctionTrace:
    """Samples of the double-Dirichlet m-function on ``[-S, S]``.

    ``metric`` is ``"plain"`` for samples off the real axis and
    ``"chordal"`` for real-axis samples, where poles make the plain
    difference unusable as a misfit.
    """
    lambdas: np.ndarray
    m_values: np.ndarray
    support: float
    metric: str = "plain"
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.lambdas = np.atleast_1d(np.asarray(self.lambdas, dtype=complex))
        self.m_values = np.atleast_1d(np.asarray(self.m_values, dtype=complex))
        if self.lambdas.shape != self.m_values.shape:
            raise DomainError("m-trace lambdas and values differ in length.")


@dataclass(eq=False)
class ContourSpec:
    """Sampled contour in the ``z = S*sqrt(lambda)`` plane."""
    kind: ContourKind
    k: int
    samples: np.ndarray
    legs: np.ndarray

    def lambdas(self, support: float) -> np.ndarray:
        return self.samples ** 2 / support ** 2


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    misfit: float
    gradnorm: float


@dataclass(eq=False)
class RecoveryResult:
    """Fitted potential plus the optimiser's misfit history."""
    grid: PotentialGrid
    history: List[IterationRecord]
    misfit: float
    stagnated: bool = False
    restarts_used: int = 0
    diagnostics: dict = field(default_factory=dict)

    def __repr__(self) -> str:
        return f"<RecoveryResult cells={self.grid.nodes.size - 1} misfit={self.misfit:.3e}>"


@dataclass(eq=False)
class RunConfig:
    """Resolved options for one CLI command.

    ``options`` holds every flag after file defaults and command-line
    values are merged. :meth:`digest` hashes the options that change
    results, leaving out output locations and the thread count.
    """
    command: str
    options: dict

    def digest(self) -> str:
        from .util.io import config_hash

        return config_hash(self.command, self.options)
