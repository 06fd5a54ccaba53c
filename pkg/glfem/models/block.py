from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse


@dataclass(frozen=True, eq=False)
class BlockOperator:
    """Real ``2N x 2N`` operator in Re/Im block form.

    The full matrix is ``[[RR, IR], [RI, II]]``: rows are the test functions
    φ_j and iφ_j, columns the real and imaginary trial coefficients.
    """

    RR: sparse.csr_matrix
    RI: sparse.csr_matrix
    IR: sparse.csr_matrix
    II: sparse.csr_matrix

    @classmethod
    def diagonal(cls, block: sparse.spmatrix) -> "BlockOperator":
        block = sparse.csr_matrix(block)
        zero = sparse.csr_matrix(block.shape)
        return cls(RR=block, RI=zero, IR=zero, II=block)

    @classmethod
    def complex_linear(cls, real: sparse.spmatrix, coupling: sparse.spmatrix) -> "BlockOperator":
        """Operator with ``RR = II = real`` and ``IR = coupling``, ``RI = couplingᵀ``."""
        real = sparse.csr_matrix(real)
        coupling = sparse.csr_matrix(coupling)
        return cls(RR=real, RI=coupling.T.tocsr(), IR=coupling, II=real)

    @property
    def size(self) -> int:
        return self.RR.shape[0]

    @cached_property
    def matrix(self) -> sparse.csc_matrix:
        return sparse.bmat([[self.RR, self.IR], [self.RI, self.II]], format="csc")

    def __add__(self, other: "BlockOperator") -> "BlockOperator":
        return BlockOperator(
            RR=(self.RR + other.RR).tocsr(),
            RI=(self.RI + other.RI).tocsr(),
            IR=(self.IR + other.IR).tocsr(),
            II=(self.II + other.II).tocsr(),
        )

    def scaled(self, factor: float) -> "BlockOperator":
        return BlockOperator(RR=factor * self.RR, RI=factor * self.RI, IR=factor * self.IR, II=factor * self.II)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        n = self.size
        top, bottom = x[:n], x[n:]
        return np.concatenate([self.RR @ top + self.IR @ bottom, self.RI @ top + self.II @ bottom])

    __matmul__ = matvec

    def quadratic_form(self, x: np.ndarray) -> float:
        return float(x @ self.matvec(x))

    def is_symmetric(self) -> bool:
        full = self.matrix
        return abs(full - full.T).max() == 0.0

    def is_complex_linear(self, rtol: float = 1e-12) -> bool:
        scale = max(abs(self.RR).max(), 1.0)
        return (
            abs(self.RR - self.II).max() <= rtol * scale
            and abs(self.IR + self.RI).max() <= rtol * scale
        )

    def to_complex(self) -> sparse.csr_matrix:
        """Complex ``N x N`` matrix ``Z = RR + i·RI`` of a complex-linear operator.

        For such operators ``wᵀ A v = Re(conj(w_c)ᵀ Z v_c)`` with the complex
        coefficient vectors ``v_c = v_re + i v_im``.
        """
        if not self.is_complex_linear():
            raise ValueError("Operator is not complex-linear (RR != II or IR != -RI)")
        return (self.RR + 1j * self.RI).tocsr()
