"""Angular-momentum operators in the Jz eigenbasis.

The basis is ordered by ascending magnetic quantum number, m = -J .. +J,
so index i corresponds to m_i = -J + i. All matrices are complex and of
shape (d, d) with d = 2J + 1.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.typing import NDArray


@dataclass
class AngularMomentum:
    """Spin/total angular momentum J encoded by the integer 2J.

    Parameters
    ----------
    two_j : int
        Twice the angular momentum quantum number. Must be a positive
        integer; odd values give half-integer J (Kramers ions).
    """

    two_j: int

    def __post_init__(self):
        if not isinstance(self.two_j, (int, np.integer)) or self.two_j < 1:
            raise ValueError(f"two_j must be a positive integer, got {self.two_j!r}")

    @property
    def j(self) -> float:
        return self.two_j / 2.0

    @property
    def dim(self) -> int:
        return self.two_j + 1

    @cached_property
    def m_values(self) -> NDArray[np.float64]:
        """Magnetic quantum numbers, ascending."""
        return -self.j + np.arange(self.dim, dtype=float)

    @cached_property
    def jz(self) -> NDArray[np.complex128]:
        return np.diag(self.m_values).astype(complex)

    @cached_property
    def jp(self) -> NDArray[np.complex128]:
        """Raising operator, <m+1|J+|m> = sqrt(J(J+1) - m(m+1))."""
        m = self.m_values[:-1]
        amp = np.sqrt(self.j * (self.j + 1.0) - m * (m + 1.0))
        return np.diag(amp, k=-1).astype(complex)

    @cached_property
    def jm(self) -> NDArray[np.complex128]:
        return self.jp.conj().T

    @cached_property
    def jx(self) -> NDArray[np.complex128]:
        return 0.5 * (self.jp + self.jm)

    @cached_property
    def jy(self) -> NDArray[np.complex128]:
        return -0.5j * (self.jp - self.jm)

    @property
    def vector(self) -> tuple[NDArray[np.complex128], ...]:
        """(Jx, Jy, Jz) as a tuple, handy for dot products with a field."""
        return (self.jx, self.jy, self.jz)

    @cached_property
    def casimir(self) -> NDArray[np.complex128]:
        """J^2 = Jx^2 + Jy^2 + Jz^2; equals J(J+1) identity."""
        return self.jx @ self.jx + self.jy @ self.jy + self.jz @ self.jz
