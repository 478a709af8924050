"""Spin Hamiltonian assembly, diagonalization and frame orientation.

The model is a single angular momentum J with a crystal-field expansion in
extended Stevens operators plus a Zeeman term,

    H = sum_lm B_l^m O_l^m + mu_B g_J (J . B),

everything in cm^-1 (field in tesla). Eigenbases are made deterministic by
sub-diagonalizing Jz inside degenerate clusters; Kramers doublets are
paired up by energy adjacency and labeled by their Jz moments.
"""

import logging
from dataclasses import dataclass, replace

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import eigh, expm, lstsq

from .angular import AngularMomentum
from .constants import MU_B_CM1_PER_T
from .stevens import SUPPORTED_RANKS, InvalidTermError, build_stevens_operator

log = logging.getLogger(__name__)

HERMITICITY_TOL = 1e-10
# Eigenvalue clustering window for gauge fixing; well below any physical
# splitting but above eigh noise for H of a few thousand cm^-1.
DEGENERACY_TOL_CM1 = 1e-7


class InternalConsistencyError(RuntimeError):
    """A quantity the code itself assembled failed a structural check."""


class DiagonalizationError(RuntimeError):
    """Eigensolver failure, with condition diagnostics in the message."""


@dataclass(frozen=True)
class StevensTerm:
    """One crystal-field term B_l^m O_l^m.

    l must be even (2, 4 or 6) so the term commutes with time reversal
    and preserves Kramers degeneracy; any |m| <= l is accepted.
    """

    l: int
    m: int
    coefficient_cm1: float

    def __post_init__(self):
        if self.l not in SUPPORTED_RANKS:
            raise InvalidTermError(f"rank l={self.l} not in {SUPPORTED_RANKS}")
        if abs(self.m) > self.l:
            raise InvalidTermError(f"|m|={abs(self.m)} exceeds l={self.l}")


@dataclass(frozen=True)
class SpinModel:
    """Angular momentum, crystal field, Lande factor and applied field."""

    angular_momentum: AngularMomentum
    stevens_terms: tuple[StevensTerm, ...] = ()
    g_j: float = 2.0
    field_t: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "stevens_terms", tuple(self.stevens_terms))
        bx, by, bz = (float(v) for v in self.field_t)
        object.__setattr__(self, "field_t", (bx, by, bz))

    @property
    def dim(self) -> int:
        return self.angular_momentum.dim


@dataclass(frozen=True)
class KramersPair:
    """Energy-adjacent doublet (a, b) with the members' Jz moments.

    ambiguous is set when the moments are too small or fail to oppose, so
    the magnetization-based labeling cannot be trusted (mixed states).
    """

    a: int
    b: int
    jz_a: float
    jz_b: float
    ambiguous: bool = False

    @property
    def indices(self) -> tuple[int, int]:
        return (self.a, self.b)

    @property
    def moment(self) -> float:
        return max(abs(self.jz_a), abs(self.jz_b))


@dataclass(frozen=True)
class Eigensystem:
    """Sorted spectrum (ground state at zero) and gauge-fixed eigenvectors.

    eigenvectors holds states as columns; kramers_pairs and easy_axis are
    filled by identify_kramers_pairs / easy-axis analysis and stay empty
    when only the bare spectrum is needed.
    """

    energies_cm1: NDArray[np.float64]
    eigenvectors: NDArray[np.complex128]
    kramers_pairs: tuple[KramersPair, ...] = ()
    easy_axis: NDArray[np.float64] | None = None

    @property
    def dim(self) -> int:
        return self.energies_cm1.size

    def gaps_from_ground(self) -> NDArray[np.float64]:
        return self.energies_cm1 - self.energies_cm1[0]


def assemble_hamiltonian(model: SpinModel) -> NDArray[np.complex128]:
    """Crystal-field plus Zeeman Hamiltonian in the M_J product basis, cm^-1."""
    j = model.angular_momentum
    h = np.zeros((j.dim, j.dim), dtype=complex)
    for term in model.stevens_terms:
        h += term.coefficient_cm1 * build_stevens_operator(term.l, term.m, j)
    for op, b_comp in zip(j.vector, model.field_t):
        if b_comp != 0.0:
            h += MU_B_CM1_PER_T * model.g_j * b_comp * op
    dev = np.max(np.abs(h - h.conj().T)) if h.size else 0.0
    if dev > HERMITICITY_TOL:
        raise InternalConsistencyError(f"assembled H deviates from Hermitian by {dev:.3e}")
    return h


def _fix_column_phases(u: NDArray[np.complex128]) -> NDArray[np.complex128]:
    # rotate each column so its largest-magnitude entry is real positive
    out = u.copy()
    for k in range(out.shape[1]):
        lead = np.argmax(np.abs(out[:, k]))
        z = out[lead, k]
        if abs(z) > 0:
            out[:, k] *= z.conjugate() / abs(z)
    return out


def _degenerate_clusters(w: NDArray[np.float64], tol: float) -> list[slice]:
    clusters = []
    start = 0
    for i in range(1, w.size + 1):
        if i == w.size or w[i] - w[i - 1] > tol:
            clusters.append(slice(start, i))
            start = i
    return clusters


def diagonalize(
    h: NDArray[np.complex128],
    *,
    degeneracy_tol_cm1: float = DEGENERACY_TOL_CM1,
) -> Eigensystem:
    """Eigensystem with deterministic gauge.

    Within every degenerate cluster Jz is sub-diagonalized and members are
    ordered by descending <Jz>, which pins the otherwise arbitrary mixing;
    the leading component of each vector is then made real positive.
    """
    h = np.asarray(h, dtype=complex)
    dev = np.max(np.abs(h - h.conj().T))
    if dev > HERMITICITY_TOL:
        raise ValueError(f"input deviates from Hermitian by {dev:.3e}")
    try:
        w, u = eigh(h)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - rare
        norm = np.linalg.norm(h)
        raise DiagonalizationError(f"eigh failed on matrix with norm {norm:.3e}") from exc

    jz = AngularMomentum(h.shape[0] - 1).jz
    for cluster in _degenerate_clusters(w, degeneracy_tol_cm1):
        if cluster.stop - cluster.start < 2:
            continue
        sub = u[:, cluster]
        _, v = eigh(sub.conj().T @ jz @ sub)
        u[:, cluster] = sub @ v[:, ::-1]  # descending <Jz> first
    u = _fix_column_phases(u)

    unit_dev = np.max(np.abs(u.conj().T @ u - np.eye(h.shape[0])))
    if unit_dev > 1e-10:
        raise DiagonalizationError(f"eigenvector matrix not unitary, deviation {unit_dev:.3e}")
    return Eigensystem(energies_cm1=w - w[0], eigenvectors=u)


def jz_expectations(es: Eigensystem) -> NDArray[np.float64]:
    """<a|Jz|a> for every eigenstate."""
    jz = AngularMomentum(es.dim - 1).jz
    return np.real(np.einsum("ia,ij,ja->a", es.eigenvectors.conj(), jz, es.eigenvectors))


def identify_kramers_pairs(
    es: Eigensystem,
    model: SpinModel,
    *,
    moment_threshold: float = 0.1,
) -> tuple[KramersPair, ...]:
    """Pair eigenstates into doublets by energy adjacency.

    Valid for zero or weak field (Zeeman splitting well below crystal-field
    gaps), where Kramers partners stay adjacent in the sorted spectrum. A
    pair whose members both carry |<Jz>| below moment_threshold, or whose
    moments fail to oppose, is flagged ambiguous instead of rejected.
    """
    if model.angular_momentum.two_j % 2 == 0:
        raise ValueError("Kramers pairing needs half-integer J (odd two_j)")
    if es.dim % 2:
        raise ValueError("odd dimension cannot be partitioned into doublets")

    jz = jz_expectations(es)
    pairs = []
    for a in range(0, es.dim, 2):
        b = a + 1
        scale = max(abs(jz[a]), abs(jz[b]))
        small = scale < moment_threshold
        opposed = jz[a] * jz[b] <= 0 and abs(jz[a] + jz[b]) < max(1e-6, 0.05 * scale)
        pairs.append(KramersPair(a=a, b=b, jz_a=jz[a], jz_b=jz[b], ambiguous=small or not opposed))
    return tuple(pairs)


def fundamental_pair(pairs: tuple[KramersPair, ...]) -> KramersPair:
    """The doublet with the largest |<Jz>|, i.e. maximal magnetization."""
    if not pairs:
        raise ValueError("no Kramers pairs available")
    return max(pairs, key=lambda p: p.moment)


def _doublet_moment_matrix(
    es: Eigensystem, pair: KramersPair, j: AngularMomentum
) -> NDArray[np.float64]:
    # A_kl = Re Tr(Jk~ Jl~) over the doublet subspace; the principal axis
    # of A is the doublet's magnetic axis
    sub = es.eigenvectors[:, [pair.a, pair.b]]
    tilde = [sub.conj().T @ op @ sub for op in j.vector]
    a = np.empty((3, 3))
    for k in range(3):
        for m_idx in range(3):
            a[k, m_idx] = np.real(np.trace(tilde[k] @ tilde[m_idx]))
    return 0.5 * (a + a.T)


def easy_axis_of(
    es: Eigensystem, model: SpinModel, *, anisotropy_tol: float = 1e-6
) -> tuple[NDArray[np.float64], str]:
    """Magnetic axis of the fundamental doublet.

    Returns (unit axis, quality) with quality one of:
      "doublet" - principal axis of the doublet moment matrix (anisotropic)
      "moment"  - isotropic doublet, axis taken from the ground-state moment
      "none"    - no preferred direction at all; axis defaults to +z
    """
    pairs = es.kramers_pairs or identify_kramers_pairs(es, model)
    pair = fundamental_pair(pairs)
    a = _doublet_moment_matrix(es, pair, model.angular_momentum)
    w, v = eigh(a)
    if (w[-1] - w[-2]) > anisotropy_tol * max(w[-1], 1e-30):
        axis, quality = v[:, -1], "doublet"
    else:
        g = es.eigenvectors[:, 0]
        moment = np.array([np.real(g.conj() @ op @ g) for op in model.angular_momentum.vector])
        if np.linalg.norm(moment) > 1e-8:
            axis, quality = moment, "moment"
        else:
            axis, quality = np.array([0.0, 0.0, 1.0]), "none"
    # directors carry no sign; make the dominant component positive
    axis = np.asarray(axis, dtype=float)
    lead = np.argmax(np.abs(axis))
    if axis[lead] < 0:
        axis = -axis
    return axis / np.linalg.norm(axis), quality


def eigensystem_for(model: SpinModel) -> Eigensystem:
    """Assemble, diagonalize and annotate doublets plus easy axis."""
    es = diagonalize(assemble_hamiltonian(model))
    if model.angular_momentum.two_j % 2 == 1:
        pairs = identify_kramers_pairs(es, model)
        es = replace(es, kramers_pairs=pairs)
        axis, _ = easy_axis_of(es, model)
        es = replace(es, easy_axis=axis)
    return es


def rotation_taking_to_z(axis: NDArray[np.float64]) -> NDArray[np.float64]:
    """3x3 proper rotation R with R @ axis = z_hat."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    z = np.array([0.0, 0.0, 1.0])
    cross = np.cross(axis, z)
    s = np.linalg.norm(cross)
    c = float(axis @ z)
    if s < 1e-12:
        if c > 0:
            return np.eye(3)
        return np.diag([1.0, -1.0, -1.0])  # antiparallel: pi about x
    n = cross / s
    theta = np.arctan2(s, c)
    k = np.array([[0, -n[2], n[1]], [n[2], 0, -n[0]], [-n[1], n[0], 0]])
    return np.eye(3) + np.sin(theta) * k + (1 - np.cos(theta)) * (k @ k)


def axis_angle(r: NDArray[np.float64]) -> tuple[float, NDArray[np.float64]]:
    """Angle and unit axis of a proper rotation matrix."""
    c = (np.trace(r) - 1.0) / 2.0
    c = min(1.0, max(-1.0, c))
    theta = float(np.arccos(c))
    if theta < 1e-12:
        return 0.0, np.array([0.0, 0.0, 1.0])
    if np.pi - theta < 1e-8:
        # near pi the antisymmetric part vanishes; read the axis off R + I
        m = r + np.eye(3)
        col = m[:, np.argmax(np.linalg.norm(m, axis=0))]
        return np.pi, col / np.linalg.norm(col)
    n = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    return theta, n / (2.0 * np.sin(theta))


def spin_rotation_matrix(r: NDArray[np.float64], j: AngularMomentum) -> NDArray[np.complex128]:
    """Unitary D = exp(-i theta n.J) implementing the frame rotation r.

    Chosen so that D V D^dagger applied to H maps the Zeeman field B to
    r @ B; rotating model and operators together leaves physics invariant.
    """
    theta, n = axis_angle(np.asarray(r, dtype=float))
    if theta == 0.0:
        return np.eye(j.dim, dtype=complex)
    n_dot_j = sum(c * op for c, op in zip(n, j.vector))
    return expm(-1j * theta * n_dot_j)


def _stevens_basis(j: AngularMomentum) -> tuple[list[tuple[int, int]], NDArray[np.float64]]:
    labels = []
    cols = []
    for l in SUPPORTED_RANKS:
        if l > j.two_j:  # rank-l tensors vanish identically for l > 2J
            continue
        for m in range(-l, l + 1):
            op = build_stevens_operator(l, m, j)
            labels.append((l, m))
            cols.append(np.concatenate([op.real.ravel(), op.imag.ravel()]))
    return labels, np.array(cols).T


def rotate_stevens_terms(
    terms: tuple[StevensTerm, ...],
    r: NDArray[np.float64],
    j: AngularMomentum,
) -> tuple[StevensTerm, ...]:
    """Re-expand D H_cf D^dagger in Stevens operators for the rotation r.

    The even-rank span is closed under rotations, so the projection is
    exact up to round-off; a residual above 1e-9 relative means the input
    was not actually inside the span and raises.
    """
    if not terms:
        return ()
    d_rot = spin_rotation_matrix(r, j)
    h_cf = np.zeros((j.dim, j.dim), dtype=complex)
    for term in terms:
        h_cf += term.coefficient_cm1 * build_stevens_operator(term.l, term.m, j)
    h_rot = d_rot @ h_cf @ d_rot.conj().T

    labels, basis = _stevens_basis(j)
    target = np.concatenate([h_rot.real.ravel(), h_rot.imag.ravel()])
    coeffs, _, _, _ = lstsq(basis, target)
    resid = np.linalg.norm(target - basis @ coeffs) / max(np.linalg.norm(target), 1e-300)
    if resid > 1e-9:
        raise InternalConsistencyError(
            f"rotated crystal field left the Stevens span, residual {resid:.3e}"
        )
    return tuple(
        StevensTerm(l=l, m=m, coefficient_cm1=float(c))
        for (l, m), c in zip(labels, coeffs)
        if abs(c) > 1e-12
    )


def rotate_model(model: SpinModel, r: NDArray[np.float64]) -> SpinModel:
    """Apply a global frame rotation r to Stevens terms and field."""
    new_terms = rotate_stevens_terms(model.stevens_terms, r, model.angular_momentum)
    new_field = tuple(float(x) for x in (np.asarray(r, dtype=float) @ np.asarray(model.field_t)))
    return replace(model, stevens_terms=new_terms, field_t=new_field)


def rotate_to_easy_axis(model: SpinModel) -> SpinModel:
    """Equivalent model re-expressed with the fundamental doublet axis on z.

    Spectrum is invariant by construction (unitary conjugation). Models
    with no preferred direction at all come back untouched with a notice.
    """
    es = eigensystem_for(model)
    axis, quality = easy_axis_of(es, model)
    if quality == "none":
        log.info("no unique magnetic axis; returning model unrotated")
        return model
    r = rotation_taking_to_z(axis)
    if np.allclose(r, np.eye(3), atol=1e-12):
        return model
    return rotate_model(model, r)
