"""Energy functional, coupled GPE propagation and ground-state preparation.

The four components are ordered (a0, a1, b0, b1); interactions depend on the
internal state only, g[(sigma eps), (sigma' eps')] = g_{eps eps'}.  Internally
everything is in oscillator units hbar = m = omega = 1.
"""

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import integrate, inner, norm, apply_kinetic_potential

BOHR_RADIUS = 5.2918e-11        # m
HBAR = 1.054571817e-34          # J s
MASS_RB87 = 1.44316060e-25      # kg

COMPONENTS = ("a0", "a1", "b0", "b1")
COMPONENT_STATE = (0, 1, 0, 1)  # internal state of each component
COMPONENT_WELL = (0, 0, 1, 1)   # well index (a=0, b=1)


class IntegrationError(RuntimeError):
    pass


class ConvergenceError(RuntimeError):
    pass


@dataclass
class PhysicalParams:
    """Trap, atom and interaction constants (SI in, oscillator units out)."""

    omega: float = 2.0 * math.pi * 20.0     # rad/s
    mass: float = MASS_RB87                 # kg
    a_00: float = 100.4                     # Bohr radii
    a_11: float = 95.0
    a_01: float = 98.0
    kappa_11: float = 81e-21                # m^3/s, two-body 1-1
    kappa_01: float = 15e-21                # m^3/s, two-body 0-1
    kappa_000: float = 5.4e-42              # m^6/s, three-body 0-0-0
    tau_1: float = math.inf                 # s, one-body lifetime

    def __post_init__(self):
        if min(self.a_00, self.a_11, self.a_01) < 0:
            raise ValueError("scattering lengths must be non-negative")
        if self.omega <= 0 or self.mass <= 0:
            raise ValueError("omega and mass must be positive")

    @property
    def a_ho(self):
        """Oscillator length sqrt(hbar / m omega) in meters."""
        return math.sqrt(HBAR / (self.mass * self.omega))

    def g_state(self):
        """2x2 coupling matrix over internal states, in hbar omega a_ho^3."""
        conv = 4.0 * math.pi * BOHR_RADIUS / self.a_ho
        return np.array(
            [[self.a_00 * conv, self.a_01 * conv],
             [self.a_01 * conv, self.a_11 * conv]]
        )

    def g4(self):
        """4x4 coupling matrix over components (a0, a1, b0, b1)."""
        gs = self.g_state()
        out = np.empty((4, 4))
        for i, si in enumerate(COMPONENT_STATE):
            for j, sj in enumerate(COMPONENT_STATE):
                out[i, j] = gs[si, sj]
        return out

    def seconds(self, t_osc):
        """Convert a time in 1/omega units to seconds."""
        return t_osc / self.omega

    def osc_time(self, t_s):
        return t_s * self.omega


class FockVector(NamedTuple):
    n_a0: int
    n_a1: int
    n_b0: int
    n_b1: int

    @property
    def n_a(self):
        return self.n_a0 + self.n_a1

    @property
    def n_b(self):
        return self.n_b0 + self.n_b1

    def displaced(self, d_a=0, d_b=0):
        """Transfer d_a atoms a1->a0 and d_b atoms b1->b0 (well-conserving)."""
        return FockVector(self.n_a0 + d_a, self.n_a1 - d_a,
                          self.n_b0 + d_b, self.n_b1 - d_b)

    def as_array(self):
        return np.array(self, dtype=float)


@dataclass
class ComponentState:
    """Four wavefunctions evolved with a given Fock configuration."""

    grid: object
    psi: np.ndarray          # (4, n_r, n_z) complex, each unit-normalized
    fock: FockVector
    t: float = 0.0
    mu: np.ndarray = field(default=None)  # set by ground_state

    def copy(self):
        return ComponentState(self.grid, self.psi.copy(), self.fock, self.t,
                              None if self.mu is None else self.mu.copy())

    def norms(self):
        return np.sqrt(np.real(inner(self.grid, self.psi, self.psi)))


def _cayley_pair(sub, diag, sup, tau):
    """LU of (I + tau/2 K) and sparse (I - tau/2 K) for K = -L/2 tridiagonal."""
    n = len(diag)
    k = sp.diags([-0.5 * sub[1:], -0.5 * diag, -0.5 * sup[:-1]], [-1, 0, 1],
                 format="csc")
    eye = sp.identity(n, format="csc")
    a = (eye + 0.5 * tau * k).tocsc()
    b = (eye - 0.5 * tau * k).tocsr()
    return spla.splu(a), b


class SplitStepEvolver:
    """Second-order Strang split-step for the coupled time-dependent GPE.

    The kinetic part is applied by Cayley (Crank-Nicolson) transforms per
    direction, which preserve the weighted norm exactly; the potential and
    nonlinear part is an exact local phase.  Works on a batch of Fock
    configurations at once: psi shaped (n_cfg, 4, n_r, n_z).
    """

    def __init__(self, grid, g4, dt):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.grid = grid
        self.g4 = np.asarray(g4, dtype=float)
        self.g4_diag = np.diag(self.g4).copy()
        self.dt = float(dt)
        # z half step twice, r full step once per kinetic sweep
        self._lu_z, self._b_z = _cayley_pair(*grid.axial_tridiag(), 1j * dt / 2)
        self._lu_r, self._b_r = _cayley_pair(*grid.radial_tridiag(), 1j * dt)

    def _apply_axis(self, psi, lu, b, axis):
        moved = np.moveaxis(psi, axis, 0)
        shape = moved.shape
        flat = moved.reshape(shape[0], -1)
        out = lu.solve(b @ flat)
        return np.moveaxis(out.reshape(shape), 0, axis)

    def _kinetic(self, psi):
        psi = self._apply_axis(psi, self._lu_z, self._b_z, -1)
        psi = self._apply_axis(psi, self._lu_r, self._b_r, -2)
        psi = self._apply_axis(psi, self._lu_z, self._b_z, -1)
        return psi

    def mean_field(self, psi, ns):
        """g_aa (N_a - 1) |psi_a|^2 + sum_{a'!=a} g_aa' N_a' |psi_a'|^2."""
        dens = np.abs(psi) ** 2
        ns = np.asarray(ns, dtype=float)
        weighted = ns[..., :, None, None] * dens
        tot = np.einsum("ab,...bij->...aij", self.g4, weighted)
        # remove one self atom: intra-species factor is (N_a - 1), floored at
        # zero so that empty components stay linear
        self_fac = np.minimum(ns, 1.0)
        tot -= (self.g4_diag[:, None, None] * self_fac[..., :, None, None]) * dens
        return tot

    def _phase(self, psi, ns, v, tau):
        return psi * np.exp(-1j * tau * (v + self.mean_field(psi, ns)))

    def step(self, psi, ns, v_t, v_t_dt):
        """Advance one dt; v_t and v_t_dt are (4, n_r, n_z) potential stacks."""
        psi = self._phase(psi, ns, v_t, self.dt / 2)
        psi = self._kinetic(psi)
        psi = self._phase(psi, ns, v_t_dt, self.dt / 2)
        return psi

    def check_norms(self, psi, tol=1e-6):
        nrm = np.real(np.sum(self.grid.weights * np.abs(psi) ** 2, axis=(-2, -1)))
        drift = np.max(np.abs(nrm - 1.0))
        if drift > tol:
            raise IntegrationError(f"norm drift {drift:.3e} exceeds {tol:.1e}")
        return drift


def stable_dt(grid, g4, potentials, psi, ns, margin=0.05, floor=1e-8):
    """Step-size rule max(|V| + g n_max) dt < margin, restricted to the region
    the wavefunctions actually sample (density above `floor` of the peak)."""
    dens = np.abs(psi) ** 2
    mask = dens.max(axis=tuple(range(dens.ndim - 2))) > floor * dens.max()
    gn = np.einsum("ab,...bij->...aij", np.asarray(g4), np.asarray(ns)[..., :, None, None] * dens)
    scale = (np.abs(potentials) + gn)[..., mask].max()
    return margin / scale


def energy(state, potentials, g4):
    """Total energy of a ComponentState (kinetic + trap + interactions)."""
    return energy_fields(state.grid, state.psi, state.fock.as_array(), potentials, g4)


def energy_fields(grid, psi, ns, potentials, g4):
    """Energy functional of the multicomponent condensate.

    E = sum_a N_a <phi_a|h_a|phi_a> + sum_a g_aa/2 N_a(N_a-1) int |phi_a|^4
        + sum_{a != a'} g_aa'/2 N_a N_a' int |phi_a|^2 |phi_a'|^2
    """
    ns = np.asarray(ns, dtype=float)
    g4 = np.asarray(g4, dtype=float)
    e = 0.0
    dens = np.abs(psi) ** 2
    for a in range(4):
        h_psi = apply_kinetic_potential(grid, psi[a], potentials[a])
        e += ns[a] * np.real(inner(grid, psi[a], h_psi))
        e += 0.5 * g4[a, a] * ns[a] * (ns[a] - 1) * np.real(integrate(grid, dens[a] ** 2))
        for b in range(4):
            if b == a:
                continue
            e += 0.5 * g4[a, b] * ns[a] * ns[b] * np.real(integrate(grid, dens[a] * dens[b]))
    return e


def _gpe_hamiltonian_apply(grid, psi, a, ns, potentials, g4, dens):
    """Apply h_a + g_aa(N_a-1)|phi_a|^2 + sum g_aa' N_a' |phi_a'|^2 to phi_a."""
    veff = potentials[a].astype(float).copy()
    veff += g4[a, a] * max(ns[a] - 1.0, 0.0) * dens[a]
    for b in range(4):
        if b != a:
            veff += g4[a, b] * ns[b] * dens[b]
    return apply_kinetic_potential(grid, psi[a], veff), veff


def chemical_potential(grid, psi, ns, potentials, g4):
    """Per-component chemical potentials mu_a = <phi_a|h_a + mean field|phi_a>."""
    ns = np.asarray(ns, dtype=float)
    dens = np.abs(psi) ** 2
    mus = np.empty(4)
    for a in range(4):
        h_psi, _ = _gpe_hamiltonian_apply(grid, psi, a, ns, potentials, g4, dens)
        mus[a] = np.real(inner(grid, psi[a], h_psi))
    return mus


def gpe_residual(grid, psi, ns, potentials, g4):
    """Grid norm of (h + mean field - mu) phi per component."""
    ns = np.asarray(ns, dtype=float)
    dens = np.abs(psi) ** 2
    res = np.empty(4)
    for a in range(4):
        h_psi, _ = _gpe_hamiltonian_apply(grid, psi, a, ns, potentials, g4, dens)
        mu = np.real(inner(grid, psi[a], h_psi))
        res[a] = norm(grid, h_psi - mu * psi[a])
    return res


class _ImagEvolver:
    """Imaginary-time split step with per-step renormalization."""

    def __init__(self, grid, g4, tau):
        self.grid = grid
        self.g4 = np.asarray(g4, dtype=float)
        self.g4_diag = np.diag(self.g4).copy()
        self.tau = float(tau)
        # complex dtype so warm starts with residual imaginary parts pass through
        self._lu_z, self._b_z = _cayley_pair(*grid.axial_tridiag(), tau / 2 + 0j)
        self._lu_r, self._b_r = _cayley_pair(*grid.radial_tridiag(), tau + 0j)
        self._ev = SplitStepEvolver.__new__(SplitStepEvolver)  # reuse appliers
        self._ev.grid = grid

    def step(self, psi, ns, v):
        dens = np.abs(psi) ** 2
        ns = np.asarray(ns, dtype=float)
        weighted = ns[:, None, None] * dens
        tot = np.einsum("ab,bij->aij", self.g4, weighted)
        tot -= (self.g4_diag[:, None, None] * np.minimum(ns, 1.0)[:, None, None]) * dens
        psi = psi * np.exp(-0.5 * self.tau * (v + tot))
        psi = SplitStepEvolver._apply_axis(self._ev, psi, self._lu_z, self._b_z, -1)
        psi = SplitStepEvolver._apply_axis(self._ev, psi, self._lu_r, self._b_r, -2)
        psi = SplitStepEvolver._apply_axis(self._ev, psi, self._lu_z, self._b_z, -1)
        dens = np.abs(psi) ** 2
        weighted = ns[:, None, None] * dens
        tot = np.einsum("ab,bij->aij", self.g4, weighted)
        tot -= (self.g4_diag[:, None, None] * np.minimum(ns, 1.0)[:, None, None]) * dens
        psi = psi * np.exp(-0.5 * self.tau * (v + tot))
        nrm = np.sqrt(np.real(np.sum(self.grid.weights * np.abs(psi) ** 2, axis=(-2, -1))))
        return psi / nrm[:, None, None]


def _descent_polish(grid, psi, ns, potentials, g4, tol, max_iter=60000):
    """Projected gradient descent to the exact discrete stationary state.

    Step size is set per component from an upper bound on the spectrum of the
    effective Hamiltonian, so the iteration is unconditionally contracting;
    the fixed point has residual zero on the discrete GPE.
    """
    ns = np.asarray(ns, dtype=float)
    g4 = np.asarray(g4, dtype=float)
    g4_diag = np.diag(g4).copy()
    lam_kin = 0.5 * (4.0 / grid.dr**2 + 4.0 / grid.dz**2)
    w = grid.weights
    for it in range(max_iter):
        dens = np.abs(psi) ** 2
        weighted = ns[:, None, None] * dens
        tot = np.einsum("ab,bij->aij", g4, weighted)
        tot -= (g4_diag[:, None, None] * np.minimum(ns, 1.0)[:, None, None]) * dens
        veff = potentials + tot
        hpsi = -0.5 * grid.laplacian(psi) + veff * psi
        mu = np.real(np.sum(w * np.conj(psi) * hpsi, axis=(-2, -1)))
        res_vec = hpsi - mu[:, None, None] * psi
        resn = np.sqrt(np.real(np.sum(w * np.abs(res_vec) ** 2, axis=(-2, -1))))
        if resn.max() < tol:
            return psi
        tau = 1.8 / (lam_kin + veff.max(axis=(-2, -1))[:, None, None] - mu[:, None, None])
        psi = psi - tau * res_vec
        nrm = np.sqrt(np.real(np.sum(w * np.abs(psi) ** 2, axis=(-2, -1))))
        psi = psi / nrm[:, None, None]
    raise ConvergenceError(
        f"ground state not converged after {max_iter} descent iterations, "
        f"residual {resn.max():.3e}")


def ground_state(grid, fock, potentials, g4, tol=1e-8, tau=0.05,
                 relax_iters=4000, relax_tol=1e-10, psi0=None):
    """Coupled ground state by imaginary time plus self-consistent polish.

    potentials must be time-independent, shape (4, n_r, n_z).  Returns a
    ComponentState with chemical potentials attached.
    """
    ns = fock.as_array() if isinstance(fock, FockVector) else np.asarray(fock, float)
    potentials = np.asarray(potentials, dtype=float)
    if psi0 is None:
        psi = np.empty((4,) + grid.shape, dtype=complex)
        for a in range(4):
            i0, j0 = np.unravel_index(np.argmin(potentials[a]), grid.shape)
            z0 = grid.z[j0]
            gauss = np.exp(-0.5 * (grid.r[:, None] ** 2 + (grid.z[None, :] - z0) ** 2))
            psi[a] = gauss / norm(grid, gauss)
    else:
        psi = psi0.astype(complex).copy()
        psi /= np.sqrt(np.real(np.sum(grid.weights * np.abs(psi) ** 2,
                                      axis=(-2, -1))))[:, None, None]

    ev = _ImagEvolver(grid, g4, tau)
    prev_e = np.inf
    for it in range(relax_iters):
        psi = ev.step(psi, ns, potentials)
        if it % 25 == 24:
            e = energy_fields(grid, psi, ns, potentials, g4)
            if abs(prev_e - e) < relax_tol * max(abs(e), 1.0):
                break
            prev_e = e

    psi = _descent_polish(grid, psi, ns, potentials, g4, tol)
    fv = fock if isinstance(fock, FockVector) else FockVector(*[int(round(x)) for x in ns])
    state = ComponentState(grid, psi, fv, 0.0,
                           chemical_potential(grid, psi, ns, potentials, g4))
    state._g4 = np.asarray(g4, dtype=float)
    return state


# ---------------------------------------------------------------------------
# wavefunction snapshot files (versioned textual format)

SNAPSHOT_VERSION = 1


def save_snapshot(path, grid, psi, fock, t):
    """Write components as a textual (comp, i, j, Re, Im) table with a header."""
    with open(path, "w") as fh:
        fh.write(f"# becsteer-snapshot v{SNAPSHOT_VERSION}\n")
        fh.write(f"# grid n_r={grid.n_r} n_z={grid.n_z} dr={grid.dr!r} "
                 f"dz={grid.dz!r} z_min={grid.z_min!r}\n")
        fh.write(f"# fock {fock.n_a0} {fock.n_a1} {fock.n_b0} {fock.n_b1}\n")
        fh.write(f"# t {t!r}\n")
        fh.write("# columns: component i j re im\n")
        for a in range(4):
            for i in range(grid.n_r):
                for j in range(grid.n_z):
                    v = complex(psi[a, i, j])
                    fh.write(f"{a} {i} {j} {v.real!r} {v.imag!r}\n")


def load_snapshot(path):
    """Read a snapshot written by save_snapshot; returns (grid, psi, fock, t)."""
    from .grid import CylGrid

    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("# becsteer-snapshot v"):
            raise ValueError("not a becsteer snapshot file")
        version = int(header.rsplit("v", 1)[1])
        if version != SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {version}")
        gline = fh.readline().split()
        kv = dict(tok.split("=") for tok in gline[2:])
        grid = CylGrid(int(kv["n_r"]), int(kv["n_z"]), float(kv["dr"]),
                       float(kv["dz"]), float(kv["z_min"]))
        fock = FockVector(*[int(x) for x in fh.readline().split()[2:]])
        t = float(fh.readline().split()[2])
        fh.readline()
        psi = np.zeros((4,) + grid.shape, dtype=complex)
        for line in fh:
            a, i, j, re, im = line.split()
            psi[int(a), int(i), int(j)] = float(re) + 1j * float(im)
    return grid, psi, fock, t
