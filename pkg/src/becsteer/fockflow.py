"""Batch evolution of the nine displaced Fock configurations.

The entangling information lives in the derivatives of the wavefunction
phases with respect to the within-well population transfer, and in the slowly
accumulating reduced phase Theta.  Both are extracted here from the nine
configurations (d_a, d_b) in {-beta, 0, +beta}^2 around the central one.

The reduced-phase rate is linear in the displacement vector, so Theta is
tracked as a 4-vector of per-mode coefficients; antisymmetry under reversal
of the displacement is then exact by construction.
"""

import numpy as np

from .grid import integrate
from .meanfield import FockVector, SplitStepEvolver

DENSITY_FLOOR = 1e-8


class DisplacementError(ValueError):
    pass


def _wrap(x):
    return (x + np.pi) % (2.0 * np.pi) - np.pi


class TrajectorySet:
    """Nine Fock configurations, their 36 wavefunctions, and the phase data."""

    # configuration order: index = 3*ia + ib over displacements (-b, 0, +b)
    OFFSETS = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 0), (0, 1),
               (1, -1), (1, 0), (1, 1)]
    CENTER = 4
    AXIS = {("a", +1): 7, ("a", -1): 1, ("b", +1): 5, ("b", -1): 3}

    def __init__(self, grid, g4, nbar, beta, psi0):
        self.grid = grid
        self.g4 = np.asarray(g4, dtype=float)
        self.nbar = nbar
        self.beta = int(beta)
        self.focks = [nbar.displaced(da * self.beta, db * self.beta)
                      for (da, db) in self.OFFSETS]
        self.ns = np.array([f.as_array() for f in self.focks])
        if np.any(self.ns < 0):
            raise DisplacementError("displaced configuration has negative occupation")
        self.psi = np.broadcast_to(psi0, (9, 4) + grid.shape).astype(complex).copy()
        self.t = 0.0
        # Theta(Delta) = Delta . theta_coeff ; exactly zero at t = 0
        self.theta_coeff = np.zeros(4)
        self._theta_rate_prev = self._theta_rate()
        # continuous density-weighted mean phase of each axis configuration
        # relative to the central one (per component), for 2pi unwrapping
        self._mean_phase = np.zeros((9, 4))
        self._raw_prev = np.zeros((9, 4))
        self._evolver = None
        self._evolver_dt = None

    # -- low-level helpers ---------------------------------------------------

    def _theta_rate(self):
        """d(theta_coeff)/dt from the central configuration densities."""
        dens = np.abs(self.psi[self.CENTER]) ** 2
        pair = np.array([[np.real(integrate(self.grid, dens[a] * dens[b]))
                          for b in range(4)] for a in range(4)])
        rate = np.zeros(4)
        for ap in range(4):
            for a in range(4):
                if a != ap:
                    rate[ap] -= 0.5 * self.g4[a, ap] * pair[a, ap]
        return rate

    def _axis_indices(self):
        return [self.AXIS[("a", +1)], self.AXIS[("a", -1)],
                self.AXIS[("b", +1)], self.AXIS[("b", -1)]]

    def _update_mean_phases(self):
        center = self.psi[self.CENTER]
        for idx in self._axis_indices():
            ov = np.sum(self.grid.weights * np.conj(center) * self.psi[idx],
                        axis=(-2, -1))
            raw = np.angle(ov)
            self._mean_phase[idx] += _wrap(raw - self._raw_prev[idx])
            self._raw_prev[idx] = raw

    # -- public operations ---------------------------------------------------

    def advance(self, potentials, dt, check_norms=True):
        """One time step of all nine configurations plus the Theta quadrature.

        potentials is a callable t -> (4, n_r, n_z) stack.
        """
        if self._evolver is None or self._evolver_dt != dt:
            self._evolver = SplitStepEvolver(self.grid, self.g4, dt)
            self._evolver_dt = dt
        v0 = np.asarray(potentials(self.t), dtype=float)
        v1 = np.asarray(potentials(self.t + dt), dtype=float)
        self.psi = self._evolver.step(self.psi, self.ns, v0, v1)
        if check_norms:
            self._evolver.check_norms(self.psi)
        rate = self._theta_rate()
        self.theta_coeff += 0.5 * dt * (self._theta_rate_prev + rate)
        self._theta_rate_prev = rate
        self._update_mean_phases()
        self.t += dt

    def theta(self, p_a, p_b):
        """Reduced phase for a displacement of p_sigma transfers per well."""
        delta = np.array([p_a, -p_a, p_b, -p_b], dtype=float)
        return float(delta @ self.theta_coeff)

    def phase_gradients(self):
        """d(theta_alpha)/d(u_sigma) fields, shape (4, 2, n_r, n_z).

        Centered difference of the unwrapped phases of the +beta and -beta
        axis configurations; cells below the central density floor are zeroed.
        """
        center = self.psi[self.CENTER]
        dens = np.abs(center) ** 2
        mask = dens >= DENSITY_FLOOR * dens.max(axis=(-2, -1), keepdims=True)
        grads = np.zeros((4, 2) + self.grid.shape)
        for d, well in enumerate("ab"):
            ip = self.AXIS[(well, +1)]
            im = self.AXIS[(well, -1)]
            for a in range(4):
                dp = self._unwrapped_phase(ip, a, center)
                dm = self._unwrapped_phase(im, a, center)
                grads[a, d] = np.where(mask[a], (dp - dm) / (2.0 * self.beta), 0.0)
        return grads

    def _unwrapped_phase(self, idx, a, center):
        raw_mean = self._raw_prev[idx, a]
        local = np.angle(self.psi[idx, a] * np.conj(center[a])
                         * np.exp(-1j * raw_mean))
        return local + self._mean_phase[idx, a]

    def displaced_overlap(self, a, p_a, p_b, grads=None):
        """<phi_a(N + Delta)|phi_a(N)> in modulus-phase form."""
        if grads is None:
            grads = self.phase_gradients()
        dens = np.abs(self.psi[self.CENTER, a]) ** 2
        phase = p_a * grads[a, 0] + p_b * grads[a, 1]
        return complex(integrate(self.grid, dens * np.exp(-1j * phase)))

    def density_overlap(self, well):
        """Normalized overlap of the 0 and 1 densities of one well (in [0,1])."""
        base = 0 if well == "a" else 2
        d0 = np.abs(self.psi[self.CENTER, base]) ** 2
        d1 = np.abs(self.psi[self.CENTER, base + 1]) ** 2
        num = np.real(integrate(self.grid, d0 * d1))
        den = np.sqrt(np.real(integrate(self.grid, d0 ** 2))
                      * np.real(integrate(self.grid, d1 ** 2)))
        return num / den

    def correlator_inputs(self, C, window_sigmas=8.0, window=None):
        """Snapshot of everything the correlator evaluation needs."""
        from .correlators import CorrelatorInputs

        grads = self.phase_gradients()
        m = self.grid.n_r * self.grid.n_z
        return CorrelatorInputs(
            weights=self.grid.weights.reshape(m),
            phibar=self.psi[self.CENTER].reshape(4, m),
            grad=grads.reshape(4, 2, m),
            theta_u=np.array([self.theta(1, 0), self.theta(0, 1)]),
            nbar=self.nbar,
            C=np.asarray(C, dtype=complex),
            window_sigmas=window_sigmas,
            window=window,
        )


def central_fock(n_a, n_b):
    """Even split of the well populations (ceil/floor for odd numbers)."""
    return FockVector((n_a + 1) // 2, n_a // 2, (n_b + 1) // 2, n_b // 2)


def init_trajectories(grid, g4, n_a, n_b, psi0, beta=1):
    """Build the nine-configuration set right after the pulse.

    psi0 is the (4, n_r, n_z) stack of prepared wavefunctions; components 0
    and 1 of each well must hold the same per-well spatial wavefunction (the
    pulse populates both internal states in the ground-state orbital).
    """
    nbar = central_fock(n_a, n_b)
    if beta < 1 or int(beta) != beta:
        raise DisplacementError("beta must be a positive integer")
    nmin = min(nbar)
    if beta > nmin / 10.0:
        raise DisplacementError(
            f"beta={beta} too large for central occupations {tuple(nbar)} "
            f"(require beta <= {nmin / 10.0:g})")
    return TrajectorySet(grid, g4, nbar, beta, psi0)
