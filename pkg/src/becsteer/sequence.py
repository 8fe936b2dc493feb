"""Seven-step measurement protocol: prepare, pulse, separate, interact, recombine.

Two wells sit on the z axis.  After a pi/2 pulse puts every atom in an equal
superposition of the two internal states, the state-0 traps are translated so
that the state-0 cloud of well a overlaps the (stationary) state-1 cloud of
well b; they interact for a hold time and are brought back, after which the
collective-spin moments and the steering witness are evaluated.
"""

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .grid import build_grid
from .meanfield import PhysicalParams, ground_state, stable_dt
from .fockflow import init_trajectories
from .correlators import spin_moments, epr_witness

SQ2 = math.sqrt(2.0)


@dataclass
class ProtocolConfig:
    """All knobs of one protocol run (lengths in oscillator units)."""

    n_a: int
    n_b: int
    dz_max: float                 # maximum well displacement
    t_ramp: float                 # duration of each transport ramp
    t_int: tuple = (0.0,)         # hold times to scan
    pulse_phase_a: float = 0.0
    pulse_phase_b: float = 0.0
    move_mode: str = "mirror"     # "mirror": both 0-traps move; "single": a0 only
    beta: int = 1
    window_sigmas: float = 8.0
    # spatial grid
    n_r: int = 28
    dr: float = 1.0 / 7.0
    dz: float = 1.0 / 7.0
    z_margin: float = 4.5
    # time stepping; None picks the stability-rule step at prep time
    dt: float = None
    sample_stride: int = 0        # if > 0, evaluate the witness every so many steps
    snapshot_path: str = None

    def __post_init__(self):
        if self.n_a <= 0 or self.n_b <= 0:
            raise ValueError("atom numbers must be positive")
        if self.dz_max <= 0:
            raise ValueError("dz_max must be positive")
        if self.t_ramp <= 0:
            raise ValueError("t_ramp must be positive")
        if any(t < 0 for t in self.t_int):
            raise ValueError("t_int values must be non-negative")
        if self.move_mode not in ("mirror", "single"):
            raise ValueError(f"unknown move_mode {self.move_mode!r}")

    def build_grid(self):
        z_hi = self.dz_max / 2.0 + self.z_margin
        if self.move_mode == "mirror":
            z_hi += self.dz_max
        z_lo = -self.dz_max / 2.0 - self.z_margin
        n_z = int(math.ceil((z_hi - z_lo) / self.dz))
        return build_grid(self.n_r, n_z, self.dr, self.dz, z_lo)

    def pulse_amplitudes(self):
        """Pulse coefficients of (a0, a1, b0, b1): equal weights, per-well phase."""
        return np.array([1.0, np.exp(1j * self.pulse_phase_a),
                         1.0, np.exp(1j * self.pulse_phase_b)]) / SQ2


def ramp_displacement(t, t_ramp, dz_max):
    """Smooth tanh transport ramp; exact endpoints, clamped outside [0, t_ramp]."""
    t = min(max(t, 0.0), t_ramp)
    th = math.tanh
    return dz_max * (th(4.0 * t / t_ramp - 2.0) - th(-2.0)) / (th(2.0) - th(-2.0))


def displacement_schedule(t, t_ramp, t_int, dz_max):
    """Forward ramp, hold, mirrored backward ramp."""
    if t <= t_ramp:
        return ramp_displacement(t, t_ramp, dz_max)
    if t <= t_ramp + t_int:
        return dz_max
    return ramp_displacement(2.0 * t_ramp + t_int - t, t_ramp, dz_max)


def component_potentials(grid, cfg, t, t_int):
    """Per-component harmonic traps at protocol time t, shape (4, n_r, n_z).

    Well a sits at z = -dz_max/2, well b at +dz_max/2.  The state-0 traps
    translate by +dz(t) so that a0 ends up on top of b1; in "mirror" mode b0
    moves out of the way symmetrically, in "single" mode only a0 moves.
    """
    d = displacement_schedule(t, cfg.t_ramp, t_int, cfg.dz_max)
    za = -cfg.dz_max / 2.0
    zb = +cfg.dz_max / 2.0
    centers = [za + d, za, zb + (d if cfg.move_mode == "mirror" else 0.0), zb]
    r2 = grid.r[:, None] ** 2
    out = np.empty((4,) + grid.shape)
    for a, zc in enumerate(centers):
        out[a] = 0.5 * (r2 + (grid.z[None, :] - zc) ** 2)
    return out


def well_separation(grid, psi):
    """Normalized density overlap between the two wells (a0 vs b0 clouds)."""
    d_a = np.abs(psi[0]) ** 2
    d_b = np.abs(psi[2]) ** 2
    num = np.real(np.sum(grid.weights * d_a * d_b))
    den = math.sqrt(np.real(np.sum(grid.weights * d_a ** 2))
                    * np.real(np.sum(grid.weights * d_b ** 2)))
    return num / den


def prepare_initial(cfg, params=None, grid=None, tol=1e-8):
    """Ground state before the pulse: all atoms in state 0 of each well."""
    if params is None:
        params = PhysicalParams()
    if grid is None:
        grid = cfg.build_grid()
    g4 = params.g4()
    pots = component_potentials(grid, cfg, 0.0, 0.0)
    ns = np.array([cfg.n_a, 0.0, cfg.n_b, 0.0])
    state = ground_state(grid, ns, pots, g4, tol=tol)
    # after the instantaneous pulse each internal state inherits the prepared
    # orbital of its well
    psi0 = state.psi.copy()
    psi0[1] = psi0[0]
    psi0[3] = psi0[2]
    return grid, g4, psi0, state


@dataclass
class PointResult:
    """One hold-time point of the protocol scan."""

    t_int: float
    t_total: float
    result: object = None         # EPRResult, None on failure
    moments: object = None        # SpinMoments
    separation_start: float = float("nan")
    separation_end: float = float("nan")
    error: str = None
    series: list = dc_field(default_factory=list)  # (t, EPRResult) samples


def _measure(traj, C, cfg, t_int):
    inp = traj.correlator_inputs(C, window_sigmas=cfg.window_sigmas)
    m = spin_moments(inp)
    m.t = traj.t
    res = epr_witness(m)
    res.t = traj.t
    res.overlap_a = traj.density_overlap("a")
    res.overlap_b = traj.density_overlap("b")
    return m, res


def run_point(cfg, t_int, params=None, prep=None):
    """Run the full protocol for one hold time and measure at the end."""
    if prep is None:
        prep = prepare_initial(cfg, params)
    grid, g4, psi0, _ = prep
    C = cfg.pulse_amplitudes()
    traj = init_trajectories(grid, g4, cfg.n_a, cfg.n_b, psi0, beta=cfg.beta)

    t_total = 2.0 * cfg.t_ramp + t_int
    dt = cfg.dt
    if dt is None:
        pots0 = component_potentials(grid, cfg, 0.0, t_int)
        dt = stable_dt(grid, g4, pots0, psi0,
                       np.array([f.as_array() for f in traj.focks]).max(axis=0))
    n_steps = max(1, int(math.ceil(t_total / dt)))
    dt = t_total / n_steps

    def pots(t):
        return component_potentials(grid, cfg, t, t_int)

    point = PointResult(t_int=t_int, t_total=t_total,
                        separation_start=well_separation(grid, psi0))
    for step in range(n_steps):
        traj.advance(pots, dt)
        if cfg.sample_stride and (step + 1) % cfg.sample_stride == 0 \
                and step + 1 < n_steps:
            _, res = _measure(traj, C, cfg, t_int)
            point.series.append((traj.t, res))
    m, res = _measure(traj, C, cfg, t_int)
    point.moments = m
    point.result = res
    point.separation_end = well_separation(grid, traj.psi[traj.CENTER])
    if cfg.snapshot_path:
        from .meanfield import save_snapshot
        save_snapshot(cfg.snapshot_path, grid, traj.psi[traj.CENTER],
                      traj.nbar, traj.t)
    return point


def run_protocol(cfg, params=None, prep=None, progress=None):
    """Scan all hold times; a failed point is recorded, not fatal."""
    if prep is None:
        prep = prepare_initial(cfg, params)
    points = []
    for t_int in cfg.t_int:
        try:
            point = run_point(cfg, t_int, params=params, prep=prep)
        except Exception as exc:  # noqa: BLE001 - per-point fault isolation
            point = PointResult(t_int=t_int, t_total=2.0 * cfg.t_ramp + t_int,
                                error=f"{type(exc).__name__}: {exc}")
        points.append(point)
        if progress is not None:
            progress(point)
    return points
