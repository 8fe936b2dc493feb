"""Quantum averages over the multi-Fock-state superposition.

After the pulse the many-body state is a binomial superposition over the
within-well number splittings; each splitting carries its own set of four
wavefunctions.  Under the linearization in the splitting (phase gradients and
a displacement-linear reduced phase), the average of any one- or two-body
operator collapses to a small window of splitting terms around the mean,
evaluated here with vectorized slot integrals.

A brute-force evaluator that walks the full superposition with explicit
per-configuration wavefunction arrays is provided for cross-checking at
small atom number; it shares no arithmetic with the fast path.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .meanfield import FockVector


class TruncationError(RuntimeError):
    pass


class WitnessUndefinedError(RuntimeError):
    pass


@dataclass(frozen=True)
class MultiIndex:
    """Normal-ordered two-slot operator term.

    Represents  prod_a psi_a^dag(r)^gamma_a psi_a(r')^dag^gamma'_a
                prod_a psi_a(r)^delta_a psi_a(r')^delta'_a
    integrated over r and r'.  Single-position operators set the primed
    exponents to zero.
    """

    gamma: tuple
    delta: tuple
    gamma_p: tuple = (0, 0, 0, 0)
    delta_p: tuple = (0, 0, 0, 0)

    def __post_init__(self):
        for e in (self.gamma, self.delta, self.gamma_p, self.delta_p):
            if len(e) != 4 or any(x < 0 or int(x) != x for x in e):
                raise ValueError(f"exponents must be four non-negative ints, got {e}")

    @property
    def gamma_tot(self):
        return tuple(g + gp for g, gp in zip(self.gamma, self.gamma_p))

    @property
    def delta_tot(self):
        return tuple(d + dp for d, dp in zip(self.delta, self.delta_p))

    @property
    def two_position(self):
        return any(self.gamma_p) or any(self.delta_p)

    def conserves_wells(self):
        g, d = self.gamma_tot, self.delta_tot
        return (g[0] + g[1] == d[0] + d[1]) and (g[2] + g[3] == d[2] + d[3])


@dataclass
class CorrelatorInputs:
    """Flattened snapshot of the fields needed to evaluate averages.

    weights : (M,) volume weights
    phibar  : (4, M) central wavefunctions
    grad    : (4, 2, M) phase derivative of component alpha w.r.t. a unit
              transfer in well a (index 0) or b (index 1)
    theta_u : (2,) reduced phase per unit transfer along each well
    nbar    : central Fock configuration
    C       : (4,) pulse amplitudes of the four components
    """

    weights: np.ndarray
    phibar: np.ndarray
    grad: np.ndarray
    theta_u: np.ndarray
    nbar: FockVector
    C: np.ndarray
    window_sigmas: float = 8.0
    window: tuple = None
    edge_tol: float = 1e-12
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if np.any(np.abs(self.C) < 1e-300):
            raise ValueError("pulse amplitudes must all be nonzero")
        if self.window is None:
            wa = math.ceil(0.5 * self.window_sigmas * math.sqrt(max(self.nbar.n_a, 1)))
            wb = math.ceil(0.5 * self.window_sigmas * math.sqrt(max(self.nbar.n_b, 1)))
            self.window = (wa, wb)

    def theta(self, p_a, p_b):
        return p_a * self.theta_u[0] + p_b * self.theta_u[1]

    def displaced_overlap(self, a, p_a, p_b):
        """<phi_a(N + Delta)|phi_a(N)> for a transfer displacement (p_a, p_b)."""
        dens = np.abs(self.phibar[a]) ** 2
        phase = p_a * self.grad[a, 0] + p_b * self.grad[a, 1]
        return complex(np.sum(self.weights * dens * np.exp(-1j * phase)))

    # -- window machinery ----------------------------------------------------

    def _well_ks(self, well, dplus):
        """Splitting offsets k (relative to nbar of the 0 component) kept in
        the window for one well, with their binomial weights.

        The state demands N_s0 >= dplus_s0 and N_s1 >= dplus_s1 for the
        annihilators to act; physical bounds 0 <= N_s0 <= N_s."""
        if well == "a":
            n0, n1, w = self.nbar.n_a0, self.nbar.n_a1, self.window[0]
            c0, c1 = self.C[0], self.C[1]
            d0, d1 = dplus[0], dplus[1]
        else:
            n0, n1, w = self.nbar.n_b0, self.nbar.n_b1, self.window[1]
            c0, c1 = self.C[2], self.C[3]
            d0, d1 = dplus[2], dplus[3]
        n = n0 + n1
        lo = max(-w, d0 - n0)
        hi = min(w, n1 - d1)
        if lo > hi:
            return np.zeros(0, dtype=int), np.zeros(0)
        ks = np.arange(lo, hi + 1)
        # exact coefficient weight N! / ((N_s0 - d0)! (N_s1 - d1)!) |C|^{2 N};
        # this absorbs both the binomial amplitudes and the ladder factorials
        logw = (gammaln(n + 1)
                - gammaln(n0 + ks - d0 + 1) - gammaln(n1 - ks - d1 + 1)
                + 2.0 * (n0 + ks) * math.log(abs(c0))
                + 2.0 * (n1 - ks) * math.log(abs(c1)))
        wts = np.exp(logw)
        # a significant weight at a window edge that actually truncates the
        # physical range means the window is too small
        top = wts.max()
        if lo == -w and lo > d0 - n0 and wts[0] > self.edge_tol * top:
            raise TruncationError(
                f"well {well} window [-{w},{w}] truncates: lower edge weight "
                f"{wts[0] / top:.2e} above {self.edge_tol:.0e}")
        if hi == w and hi < n1 - d1 and wts[-1] > self.edge_tol * top:
            raise TruncationError(
                f"well {well} window [-{w},{w}] truncates: upper edge weight "
                f"{wts[-1] / top:.2e} above {self.edge_tol:.0e}")
        return ks, wts

    def _slot_table(self, gs, ds, m_a, m_b, ks_a, ks_b):
        """Window table of one slot integral.

        J[ia, ib] = sum_x w(x) B(x) exp(i m . Ybar(x))
                    exp(i (k_a[ia] Xt_a(x) + k_b[ib] Xt_b(x)))
        with B = prod conj(phibar)^gs phibar^ds,
        Xt_s = sum_a (ds_a - gs_a) grad[a, s], Ybar_s = sum_a gs_a grad[a, s].
        """
        key = (gs, ds, m_a, m_b, ks_a[0], ks_a[-1], ks_b[0], ks_b[-1])
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        base = self.weights.astype(complex).copy()
        for a in range(4):
            if gs[a]:
                base *= np.conj(self.phibar[a]) ** gs[a]
            if ds[a]:
                base *= self.phibar[a] ** ds[a]
        ybar_a = sum(gs[a] * self.grad[a, 0] for a in range(4))
        ybar_b = sum(gs[a] * self.grad[a, 1] for a in range(4))
        base *= np.exp(1j * (m_a * ybar_a + m_b * ybar_b))
        xt_a = sum((ds[a] - gs[a]) * self.grad[a, 0] for a in range(4))
        xt_b = sum((ds[a] - gs[a]) * self.grad[a, 1] for a in range(4))
        ea = np.exp(1j * np.multiply.outer(ks_a.astype(float), xt_a))
        eb = np.exp(1j * np.multiply.outer(ks_b.astype(float), xt_b))
        table = (ea * base) @ eb.T
        self._cache[key] = table
        return table


def fock_sum_average(inp, idx):
    """Average of a MultiIndex operator term over the multi-Fock superposition.

    Fast path: the sum over number splittings is restricted to the binomial
    window, the splitting dependence of the wavefunctions enters only through
    the phase-gradient fields, and the reduced-phase / overlap factors are
    global to the term.
    """
    if not idx.conserves_wells():
        return 0.0 + 0.0j
    gt, dt = idx.gamma_tot, idx.delta_tot
    # transfer displacement of the bra splitting relative to the ket
    p_a = gt[0] - dt[0]
    p_b = gt[2] - dt[2]
    delta = (p_a, -p_a, p_b, -p_b)

    ks_a, w_a = inp._well_ks("a", dt)
    ks_b, w_b = inp._well_ks("b", dt)
    if ks_a.size == 0 or ks_b.size == 0:
        return 0.0 + 0.0j

    # global factors: reduced phase, the residue of the amplitude-phase
    # difference against the spectator-atom overlaps (the splitting dependence
    # cancels exactly between the two), and the pulse amplitudes of the
    # transferred atoms
    glob = np.exp(1j * inp.theta(p_a, p_b))
    for a in range(4):
        expo = -(gt[a] + dt[a] - 1) / 2.0
        if expo != 0.0:
            glob *= inp.displaced_overlap(a, p_a, p_b) ** expo
        if delta[a] != 0:
            glob *= np.conj(inp.C[a]) ** delta[a]

    m_a = dt[0] - gt[0]
    m_b = dt[2] - gt[2]
    j1 = inp._slot_table(idx.gamma, idx.delta, m_a, m_b, ks_a, ks_b)
    if idx.two_position:
        j2 = inp._slot_table(idx.gamma_p, idx.delta_p, m_a, m_b, ks_a, ks_b)
        core = np.einsum("i,j,ij,ij->", w_a, w_b, j1, j2)
    else:
        core = np.einsum("i,j,ij->", w_a, w_b, j1)
    return complex(glob * core)


def brute_force_average(inp, idx):
    """Reference evaluator: explicit sum over every number splitting.

    Builds the per-splitting wavefunction arrays, takes overlaps by direct
    quadrature and exact factorial arithmetic, and carries the amplitude
    phase through the reduced-phase/overlap identity.  Cost is quadratic in
    the atom numbers; meant for small systems only.
    """
    if not idx.conserves_wells():
        return 0.0 + 0.0j
    gt, dt = idx.gamma_tot, idx.delta_tot
    p_a = gt[0] - dt[0]
    p_b = gt[2] - dt[2]
    delta = np.array([p_a, -p_a, p_b, -p_b])
    nbar = inp.nbar
    n_a, n_b = nbar.n_a, nbar.n_b
    w = inp.weights
    C = inp.C

    def fields(k_a, k_b):
        ph = k_a * inp.grad[:, 0] + k_b * inp.grad[:, 1]
        return inp.phibar * np.exp(1j * ph)

    total = 0.0 + 0.0j
    for na0 in range(n_a + 1):
        for nb0 in range(n_b + 1):
            occ = np.array([na0, n_a - na0, nb0, n_b - nb0])
            occp = occ + delta
            if np.any(occ - np.array(dt) < 0) or np.any(occp - np.array(gt) < 0):
                continue
            if np.any(occp < 0) or occp[0] > n_a or occp[2] > n_b:
                continue
            k_a = na0 - nbar.n_a0
            k_b = nb0 - nbar.n_b0
            ket = fields(k_a, k_b)
            bra = fields(k_a + p_a, k_b + p_b)
            # superposition amplitudes (multinomial and pulse factors)
            amp = math.sqrt(math.factorial(n_a) * math.factorial(n_b)
                            / math.prod(math.factorial(int(n)) for n in occ))
            ampp = math.sqrt(math.factorial(n_a) * math.factorial(n_b)
                             / math.prod(math.factorial(int(n)) for n in occp))
            cfac = math.prod(C[al] ** int(occ[al]) for al in range(4))
            cfacp = math.prod(np.conj(C[al]) ** int(occp[al]) for al in range(4))
            # ladder matrix elements
            lad = math.prod(
                math.sqrt(math.factorial(int(occ[al]))
                          / math.factorial(int(occ[al] - dt[al])))
                * math.sqrt(math.factorial(int(occp[al]))
                            / math.factorial(int(occp[al] - gt[al])))
                for al in range(4))
            # slot integrals by quadrature
            s1 = w.astype(complex).copy()
            for al in range(4):
                if idx.gamma[al]:
                    s1 *= np.conj(bra[al]) ** idx.gamma[al]
                if idx.delta[al]:
                    s1 *= ket[al] ** idx.delta[al]
            s1 = s1.sum()
            if idx.two_position:
                s2 = w.astype(complex).copy()
                for al in range(4):
                    if idx.gamma_p[al]:
                        s2 *= np.conj(bra[al]) ** idx.gamma_p[al]
                    if idx.delta_p[al]:
                        s2 *= ket[al] ** idx.delta_p[al]
                s2 = s2.sum()
            else:
                s2 = 1.0
            # spectator-atom overlaps
            ov = np.array([np.sum(w * np.conj(bra[al]) * ket[al])
                           for al in range(4)])
            spect = math.prod(ov[al] ** int(occ[al] - dt[al]) for al in range(4))
            # amplitude-phase difference via the reduced-phase identity
            phase = np.exp(1j * inp.theta(p_a, p_b))
            for al in range(4):
                expo = -(occ[al] + (delta[al] - 1) / 2.0)
                phase *= ov[al] ** expo
            total += ampp * amp * cfacp * cfac * lad * s1 * s2 * spect * phase
    return complex(total)


# ---------------------------------------------------------------------------
# spin operators and their first and second moments

def _ladder_terms(op, well):
    """One-body spin operator as [(coeff, create_comp, annihilate_comp)]."""
    base = 0 if well == "a" else 2
    if op == "x":
        return [(0.5, base, base + 1), (0.5, base + 1, base)]
    if op == "y":
        return [(-0.5j, base, base + 1), (0.5j, base + 1, base)]
    if op == "z":
        return [(0.5, base + 1, base + 1), (-0.5, base, base)]
    raise ValueError(f"unknown spin axis {op!r}")


def _unit(i):
    e = [0, 0, 0, 0]
    e[i] = 1
    return tuple(e)


def _pair_exponents(c1, a1, c2, a2):
    """Exponent tuples of psi^dag_c1 psi_a1 psi^dag_c2 psi_a2 normal ordered.

    Returns (double-slot index, contact index or None).  The commutator
    [psi_a1(r), psi^dag_c2(r')] = delta_{a1 c2} delta(r - r') produces the
    single-position contact piece.
    """
    g = _unit(c1)
    d = _unit(a1)
    gp = _unit(c2)
    dp = _unit(a2)
    double = MultiIndex(gamma=g, delta=d, gamma_p=gp, delta_p=dp)
    contact = MultiIndex(gamma=_unit(c1), delta=_unit(a2)) if a1 == c2 else None
    return double, contact


def operator_mean(inp, terms, evaluator=fock_sum_average):
    """Average of a one-body operator given as ladder terms."""
    out = 0.0 + 0.0j
    for coeff, c, a in terms:
        out += coeff * evaluator(inp, MultiIndex(gamma=_unit(c), delta=_unit(a)))
    return out


def operator_pair_mean(inp, terms1, terms2, evaluator=fock_sum_average):
    """Average of the product O1 O2 of two one-body operators."""
    out = 0.0 + 0.0j
    for c1f, c1, a1 in terms1:
        for c2f, c2, a2 in terms2:
            double, contact = _pair_exponents(c1, a1, c2, a2)
            val = evaluator(inp, double)
            if contact is not None:
                val += evaluator(inp, contact)
            out += c1f * c2f * val
    return out


_AXES = [("x", "a"), ("y", "a"), ("z", "a"), ("x", "b"), ("y", "b"), ("z", "b")]


@dataclass
class SpinMoments:
    """First and (symmetrized, non-central) second moments of the six
    collective spin components (Sx_a, Sy_a, Sz_a, Sx_b, Sy_b, Sz_b)."""

    mean: np.ndarray          # (6,)
    second: np.ndarray        # (6, 6) real, <{S_i S_j}/2>
    n_a: int
    n_b: int
    t: float = 0.0

    @property
    def cov(self):
        return self.second - np.outer(self.mean, self.mean)

    def phase(self, well):
        """Mean-spin azimuthal angle of one well."""
        o = 0 if well == "a" else 3
        return math.atan2(self.mean[o + 1], self.mean[o])

    def spin_length(self, well):
        """|<S_perp>| of one well (the planar mean-spin length)."""
        o = 0 if well == "a" else 3
        return math.hypot(self.mean[o], self.mean[o + 1])

    def contrast(self, well):
        n = self.n_a if well == "a" else self.n_b
        return 2.0 * self.spin_length(well) / n


def spin_moments(inp, evaluator=fock_sum_average, herm_tol=1e-6):
    """All first and second moments of the collective spins of both wells."""
    terms = [_ladder_terms(op, well) for op, well in _AXES]
    mean = np.empty(6)
    scale = 0.5 * (inp.nbar.n_a + inp.nbar.n_b)
    for i in range(6):
        v = operator_mean(inp, terms[i], evaluator)
        if abs(v.imag) > herm_tol * max(scale, 1.0):
            raise RuntimeError(f"spin mean has imaginary part {v.imag:.3e}")
        mean[i] = v.real
    second = np.empty((6, 6))
    for i in range(6):
        for j in range(i, 6):
            vij = operator_pair_mean(inp, terms[i], terms[j], evaluator)
            if j > i:
                vji = operator_pair_mean(inp, terms[j], terms[i], evaluator)
            else:
                vji = vij
            sym = 0.5 * (vij + vji)
            if abs(sym.imag) > herm_tol * max(scale * scale, 1.0):
                raise RuntimeError(
                    f"symmetrized second moment ({i},{j}) has imaginary part "
                    f"{sym.imag:.3e}")
            second[i, j] = second[j, i] = sym.real
    return SpinMoments(mean=mean, second=second,
                       n_a=inp.nbar.n_a, n_b=inp.nbar.n_b)


# ---------------------------------------------------------------------------
# quadratures and the steering witness

def _quad_vectors(m):
    """Orthonormal basis (S_yphi, S_z) per well in the 6-axis space, after
    unrotating the mean spin to the x axis."""
    phi_a = m.phase("a")
    phi_b = m.phase("b")
    v = np.zeros((4, 6))
    v[0, 0], v[0, 1] = -math.sin(phi_a), math.cos(phi_a)   # S_yphi^a
    v[1, 2] = 1.0                                          # S_z^a
    v[2, 3], v[2, 4] = -math.sin(phi_b), math.cos(phi_b)   # S_yphi^b
    v[3, 5] = 1.0                                          # S_z^b
    return v


def quadrature_moments(m, alpha, beta):
    """Variances and covariances of the quadratures S_alpha^a, S_beta^b and
    their conjugates (alpha, beta measured from S_yphi toward S_z)."""
    v = _quad_vectors(m)
    cov4 = v @ m.cov @ v.T
    ca, sa = math.cos(alpha), math.sin(alpha)
    cb, sb = math.cos(beta), math.sin(beta)
    ua = np.array([ca, sa])
    ua90 = np.array([-sa, ca])
    ub = np.array([cb, sb])
    ub90 = np.array([-sb, cb])
    A = cov4[:2, :2]
    B = cov4[2:, 2:]
    X = cov4[:2, 2:]
    return {
        "var_a": float(ua @ A @ ua),
        "var_a90": float(ua90 @ A @ ua90),
        "var_b": float(ub @ B @ ub),
        "var_b90": float(ub90 @ B @ ub90),
        "cov_ab": float(ua @ X @ ub),
        "cov_ab90": float(ua90 @ X @ ub90),
    }


@dataclass
class EPRResult:
    e_epr: float
    alpha: float
    beta: float
    spin_len_a: float
    spin_len_b: float
    contrast_a: float
    contrast_b: float
    inferred_var_1: float
    inferred_var_2: float
    t: float = 0.0
    overlap_a: float = float("nan")
    overlap_b: float = float("nan")


def _witness_sq(cov4, len_b, angles_a, angles_b):
    """Vectorized squared witness over angle arrays (broadcast together)."""
    ca, sa = np.cos(angles_a), np.sin(angles_a)
    cb, sb = np.cos(angles_b), np.sin(angles_b)
    A, B, X = cov4[:2, :2], cov4[2:, 2:], cov4[:2, 2:]

    def quad(u0, u1, M, v0, v1):
        return (u0 * (M[0, 0] * v0 + M[0, 1] * v1)
                + u1 * (M[1, 0] * v0 + M[1, 1] * v1))

    var_a = quad(ca, sa, A, ca, sa)
    var_a90 = quad(-sa, ca, A, -sa, ca)
    var_b = quad(cb, sb, B, cb, sb)
    var_b90 = quad(-sb, cb, B, -sb, cb)
    cov_ab = quad(ca, sa, X, cb, sb)
    cov_ab90 = quad(-sa, ca, X, -sb, cb)
    num = 4.0 * (var_a * var_b - cov_ab ** 2) * (var_a90 * var_b90 - cov_ab90 ** 2)
    den = var_a * var_a90 * len_b ** 2
    return num / den


def _golden_min(f, lo, hi, tol):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def epr_witness(m, angle_tol=1e-6, min_contrast=1e-6):
    """Minimize the product steering witness over both quadrature angles.

    Coarse 2-degree grid scan over [0, pi)^2 followed by coordinatewise
    golden-section refinement.  Raises WitnessUndefinedError when the mean
    spin of the inferring well has collapsed (witness denominator ~ 0).
    """
    len_b = m.spin_length("b")
    if 2.0 * len_b / max(m.n_b, 1) < min_contrast:
        raise WitnessUndefinedError(
            f"well-b contrast {2.0 * len_b / max(m.n_b, 1):.2e} below "
            f"{min_contrast:.0e}; witness denominator vanishes")
    v = _quad_vectors(m)
    cov4 = v @ m.cov @ v.T

    grid = np.arange(0.0, math.pi, math.pi / 90.0)
    aa, bb = np.meshgrid(grid, grid, indexing="ij")
    vals = _witness_sq(cov4, len_b, aa, bb)
    i, j = np.unravel_index(np.argmin(vals), vals.shape)
    alpha, beta = grid[i], grid[j]
    half = math.pi / 90.0

    for _ in range(8):
        alpha = _golden_min(
            lambda x: _witness_sq(cov4, len_b, np.asarray(x), np.asarray(beta)),
            alpha - half, alpha + half, angle_tol)
        beta = _golden_min(
            lambda x: _witness_sq(cov4, len_b, np.asarray(alpha), np.asarray(x)),
            beta - half, beta + half, angle_tol)
        half = max(10.0 * angle_tol, half * 0.25)

    e2 = float(_witness_sq(cov4, len_b, np.asarray(alpha), np.asarray(beta)))
    q = quadrature_moments(m, alpha, beta)
    inf1 = q["var_b"] - q["cov_ab"] ** 2 / q["var_a"]
    inf2 = q["var_b90"] - q["cov_ab90"] ** 2 / q["var_a90"]
    return EPRResult(
        e_epr=math.sqrt(max(e2, 0.0)),
        alpha=alpha % math.pi,
        beta=beta % math.pi,
        spin_len_a=m.spin_length("a"),
        spin_len_b=len_b,
        contrast_a=m.contrast("a"),
        contrast_b=m.contrast("b"),
        inferred_var_1=inf1,
        inferred_var_2=inf2,
        t=m.t,
    )
