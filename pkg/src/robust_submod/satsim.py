"""LEO constellation sensing simulation.

A Walker-Delta constellation of circular-orbit satellites observes ground
points on a spherical rotating Earth. Each ground point carries a chaotic
Lorenz 63 process tracked by an unscented Kalman filter; sensing tasks
score a satellite subset by the Fisher-information gain it buys for the
filters, plus one global grid-coverage task. Together these form the
multi-task families the robust solvers run on.

Units: km, seconds, radians.
"""

import math
from dataclasses import dataclass

import numpy as np

from .bitset import iter_bits, popcount
from .errors import DomainError, NumericalError
from .objective import TaskFamily

MU_EARTH = 398600.4418          # km^3 / s^2
EARTH_RADIUS = 6371.0           # km, spherical model
EARTH_ROTATION_RATE = 7.2921150e-5  # rad / s, sidereal


# ---------------------------------------------------------------------------
# constellation geometry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WalkerDelta:
    """Walker-Delta pattern i:T/P/F on circular orbits.

    total_sats satellites are spread over planes equally spaced in RAAN;
    slots within a plane are equally spaced in argument of latitude, and
    consecutive planes are phase-shifted by 2*pi*phasing/total_sats.
    Satellite k = plane * (T/P) + slot.
    """

    inclination: float
    total_sats: int
    planes: int
    phasing: int
    semi_major_axis: float
    fov_half_angle: float

    def __post_init__(self):
        if self.total_sats < 1 or self.planes < 1 or self.total_sats % self.planes:
            raise DomainError(f"planes must evenly divide satellites, got {self.total_sats}/{self.planes}")
        if not 0 <= self.phasing < self.total_sats:
            raise DomainError(f"phasing must lie in [0, {self.total_sats}), got {self.phasing}")
        if not 0.0 <= self.inclination <= math.pi:
            raise DomainError(f"inclination must lie in [0, pi], got {self.inclination!r}")
        if self.semi_major_axis <= EARTH_RADIUS:
            raise DomainError("semi-major axis must exceed the Earth radius")
        if not 0.0 < self.fov_half_angle < math.pi / 2:
            raise DomainError(f"fov half-angle must lie in (0, pi/2), got {self.fov_half_angle!r}")

    @property
    def sats_per_plane(self) -> int:
        return self.total_sats // self.planes

    @property
    def mean_motion(self) -> float:
        return math.sqrt(MU_EARTH / self.semi_major_axis ** 3)


def satellite_positions(walker: WalkerDelta, t: float) -> np.ndarray:
    """ECEF positions (total_sats, 3) at time t seconds past epoch.

    The inertial and Earth-fixed frames coincide at t = 0; afterwards the
    Earth-fixed frame is rotated by the sidereal rate.
    """
    spp = walker.sats_per_plane
    k = np.arange(walker.total_sats)
    plane = k // spp
    slot = k % spp
    raan = 2.0 * math.pi * plane / walker.planes
    arg_lat = (2.0 * math.pi * slot / spp
               + 2.0 * math.pi * walker.phasing * plane / walker.total_sats
               + walker.mean_motion * t)
    ci, si = math.cos(walker.inclination), math.sin(walker.inclination)
    cu, su = np.cos(arg_lat), np.sin(arg_lat)
    co, so = np.cos(raan), np.sin(raan)
    eci = walker.semi_major_axis * np.stack([
        co * cu - so * su * ci,
        so * cu + co * su * ci,
        su * si,
    ], axis=1)
    theta = EARTH_ROTATION_RATE * t
    ct, st = math.cos(theta), math.sin(theta)
    rot = np.array([[ct, st, 0.0], [-st, ct, 0.0], [0.0, 0.0, 1.0]])
    return eci @ rot.T


def visibility(sat_positions: np.ndarray, points: np.ndarray, fov_half_angle: float) -> np.ndarray:
    """Boolean matrix (n_sats, n_points): which satellite sees which point.

    A point is visible when it lies inside the closed nadir cone of
    half-angle fov_half_angle AND on the satellite's side of the horizon
    (dot(p, s) >= R^2, i.e. the satellite is above the point's local
    tangent plane). The second test rejects e.g. the antipodal point,
    which the cone alone would accept.
    """
    s = np.atleast_2d(np.asarray(sat_positions, dtype=float))
    p = np.atleast_2d(np.asarray(points, dtype=float))
    rel = p[None, :, :] - s[:, None, :]
    rel_norm = np.linalg.norm(rel, axis=2)
    s_norm = np.linalg.norm(s, axis=1)
    # cos of the off-nadir angle; nadir direction is -s
    cos_off = -np.einsum("spk,sk->sp", rel, s) / (rel_norm * s_norm[:, None])
    in_cone = cos_off >= math.cos(fov_half_angle)
    above_horizon = p @ s.T >= EARTH_RADIUS ** 2
    return in_cone & above_horizon.T


def is_visible(sat_position, point, fov_half_angle: float) -> bool:
    return bool(visibility(sat_position, point, fov_half_angle)[0, 0])


def nadir_cap_angular_radius(semi_major_axis: float, fov_half_angle: float) -> float:
    """Geocentric angular radius of the ground cap a nadir cone covers.

    Horizon-limited when the cone is wide enough to miss the sphere.
    """
    if semi_major_axis <= EARTH_RADIUS:
        raise DomainError("semi-major axis must exceed the Earth radius")
    s = (semi_major_axis / EARTH_RADIUS) * math.sin(fov_half_angle)
    if s >= 1.0:
        return math.acos(EARTH_RADIUS / semi_major_axis)
    return math.asin(s) - fov_half_angle


# ---------------------------------------------------------------------------
# coverage grid
# ---------------------------------------------------------------------------

GRID_LON_CELLS = 180
GRID_LAT_CELLS = 90


def grid_cell_centers() -> np.ndarray:
    """Centers of the 2-degree lat/lon grid as ECEF unit*R vectors (16200, 3).

    Ordering is latitude-major: all longitudes of the southernmost band
    first.
    """
    lats = np.deg2rad(np.arange(-89.0, 90.0, 2.0))
    lons = np.deg2rad(np.arange(-179.0, 180.0, 2.0))
    lat_g, lon_g = np.meshgrid(lats, lons, indexing="ij")
    cl = np.cos(lat_g.ravel())
    return EARTH_RADIUS * np.stack([cl * np.cos(lon_g.ravel()),
                                    cl * np.sin(lon_g.ravel()),
                                    np.sin(lat_g.ravel())], axis=1)


def grid_cell_weights() -> np.ndarray:
    """Exact spherical area of each grid cell, normalized to sum to 1.

    Equal-angle cells shrink toward the poles; coverage fractions are
    therefore area-weighted, which is what makes a single satellite's
    covered fraction match the analytic spherical-cap ratio.
    """
    lats = np.deg2rad(np.arange(-89.0, 90.0, 2.0))
    half = np.deg2rad(1.0)
    band = np.sin(lats + half) - np.sin(lats - half)
    w = np.repeat(band / (2.0 * GRID_LON_CELLS), GRID_LON_CELLS).reshape(GRID_LAT_CELLS, GRID_LON_CELLS)
    return (w / w.sum()).ravel()


# ---------------------------------------------------------------------------
# Lorenz 63 ground-point processes
# ---------------------------------------------------------------------------

LORENZ_SIGMA = 10.0
LORENZ_RHO = 28.0
LORENZ_BETA = 8.0 / 3.0


def lorenz_derivative(state, sigma: float = LORENZ_SIGMA, rho: float = LORENZ_RHO,
                      beta: float = LORENZ_BETA) -> np.ndarray:
    x, y, z = state
    return np.array([sigma * (y - x), x * (rho - z) - y, x * y - beta * z])


def rk4_step(deriv, state, dt: float) -> np.ndarray:
    """One classic Runge-Kutta 4 step of the autonomous ODE x' = deriv(x)."""
    state = np.asarray(state, dtype=float)
    k1 = deriv(state)
    k2 = deriv(state + 0.5 * dt * k1)
    k3 = deriv(state + 0.5 * dt * k2)
    k4 = deriv(state + dt * k3)
    return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# ---------------------------------------------------------------------------
# unscented Kalman filter (Merwe sigma points, direct state measurement)
# ---------------------------------------------------------------------------

UKF_ALPHA = 1e-3
UKF_BETA = 2.0
UKF_KAPPA = 0.0
COV_JITTER = 1e-9


@dataclass
class FilterState:
    mean: np.ndarray
    cov: np.ndarray

    def copy(self) -> "FilterState":
        return FilterState(self.mean.copy(), self.cov.copy())


def _repair_covariance(cov: np.ndarray) -> np.ndarray:
    """Symmetrize, then certify SPD via Cholesky, jittering once if needed."""
    sym = 0.5 * (cov + cov.T)
    if not np.all(np.isfinite(sym)):
        raise NumericalError("covariance contains non-finite entries")
    try:
        np.linalg.cholesky(sym)
        return sym
    except np.linalg.LinAlgError:
        pass
    sym = sym + COV_JITTER * np.eye(sym.shape[0])
    try:
        np.linalg.cholesky(sym)
        return sym
    except np.linalg.LinAlgError:
        raise NumericalError("covariance not positive definite after jitter") from None


def sigma_points(mean: np.ndarray, cov: np.ndarray, alpha: float = UKF_ALPHA,
                 kappa: float = UKF_KAPPA):
    """Merwe scaled sigma points and their mean/cov weights."""
    n = mean.size
    lam = alpha * alpha * (n + kappa) - n
    try:
        chol = np.linalg.cholesky((n + lam) * cov)
    except np.linalg.LinAlgError:
        raise NumericalError("covariance not positive definite in sigma-point draw") from None
    points = np.empty((2 * n + 1, n))
    points[0] = mean
    points[1: n + 1] = mean + chol.T
    points[n + 1:] = mean - chol.T
    wm = np.full(2 * n + 1, 1.0 / (2.0 * (n + lam)))
    wc = wm.copy()
    wm[0] = lam / (n + lam)
    wc[0] = wm[0] + (1.0 - alpha * alpha + UKF_BETA)
    return points, wm, wc


def _unscented_moments(points: np.ndarray, wm: np.ndarray, wc: np.ndarray):
    """Mean and covariance of transformed sigma points.

    Sums are anchored at the first point: with weights of magnitude
    1/alpha^2 the naive weighted mean loses ~8 digits to cancellation.
    """
    dev = points - points[0]
    mean_dev = wm @ dev
    mean = points[0] + mean_dev
    centered = dev - mean_dev
    cov = (centered * wc[:, None]).T @ centered
    return mean, cov


def ukf_predict(state: FilterState, dynamics, process_cov: np.ndarray) -> FilterState:
    """Propagate through possibly-nonlinear dynamics via the unscented transform."""
    points, wm, wc = sigma_points(state.mean, state.cov)
    propagated = np.array([dynamics(p) for p in points])
    mean, cov = _unscented_moments(propagated, wm, wc)
    return FilterState(mean, _repair_covariance(cov + process_cov))


def ukf_update(state: FilterState, measurement: np.ndarray, meas_cov: np.ndarray) -> FilterState:
    """Condition on a direct (identity-map) observation of the state.

    For a linear measurement the unscented update collapses to the exact
    Kalman form, which is what is implemented; the unscented machinery is
    reserved for the nonlinear prediction.
    """
    z = np.asarray(measurement, dtype=float)
    if z.shape != state.mean.shape:
        raise DomainError(f"measurement shape {z.shape} != state shape {state.mean.shape}")
    innov_cov = state.cov + meas_cov
    gain = state.cov @ np.linalg.inv(innov_cov)
    mean = state.mean + gain @ (z - state.mean)
    cov = (np.eye(state.mean.size) - gain) @ state.cov
    return FilterState(mean, _repair_covariance(cov))


def ukf_step(state: FilterState, dynamics, measurement, process_cov: np.ndarray,
             meas_cov: np.ndarray) -> FilterState:
    """Predict, then update if a measurement is present (None skips)."""
    pred = ukf_predict(state, dynamics, process_cov)
    if measurement is None:
        return pred
    return ukf_update(pred, measurement, meas_cov)


# ---------------------------------------------------------------------------
# sensing utilities
# ---------------------------------------------------------------------------

def fisher_utility(cov_pred: np.ndarray, m_selected: int, m_full: int, meas_var: float) -> float:
    """Normalized trace reduction bought by m_selected direct observations.

    With prior covariance P and m independent identity measurements of
    variance r, the Fisher information is F_m = P^{-1} + (m/r) I and the
    utility is Tr(P - F_m^{-1}) relative to the same quantity for m_full
    observers. In the eigenbasis of P each eigenvalue d contributes
    m d^2 / (r + m d), exactly zero at m = 0. Returns 0 when no
    full-constellation observer exists.
    """
    if m_selected < 0 or m_full < m_selected:
        raise DomainError("need 0 <= m_selected <= m_full")
    if meas_var <= 0.0:
        raise DomainError(f"measurement variance must be positive, got {meas_var!r}")
    if m_full == 0:
        return 0.0
    d = np.linalg.eigvalsh(0.5 * (cov_pred + cov_pred.T))
    if d.min() <= 0.0:
        raise NumericalError("prior covariance must be positive definite")

    def raw(m: int) -> float:
        return float(np.sum(m * d * d / (meas_var + m * d)))

    return raw(m_selected) / raw(m_full)


# ---------------------------------------------------------------------------
# scenario
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioConfig:
    walker: WalkerDelta
    n_reading_tasks: int = 5
    points_per_task: int = 5
    step_seconds: float = 60.0
    measurement_var: float = 1.0
    process_var: float = 1e-2
    lorenz_dt: float = 0.01
    include_coverage: bool = True
    prior_std: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.n_reading_tasks < 1 or self.points_per_task < 1:
            raise DomainError("need at least one reading task and one point per task")
        if self.step_seconds <= 0.0 or self.lorenz_dt <= 0.0:
            raise DomainError("step and integration intervals must be positive")
        if self.measurement_var <= 0.0 or self.process_var < 0.0:
            raise DomainError("noise variances out of range")

    @property
    def n_tasks(self) -> int:
        return self.n_reading_tasks + (1 if self.include_coverage else 0)

    @property
    def n_points(self) -> int:
        return self.n_reading_tasks * self.points_per_task


@dataclass
class SensingStep:
    """Snapshot of one simulation step: the task family plus diagnostics."""
    step: int
    family: TaskFamily
    sat_positions: np.ndarray
    point_visibility: list[int]      # per point, bitmask of observing satellites
    full_coverage: float             # area-weighted fraction covered by the full set


class SensingScenario:
    """Stateful simulation producing one task family per time step.

    Each ground point runs an independent Lorenz 63 truth process and a
    UKF tracking it. advance() moves time forward one step, predicts the
    filters, freezes the step's task family from the predicted
    covariances and the current visibility geometry, and then updates
    each filter with one fused noisy state observation whenever any
    satellite of the full constellation sees its point.
    """

    def __init__(self, config: ScenarioConfig):
        self.config = config
        self.rng = np.random.default_rng(config.seed)
        n_pts = config.n_points
        z = self.rng.uniform(-1.0, 1.0, n_pts)
        phi = self.rng.uniform(0.0, 2.0 * math.pi, n_pts)
        r_xy = np.sqrt(1.0 - z * z)
        self.points = EARTH_RADIUS * np.stack([r_xy * np.cos(phi), r_xy * np.sin(phi), z], axis=1)
        self.truth = np.array([2.0, 2.0, 25.0]) + self.rng.normal(0.0, 5.0, (n_pts, 3))
        p0 = config.prior_std ** 2 * np.eye(3)
        self.filters = [FilterState(self.truth[p] + self.rng.normal(0.0, config.prior_std, 3),
                                    p0.copy()) for p in range(n_pts)]
        self.process_cov = config.process_var * np.eye(3)
        self.meas_cov = config.measurement_var * np.eye(3)
        if config.include_coverage:
            self.cells = grid_cell_centers()
            self.cell_weights = grid_cell_weights()
        self.t_index = -1

    def _dynamics(self, state: np.ndarray) -> np.ndarray:
        return rk4_step(lorenz_derivative, state, self.config.lorenz_dt)

    def advance(self) -> SensingStep:
        cfg = self.config
        self.t_index += 1
        t = self.t_index * cfg.step_seconds
        n_sats = cfg.walker.total_sats
        positions = satellite_positions(cfg.walker, t)

        vis_pts = visibility(positions, self.points, cfg.walker.fov_half_angle)
        point_masks = []
        for p in range(cfg.n_points):
            mask = 0
            for s in np.flatnonzero(vis_pts[:, p]):
                mask |= 1 << int(s)
            point_masks.append(mask)

        if self.t_index > 0:
            for p in range(cfg.n_points):
                self.truth[p] = self._dynamics(self.truth[p])
            self.filters = [ukf_predict(f, self._dynamics, self.process_cov) for f in self.filters]

        family, full_cov = self._build_family(positions, point_masks)

        # measurement update with the full constellation's visibility
        noise = self.rng.normal(0.0, math.sqrt(cfg.measurement_var), (cfg.n_points, 3))
        for p in range(cfg.n_points):
            if point_masks[p]:
                self.filters[p] = ukf_update(self.filters[p], self.truth[p] + noise[p], self.meas_cov)

        return SensingStep(self.t_index, family, positions, point_masks, full_cov)

    def _build_family(self, positions: np.ndarray, point_masks: list[int]):
        cfg = self.config
        n_sats = cfg.walker.total_sats
        r = cfg.measurement_var
        # frozen per-point data: covariance eigenvalues, visibility, full count
        eigs = [np.linalg.eigvalsh(0.5 * (f.cov + f.cov.T)) for f in self.filters]
        for d in eigs:
            if d.min() <= 0.0:
                raise NumericalError("predicted covariance lost positive definiteness")
        m_full = [popcount(m) for m in point_masks]

        def raw(d: np.ndarray, m: int) -> float:
            return float(np.sum(m * d * d / (r + m * d)))

        raw_full = [raw(eigs[p], m_full[p]) if m_full[p] else 0.0 for p in range(cfg.n_points)]
        task_alive = []
        for i in range(cfg.n_reading_tasks):
            pts = range(i * cfg.points_per_task, (i + 1) * cfg.points_per_task)
            task_alive.append([p for p in pts if m_full[p] > 0])

        if cfg.include_coverage:
            vis_cells = visibility(positions, self.cells, cfg.walker.fov_half_angle)
            cell_w = self.cell_weights
            full_cov_val = float(cell_w[vis_cells.any(axis=0)].sum())
        else:
            vis_cells, cell_w, full_cov_val = None, None, 0.0

        def values_fn(mask: int) -> np.ndarray:
            out = np.zeros(cfg.n_tasks)
            for i in range(cfg.n_reading_tasks):
                alive = task_alive[i]
                if not alive:
                    continue
                acc = 0.0
                for p in alive:
                    m_sel = popcount(mask & point_masks[p])
                    if m_sel:
                        acc += raw(eigs[p], m_sel) / raw_full[p]
                out[i] = acc / len(alive)
            if cfg.include_coverage and full_cov_val > 0.0:
                idx = list(iter_bits(mask))
                if idx:
                    covered = vis_cells[idx].any(axis=0)
                    out[-1] = float(cell_w[covered].sum()) / full_cov_val
            return out

        family = TaskFamily(n_sats, cfg.n_tasks, values_fn)
        return family, full_cov_val
