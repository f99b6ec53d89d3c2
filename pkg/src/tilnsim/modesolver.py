"""Scalar effective-index mode solver for Ti-diffused channel waveguides.

Model
-----
A strip of Ti of width ``w`` diffused into the substrate produces the
index increase

    dn(x, z) = dn_surface(w) * fhat(x) * exp(-(z/D)**2)

where ``fhat`` is the erf-smoothed top-hat
``[erf((w/2+x)/D) + erf((w/2-x)/D)] / (2 erf(w/(2D)))`` (peak 1 at the
strip centre) and ``D`` is the diffusion depth.  The channel modes are
computed with the standard two-pass effective-index method:

1. depth pass: for each lateral position the depth slab
   ``n_sub + s*exp(-(z/D)**2)`` (with ``s = dn_surface*fhat(x)``) is solved
   for its fundamental mode index.  The air interface is treated as a hard
   wall at the surface: the cover index is so far below the film that the
   field penetrates only ~lambda/(2 pi sqrt(n_eff^2-1)) ~ 0.07 um into the
   cover, which is negligible on the 3-5 um mode scale.  Columns below the
   depth cutoff fall back to the substrate index.
2. lateral pass: the resulting effective profile N(x) is solved for its
   even (m=0) and odd (m=1) lateral modes.

Both passes discretize the scalar Helmholtz operator on a uniform grid as
a symmetric tridiagonal eigenproblem and apply Richardson extrapolation
over a grid-halving so the leading O(h^2) error cancels.  The depth pass
is evaluated once per (wavelength, polarization) on a table of surface
increases and interpolated monotonically; the interpolation error is
orders of magnitude below the solver tolerances (covered by tests).

Electrodes are modelled with the lumped uniform-field picture: a voltage V
across an electrode gap d shifts the index by -n^3 r V / (2 d) inside a
soft-edged lateral window covering the guide and leaves the outside
untouched.  Propagation constants derive from effective indices as
``beta = 2 pi n_eff / lambda`` exactly.

Units: geometry in micrometres at the interface, propagation constants in
rad/m, voltages in volts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.linalg import eigh_tridiagonal

from .errors import ConfigError, DomainError, NotGuidedError, NumericError
from .material import MaterialModel, check_polarization, default_material, eo_index_shift

__all__ = [
    "GridSpec",
    "Electrode",
    "WaveguideGeometry",
    "PairGeometry",
    "GuidedMode",
    "IndexProfile",
    "ModeSolver",
    "WidthSweep",
    "VoltageSweep",
    "build_profile",
    "refine_crossing",
]


@dataclass(frozen=True)
class GridSpec:
    """Discretization controls for both solver passes.

    ``depth_step_um``/``lateral_step_um`` are the base grid spacings; with
    ``richardson`` enabled each eigenvalue is recomputed at half spacing
    and extrapolated.  The samples-per-depth floor guards against grids
    too coarse to resolve the diffusion profile.
    """

    depth_extent_um: float = 30.0
    depth_step_um: float = 0.02
    lateral_margin_um: float = 25.0
    lateral_step_um: float = 0.02
    richardson: bool = True
    depth_table_points: int = 25
    min_samples_per_depth: int = 20
    guidance_margin: float = 1e-7

    def validate_against(self, diffusion_depth_um: float) -> None:
        for name, step in (
            ("depth_step_um", self.depth_step_um),
            ("lateral_step_um", self.lateral_step_um),
        ):
            if step <= 0:
                raise ConfigError(f"{name} must be positive, got {step}")
            if diffusion_depth_um / step < self.min_samples_per_depth:
                raise ConfigError(
                    f"{name}={step} um is too coarse: fewer than "
                    f"{self.min_samples_per_depth} samples per diffusion depth "
                    f"{diffusion_depth_um} um"
                )
        if self.depth_extent_um < 4 * diffusion_depth_um:
            raise ConfigError(
                f"depth extent {self.depth_extent_um} um too small for "
                f"diffusion depth {diffusion_depth_um} um"
            )
        if self.depth_table_points < 8:
            raise ConfigError("depth_table_points must be at least 8")


@dataclass(frozen=True)
class Electrode:
    """Lumped electrode over one guide.

    ``orientation`` (+1/-1) encodes the vertical field direction: the
    index shift is -n^3 r (orientation*V) / (2 gap).  The lateral window
    of the applied field covers the guide footprint plus ``margin_um`` on
    each side, with erf-soft edges of scale ``edge_softness_um``.
    """

    voltage: float = 0.0
    gap_um: float = 4.0
    orientation: int = 1
    margin_um: float = 1.0
    edge_softness_um: float = 0.25

    def __post_init__(self):
        if self.gap_um <= 0:
            raise DomainError(f"electrode gap must be positive, got {self.gap_um}")
        if self.orientation not in (1, -1):
            raise DomainError(f"orientation must be +1 or -1, got {self.orientation}")
        if self.margin_um < 0 or self.edge_softness_um <= 0:
            raise DomainError("electrode margin must be >= 0 and edge softness > 0")


@dataclass(frozen=True)
class WaveguideGeometry:
    """A single diffused channel, optionally with an electrode above it."""

    width_um: float
    electrode: Electrode | None = None

    def __post_init__(self):
        if self.width_um <= 0:
            raise DomainError(f"guide width must be positive, got {self.width_um}")

    def with_voltage(self, voltage: float) -> "WaveguideGeometry":
        if self.electrode is None:
            raise DomainError("geometry has no electrode to drive")
        return replace(self, electrode=replace(self.electrode, voltage=voltage))


@dataclass(frozen=True)
class PairGeometry:
    """Two parallel channels separated edge-to-edge by ``separation_um``."""

    guide_1: WaveguideGeometry
    guide_2: WaveguideGeometry
    separation_um: float

    def __post_init__(self):
        if self.separation_um <= 0:
            raise DomainError(f"separation must be positive, got {self.separation_um}")
        e1, e2 = self.guide_1.electrode, self.guide_2.electrode
        if e1 is not None and e2 is not None:
            if e1.margin_um + e2.margin_um >= self.separation_um:
                raise ConfigError(
                    "electrode windows overlap: margins "
                    f"{e1.margin_um}+{e2.margin_um} um >= separation {self.separation_um} um"
                )

    @property
    def centre_spacing_um(self) -> float:
        return self.separation_um + 0.5 * (self.guide_1.width_um + self.guide_2.width_um)

    def centres_um(self) -> tuple[float, float]:
        cc = self.centre_spacing_um
        return -0.5 * cc, 0.5 * cc

    def with_common_voltage(self, voltage: float) -> "PairGeometry":
        return replace(
            self,
            guide_1=self.guide_1.with_voltage(voltage),
            guide_2=self.guide_2.with_voltage(voltage),
        )


@dataclass(frozen=True)
class GuidedMode:
    """One guided channel mode; ``beta`` is derived from n_eff, never stored."""

    n_eff: float
    wavelength_um: float
    polarization: str
    mode_index: int
    n_substrate: float
    geometry: WaveguideGeometry

    @property
    def beta(self) -> float:
        """Propagation constant 2*pi*n_eff/lambda in rad/m."""
        return 2.0 * math.pi * self.n_eff / (self.wavelength_um * 1e-6)

    @property
    def normalized_beta(self) -> float:
        """beta relative to a substrate plane wave: n_eff / n_substrate."""
        return self.n_eff / self.n_substrate


@dataclass(frozen=True)
class IndexProfile:
    """Sampled 2D index map n(x, z); x is lateral (um), z is depth (um)."""

    x_um: np.ndarray
    z_um: np.ndarray
    n: np.ndarray
    wavelength_um: float
    polarization: str

    def peak(self) -> float:
        return float(self.n.max())


def _lateral_shape(x_um: np.ndarray, width_um: float, depth_um: float, centre_um: float = 0.0) -> np.ndarray:
    """Normalized erf-smoothed top-hat of a diffused strip (peak 1 at centre)."""
    from scipy.special import erf

    u = (x_um - centre_um) / depth_um
    half = 0.5 * width_um / depth_um
    return (erf(half + u) + erf(half - u)) / (2.0 * math.erf(half))


def _electrode_window(x_um: np.ndarray, geometry: WaveguideGeometry, centre_um: float) -> np.ndarray:
    """Soft-edged indicator of the electrode field region over a guide."""
    from scipy.special import erf

    e = geometry.electrode
    half = 0.5 * geometry.width_um + e.margin_um
    lo = centre_um - half
    hi = centre_um + half
    s = e.edge_softness_um
    return 0.5 * (erf((x_um - lo) / s) - erf((x_um - hi) / s))


def build_profile(
    geometry: WaveguideGeometry | PairGeometry,
    wavelength_um: float,
    polarization: str,
    material: MaterialModel | None = None,
    x_um: np.ndarray | None = None,
    z_um: np.ndarray | None = None,
) -> IndexProfile:
    """Sample the full 2D index map of a channel (or channel pair).

    The profile peaks at substrate + dn_surface (+ the electrode shift when
    a voltage is applied) at the strip centre and decays to the substrate
    index away from the channel.
    """
    material = material or default_material()
    check_polarization(polarization)
    diff = material.indiffusion
    n_sub = material.index(wavelength_um, polarization)

    if isinstance(geometry, PairGeometry):
        guides = [geometry.guide_1, geometry.guide_2]
        centres = list(geometry.centres_um())
    else:
        guides = [geometry]
        centres = [0.0]

    if x_um is None:
        outer = max(
            abs(c) + 0.5 * g.width_um for g, c in zip(guides, centres)
        ) + 25.0
        x_um = np.arange(-outer, outer + 1e-12, 0.05)
        # keep the strip centres exactly on the grid so the profile peak is sampled
        x_um = np.unique(np.concatenate([x_um, np.asarray(centres)]))
    if z_um is None:
        z_um = np.arange(0.0, 4.0 * diff.diffusion_depth_um + 1e-12, 0.05)

    depth_factor = np.exp(-((z_um / diff.diffusion_depth_um) ** 2))
    n = np.full((len(z_um), len(x_um)), n_sub, dtype=float)
    for g, c in zip(guides, centres):
        dn = material.surface_index_change(g.width_um, polarization, wavelength_um)
        lateral = _lateral_shape(x_um, g.width_um, diff.diffusion_depth_um, c)
        n += dn * np.outer(depth_factor, lateral)
        if g.electrode is not None and g.electrode.voltage != 0.0:
            shift = material.eo_index_shift(
                polarization,
                g.electrode.orientation * g.electrode.voltage,
                g.electrode.gap_um,
                wavelength_um=wavelength_um,
            )
            n += shift * _electrode_window(x_um, g, c)[np.newaxis, :]
    return IndexProfile(x_um=x_um, z_um=z_um, n=n, wavelength_um=wavelength_um, polarization=polarization)


# --------------------------------------------------------------------------
# Tridiagonal slab eigensolver
# --------------------------------------------------------------------------


def _slab_eigenvalues(n_profile: np.ndarray, step_m: float, k0: float, count: int) -> np.ndarray:
    """Largest ``count`` eigenvalues beta^2 of the FD scalar Helmholtz slab.

    Dirichlet walls at both ends of the sampled interval (grid points are
    interior points).
    """
    npts = len(n_profile)
    inv_h2 = 1.0 / (step_m * step_m)
    diag = (k0 * k0) * (n_profile * n_profile) - 2.0 * inv_h2
    off = np.full(npts - 1, inv_h2)
    try:
        vals = eigh_tridiagonal(
            diag, off, eigvals_only=True, select="i", select_range=(npts - count, npts - 1)
        )
    except Exception as exc:  # LAPACK failure
        raise NumericError(f"slab eigenvalue solve failed: {exc}") from exc
    return vals[::-1]  # descending


def _slab_modes(
    n_profile: np.ndarray, step_m: float, k0: float, count: int, residual_tol: float = 1e-10
) -> tuple[np.ndarray, np.ndarray]:
    """Largest eigenpairs with a verified relative residual."""
    npts = len(n_profile)
    inv_h2 = 1.0 / (step_m * step_m)
    diag = (k0 * k0) * (n_profile * n_profile) - 2.0 * inv_h2
    off = np.full(npts - 1, inv_h2)
    try:
        vals, vecs = eigh_tridiagonal(
            diag, off, select="i", select_range=(npts - count, npts - 1)
        )
    except Exception as exc:
        raise NumericError(f"slab eigenpair solve failed: {exc}") from exc
    vals = vals[::-1]
    vecs = vecs[:, ::-1]
    scale = float(np.max(np.abs(diag)) + 2.0 * inv_h2)
    for i, val in enumerate(vals):
        v = vecs[:, i]
        resid = np.empty_like(v)
        resid[:] = (diag - val) * v
        resid[:-1] += inv_h2 * v[1:]
        resid[1:] += inv_h2 * v[:-1]
        rel = float(np.linalg.norm(resid)) / scale
        if rel > residual_tol:
            raise NumericError(f"slab eigenpair residual {rel:.2e} exceeds {residual_tol:.1e}")
    # unit L2 power on the physical grid
    vecs = vecs / np.sqrt(step_m)
    return vals, vecs


def _solve_slab_neff(
    profile_of: Callable[[np.ndarray], np.ndarray],
    span_m: tuple[float, float],
    step_m: float,
    k0: float,
    count: int,
    richardson: bool,
) -> np.ndarray:
    """n_eff candidates (descending) for a slab given by a profile callback.

    ``profile_of`` maps a coordinate array (m) to the index profile; the
    coordinates generated here are the interior points of the span with
    Dirichlet walls at both ends.
    """
    lo, hi = span_m

    def eigs(h: float) -> np.ndarray:
        npts = int(round((hi - lo) / h)) - 1
        coords = lo + h * np.arange(1, npts + 1)
        return _slab_eigenvalues(profile_of(coords), h, k0, count)

    e1 = eigs(step_m)
    if not richardson:
        beta2 = e1
    else:
        e2 = eigs(0.5 * step_m)
        beta2 = (4.0 * e2 - e1) / 3.0
    beta2 = np.where(beta2 > 0, beta2, np.nan)
    return np.sqrt(beta2) / k0


# --------------------------------------------------------------------------
# Result tables
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class WidthSweep:
    """Width sweep of the first two lateral modes of a single channel."""

    widths_um: np.ndarray
    n_eff: np.ndarray  # shape (n_widths, 2); NaN where not guided
    wavelength_um: float
    polarization: str
    notes: tuple[str, ...] = ()

    @property
    def beta(self) -> np.ndarray:
        return 2.0 * math.pi * self.n_eff / (self.wavelength_um * 1e-6)


@dataclass(frozen=True)
class VoltageSweep:
    """Voltage sweep of the isolated-guide parities of an electrode pair.

    ``beta`` columns are ordered (wg1 even, wg1 odd, wg2 even, wg2 odd);
    entries are NaN past mode cutoff and ``hit_cutoff`` flags that case.
    """

    voltages: np.ndarray
    beta: np.ndarray  # shape (n_volts, 4)
    wavelength_um: float
    polarization: str
    pair: PairGeometry
    hit_cutoff: bool


# --------------------------------------------------------------------------
# The solver
# --------------------------------------------------------------------------


@dataclass
class _DepthTable:
    """Monotone interpolant of depth-pass n_eff vs surface index increase."""

    s_nodes: np.ndarray
    n_eff: np.ndarray
    n_sub: float
    interp: PchipInterpolator

    def __call__(self, s: np.ndarray) -> np.ndarray:
        return np.maximum(self.interp(np.clip(s, 0.0, self.s_nodes[-1])), self.n_sub)


class ModeSolver:
    """Effective-index solver bound to one material model and grid spec.

    All public queries are memoized on (geometry, wavelength, polarization,
    mode index); geometries are immutable dataclasses, so cache keys are
    value-based.  The solver itself holds only caches and is safe to share
    across read-only queries.
    """

    def __init__(self, material: MaterialModel | None = None, grid: GridSpec | None = None):
        self.material = material or default_material()
        self.grid = grid or GridSpec()
        self.grid.validate_against(self.material.indiffusion.diffusion_depth_um)
        self._depth_tables: dict = {}
        self._lateral_cache: dict = {}
        self._field_cache: dict = {}

    # -- depth pass --------------------------------------------------------

    def _depth_table(self, wavelength_um: float, polarization: str) -> _DepthTable:
        key = (wavelength_um, polarization)
        table = self._depth_tables.get(key)
        if table is not None:
            return table
        diff = self.material.indiffusion
        n_sub = self.material.index(wavelength_um, polarization)
        k0 = 2.0 * math.pi / (wavelength_um * 1e-6)
        depth_m = diff.diffusion_depth_um * 1e-6
        span = (0.0, self.grid.depth_extent_um * 1e-6)
        s_max = diff.saturation_index_change(polarization)
        if diff.dispersion_policy == "multiplicative":
            s_max *= diff.dispersion_factor(wavelength_um) / diff.dispersion_factor(
                diff.reference_wavelength_um
            )
        # quadratic node spacing resolves the cutoff knee at small s
        u = np.linspace(0.0, 1.0, self.grid.depth_table_points)
        s_nodes = s_max * u * u

        def neff_at(s: float) -> float:
            def profile(z: np.ndarray) -> np.ndarray:
                return n_sub + s * np.exp(-((z / depth_m) ** 2))

            vals = _solve_slab_neff(
                profile, span, self.grid.depth_step_um * 1e-6, k0, 1, self.grid.richardson
            )
            v = float(vals[0]) if np.isfinite(vals[0]) else -math.inf
            return max(v, n_sub)

        n_eff = np.array([neff_at(float(s)) for s in s_nodes])
        if np.any(np.diff(n_eff) < -1e-12):
            raise NumericError("depth-pass n_eff(s) is not monotone; grid too coarse?")
        interp = PchipInterpolator(s_nodes, np.maximum.accumulate(n_eff), extrapolate=False)
        table = _DepthTable(s_nodes=s_nodes, n_eff=n_eff, n_sub=n_sub, interp=interp)
        self._depth_tables[key] = table
        return table

    def depth_neff(self, surface_increase: float, wavelength_um: float, polarization: str) -> float:
        """Depth-pass effective index for a given surface index increase."""
        table = self._depth_table(wavelength_um, polarization)
        return float(table(np.asarray([surface_increase]))[0])

    # -- lateral pass ------------------------------------------------------

    def _guides_and_centres(self, geometry) -> tuple[list[WaveguideGeometry], list[float]]:
        if isinstance(geometry, PairGeometry):
            return [geometry.guide_1, geometry.guide_2], list(geometry.centres_um())
        if isinstance(geometry, WaveguideGeometry):
            return [geometry], [0.0]
        raise DomainError(f"unsupported geometry type {type(geometry).__name__}")

    def _lateral_span_um(self, guides, centres) -> float:
        outer = max(abs(c) + 0.5 * g.width_um for g, c in zip(guides, centres))
        return outer + self.grid.lateral_margin_um

    def lateral_effective_profile(
        self,
        geometry,
        wavelength_um: float,
        polarization: str,
        x_um: np.ndarray | None = None,
        only_guide: int | None = None,
    ) -> tuple[np.ndarray, np.ndarray]:
        """Effective 1D lateral profile N(x) after the depth pass.

        For a pair, ``only_guide`` (0 or 1) keeps a single guide's
        contribution on the shared axis (used for isolated-guide modes and
        coupling overlaps).
        """
        check_polarization(polarization)
        guides, centres = self._guides_and_centres(geometry)
        if only_guide is not None:
            keep = [(guides[only_guide], centres[only_guide])]
        else:
            keep = list(zip(guides, centres))
        table = self._depth_table(wavelength_um, polarization)
        diff = self.material.indiffusion
        if x_um is None:
            span = self._lateral_span_um(guides, centres)
            x_um = np.arange(-span, span + 1e-12, self.grid.lateral_step_um)
        n_lat = np.full(len(x_um), table.n_sub)
        for g, c in keep:
            dn = self.material.surface_index_change(g.width_um, polarization, wavelength_um)
            s = dn * _lateral_shape(x_um, g.width_um, diff.diffusion_depth_um, c)
            n_lat = n_lat + (table(s) - table.n_sub)
            if g.electrode is not None and g.electrode.voltage != 0.0:
                shift = self.material.eo_index_shift(
                    polarization,
                    g.electrode.orientation * g.electrode.voltage,
                    g.electrode.gap_um,
                    wavelength_um=wavelength_um,
                )
                n_lat = n_lat + shift * _electrode_window(x_um, g, c)
        return x_um, n_lat

    def _lateral_neffs(
        self, geometry, wavelength_um: float, polarization: str, only_guide: int | None = None
    ) -> np.ndarray:
        """First two lateral-mode effective indices (descending, NaN if none)."""
        key = (geometry, wavelength_um, polarization, only_guide)
        cached = self._lateral_cache.get(key)
        if cached is not None:
            return cached
        guides, centres = self._guides_and_centres(geometry)
        span = self._lateral_span_um(guides, centres)
        k0 = 2.0 * math.pi / (wavelength_um * 1e-6)

        def profile(x_m: np.ndarray) -> np.ndarray:
            _, n_lat = self.lateral_effective_profile(
                geometry, wavelength_um, polarization, x_um=x_m * 1e6, only_guide=only_guide
            )
            return n_lat

        neffs = _solve_slab_neff(
            profile,
            (-span * 1e-6, span * 1e-6),
            self.grid.lateral_step_um * 1e-6,
            k0,
            2,
            self.grid.richardson,
        )
        self._lateral_cache[key] = neffs
        return neffs

    def mode(
        self,
        geometry: WaveguideGeometry,
        wavelength_um: float,
        polarization: str,
        mode_index: int,
    ) -> GuidedMode:
        """Guided lateral mode of a single channel; raises NotGuidedError below cutoff."""
        if mode_index not in (0, 1):
            raise DomainError(f"mode index must be 0 (even) or 1 (odd), got {mode_index}")
        neffs = self._lateral_neffs(geometry, wavelength_um, polarization)
        n_sub = self.material.index(wavelength_um, polarization)
        n_eff = float(neffs[mode_index])
        if not math.isfinite(n_eff) or n_eff <= n_sub + self.grid.guidance_margin:
            raise NotGuidedError(
                f"mode m={mode_index} not guided: w={geometry.width_um} um, "
                f"lambda={wavelength_um} um, {polarization}"
            )
        dn_peak = self.material.surface_index_change(geometry.width_um, polarization, wavelength_um)
        eo = 0.0
        if geometry.electrode is not None:
            eo = abs(
                self.material.eo_index_shift(
                    polarization,
                    geometry.electrode.voltage,
                    geometry.electrode.gap_um,
                    wavelength_um=wavelength_um,
                )
            )
        if n_eff >= n_sub + dn_peak + eo:
            raise NumericError(
                f"n_eff={n_eff} exceeds the physical ceiling {n_sub + dn_peak + eo}"
            )
        return GuidedMode(
            n_eff=n_eff,
            wavelength_um=wavelength_um,
            polarization=polarization,
            mode_index=mode_index,
            n_substrate=n_sub,
            geometry=geometry,
        )

    # the same query under its traditional name
    effective_index = mode

    def modes_supported(
        self, geometry: WaveguideGeometry, wavelength_um: float, polarization: str
    ) -> tuple[int, ...]:
        """Indices of the guided lateral modes (subset of (0, 1))."""
        out = []
        for m in (0, 1):
            try:
                self.mode(geometry, wavelength_um, polarization, m)
            except NotGuidedError:
                continue
            out.append(m)
        return tuple(out)

    def mode_field(
        self,
        geometry,
        wavelength_um: float,
        polarization: str,
        mode_index: int,
        only_guide: int | None = None,
        x_um: np.ndarray | None = None,
    ) -> tuple[np.ndarray, np.ndarray, float]:
        """(x_m, field, n_eff) of a lateral mode on the fine grid.

        The field is real, L2-normalized (integral of field^2 dx = 1, x in
        metres).  With ``only_guide`` set on a pair geometry the mode of
        that guide alone is returned on the shared pair axis.
        """
        key = (geometry, wavelength_um, polarization, mode_index, only_guide)
        cached = self._field_cache.get(key)
        if cached is None:
            guides, centres = self._guides_and_centres(geometry)
            span = self._lateral_span_um(guides, centres)
            h_um = 0.5 * self.grid.lateral_step_um if self.grid.richardson else self.grid.lateral_step_um
            npts = int(round(2.0 * span / h_um)) - 1
            x_grid_um = -span + h_um * np.arange(1, npts + 1)
            _, n_lat = self.lateral_effective_profile(
                geometry, wavelength_um, polarization, x_um=x_grid_um, only_guide=only_guide
            )
            k0 = 2.0 * math.pi / (wavelength_um * 1e-6)
            vals, vecs = _slab_modes(n_lat, h_um * 1e-6, k0, 2)
            n_sub = self.material.index(wavelength_um, polarization)
            n_eff = math.sqrt(max(vals[mode_index], 0.0)) / k0
            if n_eff <= n_sub + self.grid.guidance_margin:
                raise NotGuidedError(
                    f"mode m={mode_index} not guided for field computation"
                )
            fld = vecs[:, mode_index]
            # deterministic sign: positive lobe on the left
            first = np.nonzero(np.abs(fld) > 1e-3 * np.max(np.abs(fld)))[0][0]
            if fld[first] < 0:
                fld = -fld
            cached = (x_grid_um * 1e-6, fld, n_eff)
            self._field_cache[key] = cached
        if x_um is not None:
            x_m, fld, n_eff = cached
            fld_i = np.interp(x_um * 1e-6, x_m, fld, left=0.0, right=0.0)
            return x_um * 1e-6, fld_i, n_eff
        return cached

    # -- sweeps and searches -------------------------------------------------

    def width_sweep(
        self,
        widths_um: Sequence[float],
        wavelength_um: float,
        polarization: str,
        electrode: Electrode | None = None,
    ) -> WidthSweep:
        """n_eff of the first two lateral modes across a width grid.

        Rows where a mode is below cutoff carry NaN; solver failures are
        recorded per-row in ``notes`` and the sweep continues.
        """
        widths = np.asarray(list(widths_um), dtype=float)
        out = np.full((len(widths), 2), np.nan)
        notes: list[str] = []
        for i, w in enumerate(widths):
            geom = WaveguideGeometry(width_um=float(w), electrode=electrode)
            for m in (0, 1):
                try:
                    out[i, m] = self.mode(geom, wavelength_um, polarization, m).n_eff
                except NotGuidedError:
                    continue
                except NumericError as exc:
                    notes.append(f"w={w}: m={m}: {exc}")
        return WidthSweep(
            widths_um=widths,
            n_eff=out,
            wavelength_um=wavelength_um,
            polarization=polarization,
            notes=tuple(notes),
        )

    def find_phasematch_width(
        self,
        target_mode: GuidedMode,
        m_search: int = 0,
        bracket_um: tuple[float, float] | None = None,
        beta_tol: float = 1.0,
        width_tol_um: float = 1e-5,
    ) -> float | None:
        """Width whose ``m_search`` mode phase-matches the target mode.

        Bisection on the monotone beta(w) branch at the target's wavelength
        and polarization.  Returns None when no crossing exists in the
        bracket ("no phase match").
        """
        wavelength_um = target_mode.wavelength_um
        polarization = target_mode.polarization
        target = target_mode.beta

        def mismatch(w: float) -> float:
            return (
                self.mode(WaveguideGeometry(width_um=w), wavelength_um, polarization, m_search).beta
                - target
            )

        lo, hi = bracket_um if bracket_um is not None else (1.2, target_mode.geometry.width_um)
        # walk the lower edge up past cutoff if needed
        f_lo = None
        while lo < hi:
            try:
                f_lo = mismatch(lo)
                break
            except NotGuidedError:
                lo += 0.2
        if f_lo is None:
            return None
        f_hi = mismatch(hi)
        if f_lo == 0.0:
            return lo
        if f_lo * f_hi > 0:
            return None
        while hi - lo > width_tol_um:
            mid = 0.5 * (lo + hi)
            f_mid = mismatch(mid)
            if abs(f_mid) < beta_tol:
                return mid
            if f_lo * f_mid <= 0:
                hi = mid
            else:
                lo, f_lo = mid, f_mid
        return 0.5 * (lo + hi)

    # -- electrode pairs -----------------------------------------------------

    def pair_betas(
        self, pair: PairGeometry, wavelength_um: float, polarization: str
    ) -> np.ndarray:
        """Isolated-guide propagation constants (wg1 e, wg1 o, wg2 e, wg2 o).

        NaN marks a mode below cutoff.
        """
        k0 = 2.0 * math.pi / (wavelength_um * 1e-6)
        n_sub = self.material.index(wavelength_um, polarization)
        out = np.full(4, np.nan)
        for gi in (0, 1):
            neffs = self._lateral_neffs(pair, wavelength_um, polarization, only_guide=gi)
            for m in (0, 1):
                n_eff = float(neffs[m])
                if math.isfinite(n_eff) and n_eff > n_sub + self.grid.guidance_margin:
                    out[2 * gi + m] = k0 * n_eff
        return out

    def voltage_sweep_pair(
        self,
        pair: PairGeometry,
        wavelength_um: float,
        polarization: str,
        voltages: Sequence[float],
    ) -> VoltageSweep:
        """Isolated-guide betas of both parities across a voltage grid."""
        if pair.guide_1.electrode is None or pair.guide_2.electrode is None:
            raise ConfigError("voltage sweep needs electrodes on both guides")
        volts = np.asarray(list(voltages), dtype=float)
        beta = np.empty((len(volts), 4))
        hit_cutoff = False
        for i, v in enumerate(volts):
            beta[i] = self.pair_betas(pair.with_common_voltage(float(v)), wavelength_um, polarization)
            if not np.all(np.isfinite(beta[i])):
                hit_cutoff = True
        return VoltageSweep(
            voltages=volts,
            beta=beta,
            wavelength_um=wavelength_um,
            polarization=polarization,
            pair=pair,
            hit_cutoff=hit_cutoff,
        )

    def crossing_mismatch(
        self, pair: PairGeometry, wavelength_um: float, polarization: str
    ) -> Callable[[float], float]:
        """beta_even(wg1, V) - beta_odd(wg2, V) as a callable of the voltage."""

        def mismatch(v: float) -> float:
            b = self.pair_betas(pair.with_common_voltage(float(v)), wavelength_um, polarization)
            if not (math.isfinite(b[0]) and math.isfinite(b[3])):
                raise NotGuidedError(f"mode cutoff at V={v}")
            return float(b[0] - b[3])

        return mismatch

    def find_crossing_voltage(
        self,
        pair: PairGeometry,
        wavelength_um: float,
        polarization: str,
        v_max: float = 100.0,
        n_scan: int = 9,
        beta_tol: float = 0.1,
        sweep: VoltageSweep | None = None,
    ) -> float | None:
        """Voltage where the wg1 even mode phase-matches the wg2 odd mode.

        Brackets a sign change of beta_even(wg1) - beta_odd(wg2) -- from a
        precomputed ``sweep`` table when given, otherwise by scanning
        [0, v_max] -- and refines it by bisection to |mismatch| <
        ``beta_tol`` rad/m.  Returns None when there is no crossing in
        range.
        """
        mismatch = self.crossing_mismatch(pair, wavelength_um, polarization)
        if sweep is not None:
            diff = sweep.beta[:, 0] - sweep.beta[:, 3]
            volts = sweep.voltages
            for i in range(len(volts) - 1):
                if not (math.isfinite(diff[i]) and math.isfinite(diff[i + 1])):
                    continue
                if diff[i] * diff[i + 1] <= 0.0:
                    return refine_crossing(
                        mismatch, float(volts[i]), float(volts[i + 1]), beta_tol=beta_tol
                    )
            return None
        scan = np.linspace(0.0, v_max, n_scan)
        prev_v, prev_f = None, None
        for v in scan:
            try:
                f = mismatch(float(v))
            except NotGuidedError:
                break
            if prev_f is not None and prev_f * f <= 0.0:
                return refine_crossing(mismatch, prev_v, float(v), beta_tol=beta_tol)
            prev_v, prev_f = float(v), f
        return None

    # -- coupling ------------------------------------------------------------

    def pair_coupling_coefficient(
        self,
        pair: PairGeometry,
        wavelength_um: float,
        polarization: str,
        mode_1: int,
        mode_2: int,
    ) -> float:
        """Symmetrized overlap coupling coefficient between one lateral mode
        of each guide (rad/m), evaluated on the shared pair axis."""
        from .coupling import coupling_coefficient, symmetric_coupling_coefficient

        x1, f1, _ = self.mode_field(pair, wavelength_um, polarization, mode_1, only_guide=0)
        x2, f2, _ = self.mode_field(pair, wavelength_um, polarization, mode_2, only_guide=1)
        if len(x1) != len(x2) or abs(x1[0] - x2[0]) > 1e-15:
            raise NumericError("pair mode fields are not on a shared axis")
        betas = self.pair_betas(pair, wavelength_um, polarization)
        b1, b2 = betas[mode_1], betas[2 + mode_2]
        if not (math.isfinite(b1) and math.isfinite(b2)):
            raise NotGuidedError("both modes must be guided for a coupling coefficient")
        n_sub = self.material.index(wavelength_um, polarization)
        x_um = x1 * 1e6
        _, n_g1 = self.lateral_effective_profile(pair, wavelength_um, polarization, x_um=x_um, only_guide=0)
        _, n_g2 = self.lateral_effective_profile(pair, wavelength_um, polarization, x_um=x_um, only_guide=1)
        dn2_1 = n_g1 * n_g1 - n_sub * n_sub
        dn2_2 = n_g2 * n_g2 - n_sub * n_sub
        k_12 = coupling_coefficient(x1, f1, f2, dn2_2, b1, b2, wavelength_um)
        k_21 = coupling_coefficient(x1, f2, f1, dn2_1, b2, b1, wavelength_um)
        return symmetric_coupling_coefficient(k_12, k_21)

    def pair_supermodes(
        self, pair: PairGeometry, wavelength_um: float, polarization: str, count: int = 2
    ) -> np.ndarray:
        """n_eff of the first supermodes of the full pair profile (descending)."""
        guides, centres = self._guides_and_centres(pair)
        span = self._lateral_span_um(guides, centres)
        k0 = 2.0 * math.pi / (wavelength_um * 1e-6)

        def profile(x_m: np.ndarray) -> np.ndarray:
            _, n_lat = self.lateral_effective_profile(
                pair, wavelength_um, polarization, x_um=x_m * 1e6
            )
            return n_lat

        return _solve_slab_neff(
            profile,
            (-span * 1e-6, span * 1e-6),
            self.grid.lateral_step_um * 1e-6,
            k0,
            count,
            self.grid.richardson,
        )


def refine_crossing(
    mismatch: Callable[[float], float],
    v_lo: float,
    v_hi: float,
    beta_tol: float = 0.1,
    v_tol: float | None = None,
    max_iter: int = 200,
) -> float:
    """Bisection refinement of a bracketed mismatch sign change.

    Stops once |mismatch| < beta_tol and the bracket is below ``v_tol``
    (default: 1e-12 of the bracket scale, effectively machine precision).
    """
    f_lo = mismatch(v_lo)
    f_hi = mismatch(v_hi)
    if f_lo == 0.0:
        return v_lo
    if f_hi == 0.0:
        return v_hi
    if f_lo * f_hi > 0:
        raise DomainError(f"mismatch does not change sign on [{v_lo}, {v_hi}]")
    if v_tol is None:
        v_tol = 1e-12 * max(1.0, abs(v_lo), abs(v_hi))
    mid = 0.5 * (v_lo + v_hi)
    for _ in range(max_iter):
        mid = 0.5 * (v_lo + v_hi)
        f_mid = mismatch(mid)
        if f_lo * f_mid <= 0:
            v_hi = mid
        else:
            v_lo, f_lo = mid, f_mid
        if abs(v_hi - v_lo) < v_tol and abs(f_mid) < beta_tol:
            break
    else:
        raise NumericError("crossing refinement did not converge")
    return 0.5 * (v_lo + v_hi)
