"""Material model for titanium-indiffused congruent lithium niobate.

Covers the three ingredients the waveguide layers need:

* bulk refractive indices from Sellmeier fits (ordinary branch for TE,
  extraordinary branch for TM in the z-cut device orientation used here),
* the titanium-indiffusion surface index increase for a strip of width
  ``w`` diffused from a film of thickness ``delta`` to depth ``D``,

      dn_surface(w) = 2 * delta * strength * erf(w / (2 D)) / (sqrt(pi) * D)

  with an optional multiplicative wavelength-dispersion factor
  ``xi(lam) = a + b / lam**2`` applied relative to a reference wavelength,
* linear electro-optic (Pockels) index shifts

      dn_eo = -0.5 * n**3 * r * V / d

  for a lumped uniform field V/d across an electrode gap d.

Coefficient sets are data, not code: the packaged defaults live in
``data/linbo3.toml`` and alternates can be loaded from a user config file
with the same layout.  All wavelengths and gaps at this interface are in
micrometres; Pockels coefficients are in pm/V; index changes are
dimensionless.
"""

from __future__ import annotations

import hashlib
import math
import sys
from dataclasses import dataclass, replace
from importlib import resources

from .errors import ConfigError, DomainError

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

POLARIZATIONS = ("TE", "TM")

#: Dispersion policies for the Ti index increase.  "off" uses the quoted
#: strength factors at every wavelength; "multiplicative" rescales by
#: xi(lam)/xi(lam_ref) so the quoted values still hold at the reference
#: wavelength while sweeps pick up the measured dispersion of dn.
DISPERSION_POLICIES = ("off", "multiplicative")


def check_polarization(pol: str) -> str:
    if pol not in POLARIZATIONS:
        raise DomainError(f"polarization must be one of {POLARIZATIONS}, got {pol!r}")
    return pol


@dataclass(frozen=True)
class SellmeierSet:
    """One refractive-index branch as a generalized Sellmeier fit.

    n(lam)**2 = a + sum_i b[i]*lam**2/(lam**2 - c[i])
                  + sum_j d[j]/(lam**2 - e[j]) + f*lam**2

    with lam in micrometres.  ``c`` and ``e`` are pole positions in um**2.
    ``label`` records the provenance of the coefficients (publication and
    material variant) and travels with every config round-trip.
    """

    label: str
    a: float
    b: tuple[float, ...]
    c: tuple[float, ...]
    d: tuple[float, ...]
    e: tuple[float, ...]
    f: float
    window_um: tuple[float, float]

    def __post_init__(self):
        if len(self.b) != len(self.c) or len(self.d) != len(self.e):
            raise ConfigError(
                f"Sellmeier set {self.label!r}: coefficient lists b/c and d/e "
                "must come in equal-length pairs"
            )
        lo, hi = self.window_um
        if not (0.0 < lo < hi):
            raise ConfigError(f"Sellmeier set {self.label!r}: bad validity window {self.window_um}")

    def index(self, wavelength_um: float) -> float:
        """Refractive index at ``wavelength_um`` (validated against the window)."""
        lo, hi = self.window_um
        if not (lo <= wavelength_um <= hi):
            raise DomainError(
                f"wavelength {wavelength_um} um outside validity window "
                f"[{lo}, {hi}] um of Sellmeier set {self.label!r}"
            )
        l2 = wavelength_um * wavelength_um
        n2 = self.a + self.f * l2
        for bi, ci in zip(self.b, self.c):
            n2 += bi * l2 / (l2 - ci)
        for dj, ej in zip(self.d, self.e):
            n2 += dj / (l2 - ej)
        if n2 <= 0.0:
            raise DomainError(
                f"Sellmeier set {self.label!r} gives non-physical n**2={n2} "
                f"at {wavelength_um} um"
            )
        return math.sqrt(n2)


@dataclass(frozen=True)
class TiIndiffusionParams:
    """Titanium indiffusion profile parameters.

    ``film_thickness_um`` is the pre-diffusion Ti strip thickness,
    ``diffusion_depth_um`` the 1/e depth of the Gaussian depth profile,
    and the two ``strength_*`` factors convert normalized Ti concentration
    into index increase for each branch.

    ``strength_scale`` is a single dimensionless calibration applied to
    both strength factors.  The textbook factors together with a nominal
    100 nm film overestimate the wells: they make a 2.2 um strip carry two
    modes at 0.812 um, while fabricated-device designs (and independent
    full-2D solves at matching well depths) put the second-mode cutoff
    between 3.4 and 4 um.  The packaged config ships 0.6, which lands the
    whole modal map (single-mode 2.2 um, two-mode 4.0/5.6 um, phase-match
    widths near 3.3/3.0 um for TM/TE) in the published ballpark; 1.0
    reproduces the raw formula.
    """

    film_thickness_um: float = 0.1
    diffusion_depth_um: float = 3.0
    strength_ordinary: float = 0.47
    strength_extraordinary: float = 0.625
    strength_scale: float = 1.0
    dispersion_offset: float = 0.052
    dispersion_slope_um2: float = 0.065
    reference_wavelength_um: float = 0.812
    dispersion_policy: str = "off"

    def __post_init__(self):
        if self.film_thickness_um <= 0 or self.diffusion_depth_um <= 0:
            raise ConfigError("film thickness and diffusion depth must be positive")
        if self.strength_scale <= 0:
            raise ConfigError(f"strength_scale must be positive, got {self.strength_scale}")
        if self.dispersion_policy not in DISPERSION_POLICIES:
            raise ConfigError(
                f"dispersion_policy must be one of {DISPERSION_POLICIES}, "
                f"got {self.dispersion_policy!r}"
            )

    def strength(self, pol: str) -> float:
        check_polarization(pol)
        base = self.strength_extraordinary if pol == "TM" else self.strength_ordinary
        return base * self.strength_scale

    def dispersion_factor(self, wavelength_um: float) -> float:
        """Measured dispersion of the Ti index increase, xi = a + b/lam**2."""
        if wavelength_um <= 0:
            raise DomainError(f"wavelength must be positive, got {wavelength_um}")
        return self.dispersion_offset + self.dispersion_slope_um2 / wavelength_um**2

    def surface_index_change(self, width_um: float, pol: str, wavelength_um: float | None = None) -> float:
        """Peak index increase at the surface centre of a diffused strip.

        Saturates at 2*delta*strength/(sqrt(pi)*D) as the strip width grows.
        When a wavelength is given and the policy is "multiplicative", the
        value is rescaled by xi(lam)/xi(lam_ref).
        """
        if width_um <= 0:
            raise DomainError(f"strip width must be positive, got {width_um}")
        delta = self.film_thickness_um
        depth = self.diffusion_depth_um
        dn = (
            2.0 * delta * self.strength(pol) / (math.sqrt(math.pi) * depth)
            * math.erf(width_um / (2.0 * depth))
        )
        if self.dispersion_policy == "multiplicative" and wavelength_um is not None:
            dn *= self.dispersion_factor(wavelength_um) / self.dispersion_factor(
                self.reference_wavelength_um
            )
        return dn

    def saturation_index_change(self, pol: str) -> float:
        """Wide-strip limit of the surface index increase."""
        return (
            2.0 * self.film_thickness_um * self.strength(pol)
            / (math.sqrt(math.pi) * self.diffusion_depth_um)
        )


@dataclass(frozen=True)
class PockelsCoefficients:
    """Linear electro-optic coefficients, in pm/V."""

    r13_pm_per_v: float = 10.9
    r33_pm_per_v: float = 32.6

    def coefficient(self, pol: str) -> float:
        """r33 acts on the extraordinary (TM) branch, r13 on the ordinary (TE)."""
        check_polarization(pol)
        return self.r33_pm_per_v if pol == "TM" else self.r13_pm_per_v


def eo_index_shift(n: float, r_pm_per_v: float, voltage: float, gap_um: float) -> float:
    """Lumped Pockels index shift -0.5*n**3*r*V/d for field V/d across the gap.

    ``gap_um`` is the electrode gap in micrometres; the result is a plain
    index change (can be of either sign; it is odd in the voltage).
    """
    if gap_um <= 0:
        raise DomainError(f"electrode gap must be positive, got {gap_um}")
    r = r_pm_per_v * 1e-12          # pm/V -> m/V
    gap = gap_um * 1e-6             # um -> m
    return -0.5 * n**3 * r * voltage / gap


@dataclass(frozen=True)
class MaterialModel:
    """Bundle of the three material ingredients plus its provenance hash."""

    sellmeier_ordinary: SellmeierSet
    sellmeier_extraordinary: SellmeierSet
    indiffusion: TiIndiffusionParams
    pockels: PockelsCoefficients

    def sellmeier(self, pol: str) -> SellmeierSet:
        check_polarization(pol)
        return self.sellmeier_extraordinary if pol == "TM" else self.sellmeier_ordinary

    def index(self, wavelength_um: float, pol: str) -> float:
        """Bulk substrate index for the given polarization branch."""
        return self.sellmeier(pol).index(wavelength_um)

    def surface_index_change(self, width_um: float, pol: str, wavelength_um: float | None = None) -> float:
        return self.indiffusion.surface_index_change(width_um, pol, wavelength_um)

    def eo_index_shift(
        self,
        pol: str,
        voltage: float,
        gap_um: float,
        n: float | None = None,
        wavelength_um: float | None = None,
    ) -> float:
        """Pockels shift for the branch; ``n`` defaults to the bulk index."""
        if n is None:
            if wavelength_um is None:
                raise DomainError("eo_index_shift needs either n or wavelength_um")
            n = self.index(wavelength_um, pol)
        return eo_index_shift(n, self.pockels.coefficient(pol), voltage, gap_um)

    def with_dispersion_policy(self, policy: str) -> "MaterialModel":
        return replace(self, indiffusion=replace(self.indiffusion, dispersion_policy=policy))


# --------------------------------------------------------------------------
# Config-file loading.  The format is a TOML document with the sections
# [sellmeier.ordinary], [sellmeier.extraordinary], [indiffusion], [pockels].
# Unknown sections or keys are rejected so typos cannot silently fall back
# to defaults.
# --------------------------------------------------------------------------

_SELLMEIER_KEYS = {"label", "a", "b", "c", "d", "e", "f", "window_um"}
_INDIFFUSION_KEYS = {
    "film_thickness_um",
    "diffusion_depth_um",
    "strength_ordinary",
    "strength_extraordinary",
    "strength_scale",
    "dispersion_offset",
    "dispersion_slope_um2",
    "reference_wavelength_um",
    "dispersion_policy",
}
_POCKELS_KEYS = {"r13_pm_per_v", "r33_pm_per_v"}


def _reject_unknown(given: dict, allowed: set, where: str) -> None:
    unknown = sorted(set(given) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown} in [{where}]")


def _sellmeier_from_table(table: dict, where: str) -> SellmeierSet:
    _reject_unknown(table, _SELLMEIER_KEYS, where)
    missing = sorted(_SELLMEIER_KEYS - set(table))
    if missing:
        raise ConfigError(f"missing key(s) {missing} in [{where}]")
    try:
        return SellmeierSet(
            label=str(table["label"]),
            a=float(table["a"]),
            b=tuple(float(x) for x in table["b"]),
            c=tuple(float(x) for x in table["c"]),
            d=tuple(float(x) for x in table["d"]),
            e=tuple(float(x) for x in table["e"]),
            f=float(table["f"]),
            window_um=tuple(float(x) for x in table["window_um"]),  # type: ignore[arg-type]
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value in [{where}]: {exc}") from exc


def material_from_mapping(doc: dict) -> MaterialModel:
    """Build a model from an already-parsed config mapping (strict keys)."""
    _reject_unknown(doc, {"sellmeier", "indiffusion", "pockels"}, "<root>")
    sell = doc.get("sellmeier", {})
    _reject_unknown(sell, {"ordinary", "extraordinary"}, "sellmeier")
    if "ordinary" not in sell or "extraordinary" not in sell:
        raise ConfigError("config must provide both [sellmeier.ordinary] and [sellmeier.extraordinary]")

    ind_table = doc.get("indiffusion", {})
    _reject_unknown(ind_table, _INDIFFUSION_KEYS, "indiffusion")
    pock_table = doc.get("pockels", {})
    _reject_unknown(pock_table, _POCKELS_KEYS, "pockels")
    try:
        indiffusion = TiIndiffusionParams(**ind_table)
        pockels = PockelsCoefficients(**pock_table)
    except TypeError as exc:
        raise ConfigError(f"bad material config: {exc}") from exc

    return MaterialModel(
        sellmeier_ordinary=_sellmeier_from_table(sell["ordinary"], "sellmeier.ordinary"),
        sellmeier_extraordinary=_sellmeier_from_table(sell["extraordinary"], "sellmeier.extraordinary"),
        indiffusion=indiffusion,
        pockels=pockels,
    )


def load_material_config(path) -> MaterialModel:
    """Load a material model from a TOML config file."""
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        doc = _toml.loads(raw.decode("utf-8"))
    except (_toml.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse material config {path}: {exc}") from exc
    return material_from_mapping(doc)


def default_material_bytes() -> bytes:
    """Raw bytes of the packaged default config (used for config hashing)."""
    return resources.files("tilnsim").joinpath("data/linbo3.toml").read_bytes()


def default_material() -> MaterialModel:
    """Packaged congruent LiNbO3 model (see data/linbo3.toml for provenance)."""
    doc = _toml.loads(default_material_bytes().decode("utf-8"))
    return material_from_mapping(doc)


def config_sha256(path=None) -> str:
    """Hex digest of the config file driving a run (default: packaged data)."""
    if path is None:
        raw = default_material_bytes()
    else:
        with open(path, "rb") as fh:
            raw = fh.read()
    return hashlib.sha256(raw).hexdigest()
