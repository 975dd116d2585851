"""Beam geometry, material data, and derived model coefficients.

All quantities are SI; there is no unit-conversion layer. The derived
coefficients are

    m  = rho1*h1 + rho3*h3            mass per unit area of the face layers
    K1 = rho1*h1^3/12 + rho3*h3^3/12  rotational inertia coefficient
    K2 = alpha1*h1^3/12 + alpha3*h3^3/12  bending stiffness
    H  = (h1 + 2*h2 + h3)/2           inter-face lever arm
    xi = eps1*h3^2 / (12*eps3)        induced-potential length scale (m^2)
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass

from .errors import ConfigParseError, InvalidConfig

GEOMETRY_FIELDS = ("length_L", "width_b", "h1", "h2", "h3")
MATERIAL_FIELDS = ("rho1", "rho3", "alpha1", "alpha3", "G2", "gamma", "eps1", "eps3", "mu")


@dataclass(frozen=True)
class LayerGeometry:
    """Layer geometry: stiff (1), viscoelastic core (2), piezoelectric (3)."""

    length_L: float
    width_b: float
    h1: float
    h2: float
    h3: float


@dataclass(frozen=True)
class MaterialParams:
    """Material constants; gamma's sign encodes the poling direction."""

    rho1: float
    rho3: float
    alpha1: float
    alpha3: float
    G2: float
    gamma: float
    eps1: float
    eps3: float
    mu: float


@dataclass(frozen=True)
class DerivedParams:
    m: float
    K1: float
    K2: float
    H: float
    xi: float


@dataclass(frozen=True)
class BeamConfig:
    """Validated geometry + materials + derived coefficients.

    Immutable after construction; safe to share read-only across threads.
    """

    geometry: LayerGeometry
    materials: MaterialParams
    derived: DerivedParams

    @classmethod
    def from_parts(cls, geometry: LayerGeometry, materials: MaterialParams) -> "BeamConfig":
        return cls(geometry, materials, derive_params(geometry, materials))

    # Flat accessors used throughout assembly code.
    @property
    def L(self) -> float:
        return self.geometry.length_L

    def __getattr__(self, name):
        for part in ("geometry", "materials", "derived"):
            obj = object.__getattribute__(self, part)
            if hasattr(obj, name):
                return getattr(obj, name)
        raise AttributeError(name)


def validate_config(geometry: LayerGeometry, materials: MaterialParams) -> list[str]:
    """Return a list of invariant violations; empty iff the config is admissible.

    Violations are data, not exceptions: each entry names the offending field.
    """
    violations = []
    for name in GEOMETRY_FIELDS:
        if not getattr(geometry, name) > 0.0:
            violations.append(f"{name} must be > 0")
    for name in MATERIAL_FIELDS:
        if name == "gamma":
            continue  # any real; sign encodes poling direction
        if not getattr(materials, name) > 0.0:
            violations.append(f"{name} must be > 0")
    return violations


def derive_params(geometry: LayerGeometry, materials: MaterialParams) -> DerivedParams:
    """Compute the derived coefficients, validating positivity first."""
    violations = validate_config(geometry, materials)
    if violations:
        raise InvalidConfig("; ".join(violations))
    g, mt = geometry, materials
    return DerivedParams(
        m=mt.rho1 * g.h1 + mt.rho3 * g.h3,
        K1=mt.rho1 * g.h1**3 / 12.0 + mt.rho3 * g.h3**3 / 12.0,
        K2=mt.alpha1 * g.h1**3 / 12.0 + mt.alpha3 * g.h3**3 / 12.0,
        H=(g.h1 + 2.0 * g.h2 + g.h3) / 2.0,
        xi=mt.eps1 * g.h3**2 / (12.0 * mt.eps3),
    )


def default_config() -> BeamConfig:
    """Demonstration configuration shipped with the repo.

    Aluminum-like stiff layer, soft core, piezoceramic-like face layer, in
    normalized (non-SI-calibrated) magnitudes chosen so that desk-scale runs
    are well conditioned. These numbers are implementation choices for demos
    and tests, not measured device data.
    """
    geometry = LayerGeometry(length_L=1.0, width_b=0.1, h1=0.12, h2=0.08, h3=0.15)
    materials = MaterialParams(
        rho1=2.7,
        rho3=7.5,
        alpha1=70.0,
        alpha3=60.0,
        G2=0.8,
        gamma=1.2,
        eps1=4.0,
        eps3=0.5,
        mu=1.5,
    )
    return BeamConfig.from_parts(geometry, materials)


_SECTION_FIELDS = {"geometry": GEOMETRY_FIELDS, "material": MATERIAL_FIELDS}


def _find_line(text: str, key: str) -> int:
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith(key) and stripped[len(key):].lstrip().startswith(("=", ":")):
            return lineno
    return 0


def parse_config(text: str, source: str = "<config>") -> BeamConfig:
    """Parse a config from INI-style text with [geometry] and [material] sections."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keys are case-sensitive (G2 vs g2)
    try:
        parser.read_string(text, source=source)
    except configparser.ParsingError as exc:
        raise ConfigParseError(str(exc)) from exc
    except configparser.Error as exc:
        raise ConfigParseError(f"{source}: {exc}") from exc

    values: dict[str, dict[str, float]] = {}
    for section, fields in _SECTION_FIELDS.items():
        if not parser.has_section(section):
            raise ConfigParseError(f"{source}: missing [{section}] section")
        values[section] = {}
        for key in parser.options(section):
            if key not in fields:
                lineno = _find_line(text, key)
                hint = " (the g3 boundary port is not modeled)" if key == "g3" else ""
                raise ConfigParseError(
                    f"{source}: line {lineno}: unknown key '{key}' in [{section}]{hint}"
                )
            raw = parser.get(section, key)
            try:
                values[section][key] = float(raw)
            except ValueError as exc:
                lineno = _find_line(text, key)
                raise ConfigParseError(
                    f"{source}: line {lineno}: cannot parse {key} = {raw!r} as a number"
                ) from exc
        missing = [f for f in fields if f not in values[section]]
        if missing:
            raise ConfigParseError(
                f"{source}: [{section}] missing keys: {', '.join(missing)}"
            )

    geometry = LayerGeometry(**values["geometry"])
    materials = MaterialParams(**values["material"])
    return BeamConfig.from_parts(geometry, materials)


def load_config(path) -> BeamConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read(), source=str(path))


def config_text(config: BeamConfig) -> str:
    """Serialize a config to the INI format accepted by parse_config."""
    out = io.StringIO()
    out.write("[geometry]\n")
    for name in GEOMETRY_FIELDS:
        out.write(f"{name} = {getattr(config.geometry, name)!r}\n")
    out.write("\n[material]\n")
    for name in MATERIAL_FIELDS:
        out.write(f"{name} = {getattr(config.materials, name)!r}\n")
    return out.getvalue()


def save_config(config: BeamConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(config_text(config))


def config_sha256(config: BeamConfig) -> str:
    return hashlib.sha256(config_text(config).encode("utf-8")).hexdigest()
