"""Run configuration files.

Flat INI-like format: [section] headers, key = value lines, # comments.
Sections and keys are a closed set; anything unrecognized is a hard error
with file and line so typos cannot silently fall back to defaults.

Example::

    [physics]
    a = 1.0
    mu = 0.1
    lambda = 0.0
    n = 1

    [grid]
    N = 256          # L defaults to 2*R

    [initial]
    profile = quartic_bump_outward
    R = 1.0
    speed = 0.5

    [scheme]
    t_end = 0.1
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Dict, Optional, Tuple

from .core import GridSpec, InitialData, PhysParams, PROFILES, quartic_bump, quartic_bump_outward
from .solver import SchemeConfig


class ConfigError(ValueError):
    """Malformed or invalid configuration; message carries file:line context."""


REQUIRED = object()

# section -> key -> (type tag, default); REQUIRED means the key must appear.
SCHEMA: Dict[str, Dict[str, Tuple[str, object]]] = {
    "physics": {
        "a": ("float", 1.0),
        "mu": ("float", REQUIRED),
        "lambda": ("float", 0.0),
        "n": ("int", REQUIRED),
    },
    "grid": {
        "l": ("float", None),
        "n": ("int", REQUIRED),
    },
    "initial": {
        "profile": ("str", REQUIRED),
        "r": ("float", 1.0),
        "amplitude": ("float", 1.0),
        "speed": ("float", None),
    },
    "scheme": {
        "t_end": ("float", REQUIRED),
        "cfl": ("float", 0.4),
        "rho_cut": ("float", 1e-10),
        "output_every": ("int", 1),
    },
    "output": {
        "particles": ("bool", True),
        "figures": ("bool", True),
    },
}

Entries = Dict[Tuple[str, str], Tuple[str, int]]


def parse_config_text(text: str, path: str = "<config>") -> Entries:
    """Raw (section, key) -> (value string, line number) map, strictly validated."""
    entries: Entries = {}
    section: Optional[str] = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip().lower()
            if name not in SCHEMA:
                raise ConfigError(
                    f"{path}:{lineno}: unknown section [{name}]; "
                    f"expected one of {', '.join(sorted(SCHEMA))}"
                )
            section = name
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.lower()
        if section is None:
            raise ConfigError(f"{path}:{lineno}: key {key!r} appears before any [section]")
        if key not in SCHEMA[section]:
            raise ConfigError(
                f"{path}:{lineno}: unknown key {key!r} in [{section}]; "
                f"allowed: {', '.join(sorted(SCHEMA[section]))}"
            )
        if not value:
            raise ConfigError(f"{path}:{lineno}: empty value for {section}.{key}")
        if (section, key) in entries:
            first = entries[(section, key)][1]
            raise ConfigError(
                f"{path}:{lineno}: duplicate key {section}.{key} (first set on line {first})"
            )
        entries[(section, key)] = (value, lineno)
    return entries


def _convert(tag: str, raw: str, where: str):
    try:
        if tag == "float":
            return float(raw)
        if tag == "int":
            value = int(raw)
            return value
        if tag == "bool":
            low = raw.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {tag}") from None


@dataclass(frozen=True)
class RunConfig:
    """Validated run description: physics, grid shape, initial data, scheme, outputs."""

    params: PhysParams
    grid_spec: GridSpec
    initial: InitialData
    scheme: SchemeConfig
    particles: bool = True
    figures: bool = True
    source: str = "<config>"


def build_run_config(entries: Entries, path: str = "<config>") -> RunConfig:
    """Typed RunConfig from raw entries; semantic errors cite the offending line."""

    def fetch(section: str, key: str):
        tag, default = SCHEMA[section][key]
        if (section, key) in entries:
            raw, lineno = entries[(section, key)]
            return _convert(tag, raw, f"{path}:{lineno}"), lineno
        if default is REQUIRED:
            raise ConfigError(f"{path}: missing required key {key} in [{section}]")
        return default, None

    n, n_line = fetch("physics", "n")
    a, _ = fetch("physics", "a")
    mu, _ = fetch("physics", "mu")
    lam, _ = fetch("physics", "lambda")
    try:
        params = PhysParams(a=a, mu=mu, lam=lam, n=n)
    except ValueError as err:
        raise ConfigError(f"{path}: [physics] {err}") from None

    profile, profile_line = fetch("initial", "profile")
    R, _ = fetch("initial", "r")
    amplitude, _ = fetch("initial", "amplitude")
    speed, speed_line = fetch("initial", "speed")
    if R <= 0.0:
        raise ConfigError(f"{path}: initial.R must be positive, got {R}")
    if profile not in PROFILES:
        raise ConfigError(
            f"{path}:{profile_line}: unknown profile {profile!r}; "
            f"available: {', '.join(sorted(PROFILES))}"
        )
    if profile == "quartic_bump":
        if speed is not None:
            raise ConfigError(
                f"{path}:{speed_line}: initial.speed has no effect for profile quartic_bump"
            )
        initial = quartic_bump(R=R, amplitude=amplitude)
    else:
        initial = quartic_bump_outward(
            R=R, amplitude=amplitude, speed=0.5 if speed is None else speed
        )

    L, L_line = fetch("grid", "l")
    if L is None:
        L = 2.0 * R
    N, N_line = fetch("grid", "n")
    if L <= R:
        where = f"{path}:{L_line}" if L_line else path
        raise ConfigError(f"{where}: grid half-width L={L} must exceed the support radius R={R}")
    if N < 16:
        raise ConfigError(f"{path}:{N_line}: grid.N must be at least 16, got {N}")
    grid_spec = GridSpec(geometry=params.geometry, L=L, N=N)

    t_end, _ = fetch("scheme", "t_end")
    cfl, _ = fetch("scheme", "cfl")
    rho_cut, _ = fetch("scheme", "rho_cut")
    output_every, _ = fetch("scheme", "output_every")
    try:
        scheme = SchemeConfig(t_end=t_end, cfl=cfl, rho_cut=rho_cut, output_every=output_every)
    except ValueError as err:
        raise ConfigError(f"{path}: [scheme] {err}") from None

    particles, _ = fetch("output", "particles")
    figures, _ = fetch("output", "figures")
    return RunConfig(
        params=params,
        grid_spec=grid_spec,
        initial=initial,
        scheme=scheme,
        particles=particles,
        figures=figures,
        source=path,
    )


def load_config(path: str) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return build_run_config(parse_config_text(text, path), path)


def override_entries(entries: Entries, dotted: str, value: str, path: str = "<override>") -> Entries:
    """Copy of entries with section.key forced to a new raw value (sweep support)."""
    if dotted.count(".") != 1:
        raise ConfigError(f"override key must look like section.key, got {dotted!r}")
    section, key = (part.strip().lower() for part in dotted.split("."))
    if section not in SCHEMA or key not in SCHEMA[section]:
        raise ConfigError(f"unknown override target {dotted!r}")
    out = dict(entries)
    out[(section, key)] = (value, 0)
    return out
