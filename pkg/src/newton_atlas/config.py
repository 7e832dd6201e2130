"""Map and family configuration files (TOML or JSON).

A map config holds ``p`` and ``q`` coefficient arrays ([re, im] pairs in
ascending degree), either at the top level or under ``[map]``.  A family
config has a ``[family]`` table whose ``p`` and ``q`` are lists of
coefficient arrays, entry i multiplying c**i; only entries 0 and 1 (affine
dependence on c) are supported.  Setting ``c = [re, im]`` picks a member.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import Optional

from .algebra import Polynomial
from .dynamics import Family
from .newton import NewtonSpec, build_newton

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    pass


def load_config(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from exc
    try:
        if path.suffix.lower() == ".json":
            return json.loads(text)
        try:
            return tomllib.loads(text)
        except tomllib.TOMLDecodeError:
            return json.loads(text)
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _poly(value, where: str) -> Polynomial:
    try:
        return Polynomial.from_json(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _complex(value, where: str) -> complex:
    try:
        if isinstance(value, (list, tuple)):
            re, im = value
            return complex(float(re), float(im))
        return complex(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: expected [re, im], got {value!r}") from exc


def parse_family(cfg: dict, where: str = "family") -> Family:
    fam = cfg.get("family")
    if not isinstance(fam, dict):
        raise ConfigError(f"{where}: missing [family] table")
    parts = {}
    for key in ("p", "q"):
        terms = fam.get(key, [[[0, 0]]] if key == "q" else None)
        if not isinstance(terms, list) or not terms:
            raise ConfigError(f"{where}.{key}: expected a list of coefficient arrays")
        if len(terms) > 2:
            raise ConfigError(f"{where}.{key}: only affine dependence on c is supported "
                              f"(got {len(terms)} powers of c)")
        polys = [_poly(t, f"{where}.{key}[{i}]") for i, t in enumerate(terms)]
        if len(polys) == 1:
            polys.append(Polynomial([0]))
        parts[key] = polys
    return Family(parts["p"][0], parts["p"][1], parts["q"][0], parts["q"][1])


def family_member(cfg: dict) -> Optional[complex]:
    fam = cfg.get("family", {})
    return _complex(fam["c"], "family.c") if "c" in fam else None


def family_region(cfg: dict) -> Optional[tuple]:
    fam = cfg.get("family", {})
    if "region" not in fam:
        return None
    r = fam["region"]
    if not (isinstance(r, list) and len(r) == 4):
        raise ConfigError("family.region: expected [re_min, re_max, im_min, im_max]")
    return tuple(float(v) for v in r)


def parse_map(cfg: dict, where: str = "map") -> NewtonSpec:
    """NewtonSpec from a map config, or from a family config with c set."""
    if "family" in cfg:
        c = family_member(cfg)
        if c is None:
            raise ConfigError(f"{where}: family config needs c = [re, im] to pick a map")
        p, q = parse_family(cfg).at(c)
        return build_newton(p, q)
    table = cfg.get("map", cfg)
    if "p" not in table:
        raise ConfigError(f"{where}: missing p")
    p = _poly(table["p"], f"{where}.p")
    q = _poly(table.get("q", [[0, 0]]), f"{where}.q")
    if p.degree < 1:
        raise ConfigError(f"{where}.p: degree must be at least 1")
    return build_newton(p, q)


def spec_to_config(spec: NewtonSpec) -> dict:
    return {"p": spec.p.to_json(), "q": spec.q.to_json()}
