"""Finitary signatures: base types, product types and typed generators."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import yaml

from .errors import DataIOError, ParseError, SchemaError, ValidationError

_IDENT = re.compile(r"^[A-Za-z0-9_]+$")


class Ty(tuple):
    """A product of base types; the empty product is the monoidal unit I.

    >>> Ty("R") @ Ty("R")
    Ty('R', 'R')
    >>> str(Ty("A", "B")), str(Ty())
    ('[A*B]', '[]')
    """

    def __new__(cls, *factors: str) -> Ty:
        return super().__new__(cls, factors)

    def __getnewargs__(self):
        return tuple(self)

    def __repr__(self) -> str:
        return f"Ty({', '.join(repr(f) for f in self)})"

    def __str__(self) -> str:
        return "[" + "*".join(self) + "]"

    def __matmul__(self, other: Ty) -> Ty:
        return tensor(self, other)

    def __getitem__(self, key):
        got = super().__getitem__(key)
        return Ty(*got) if isinstance(key, slice) else got

    @property
    def is_unit(self) -> bool:
        return len(self) == 0


I = Ty()


def tensor(*tys: Ty) -> Ty:
    """Monoidal product of types: concatenation of factor lists."""
    factors: list[str] = []
    for ty in tys:
        factors.extend(ty)
    return Ty(*factors)


def is_sublist(needle: Ty, hay: Ty) -> bool:
    """True when ``needle`` occurs as a contiguous run inside ``hay``."""
    n = len(needle)
    if n == 0:
        return True
    return any(hay[i:i + n] == needle for i in range(len(hay) - n + 1))


def parse_ty(text: str) -> Ty:
    """Parse ``[A*B]``, ``A*B``, ``[]`` or ``I``."""
    s = text.strip()
    if s in ("I", "[]", ""):
        return I
    if s.startswith("[") != s.endswith("]"):
        raise ParseError(f"unbalanced brackets in type {text!r}")
    if s.startswith("["):
        s = s[1:-1].strip()
    if not s:
        return I
    parts = [p.strip() for p in s.split("*")]
    for p in parts:
        if not _IDENT.match(p):
            raise ParseError(f"bad type factor {p!r} in {text!r}")
    return Ty(*parts)


@dataclass(frozen=True)
class Generator:
    name: str
    dom: Ty
    cod: Ty

    def __str__(self) -> str:
        return f"{self.name}: {self.dom} -> {self.cod}"


@dataclass(frozen=True)
class Signature:
    """A finite set of objects O and generators M over some base types.

    Generator order is significant: it fixes the indices of the generator
    weights in the prior.
    """

    base_types: tuple[str, ...]
    objects: tuple[Ty, ...]
    generators: tuple[Generator, ...]

    def generator(self, name: str) -> Generator:
        for g in self.generators:
            if g.name == name:
                return g
        raise KeyError(name)

    def generator_index(self, name: str) -> int:
        for i, g in enumerate(self.generators):
            if g.name == name:
                return i
        raise KeyError(name)

    @property
    def longest_object(self) -> int:
        return max(len(o) for o in self.objects)

    def to_document(self) -> dict:
        return {
            "base_types": list(self.base_types),
            "objects": [list(o) for o in self.objects],
            "generators": [
                {"name": g.name, "dom": list(g.dom), "cod": list(g.cod)}
                for g in self.generators
            ],
        }


def _str_list(value, what: str) -> list[str]:
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise SchemaError(f"`{what}` must be a list of strings")
    return value


def signature_from_document(doc) -> Signature:
    if not isinstance(doc, dict):
        raise SchemaError("signature document must be a mapping")
    unknown = set(doc) - {"base_types", "objects", "generators"}
    if unknown:
        raise SchemaError(f"unknown top-level key(s): {sorted(unknown)}")
    for key in ("base_types", "objects", "generators"):
        if key not in doc:
            raise SchemaError(f"missing top-level key `{key}`")

    base = _str_list(doc["base_types"], "base_types")
    for b in base:
        if not _IDENT.match(b):
            raise ValidationError(f"base type name {b!r} is not an identifier")
    if len(set(base)) != len(base):
        raise ValidationError("duplicate base type names")

    if not isinstance(doc["objects"], list):
        raise SchemaError("`objects` must be a list of lists of strings")
    objects: list[Ty] = []
    for i, o in enumerate(doc["objects"]):
        factors = _str_list(o, f"objects[{i}]")
        for f in factors:
            if f not in base:
                raise ValidationError(f"objects[{i}] uses undeclared base type {f!r}")
        ty = Ty(*factors)
        if ty not in objects:
            objects.append(ty)
    if not objects:
        raise ValidationError("`objects` must not be empty")
    for b in base:
        if Ty(b) not in objects:
            objects.append(Ty(b))

    if not isinstance(doc["generators"], list):
        raise SchemaError("`generators` must be a list")
    gens: list[Generator] = []
    seen: set[str] = set()
    for i, entry in enumerate(doc["generators"]):
        if not isinstance(entry, dict) or set(entry) != {"name", "dom", "cod"}:
            raise SchemaError(f"generators[{i}] must have exactly the keys name, dom, cod")
        name = entry["name"]
        if not isinstance(name, str) or not _IDENT.match(name):
            raise ValidationError(f"generators[{i}].name {name!r} is not an identifier")
        if name in seen:
            raise ValidationError(f"duplicate generator name {name!r}")
        seen.add(name)
        dom = Ty(*_str_list(entry["dom"], f"generators[{i}].dom"))
        cod = Ty(*_str_list(entry["cod"], f"generators[{i}].cod"))
        for side, ty in (("dom", dom), ("cod", cod)):
            if ty not in objects:
                raise ValidationError(f"generator {name!r}: {side} {ty} is not a declared object")
        if name == "id" and dom == cod:
            raise ValidationError(f"generator {name!r} would be the identity on {dom}")
        gens.append(Generator(name, dom, cod))

    return Signature(tuple(base), tuple(objects), tuple(gens))


def parse_signature(text: str) -> Signature:
    """Parse and validate a YAML (or JSON) signature document."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise SchemaError(f"malformed signature document: {exc}") from exc
    return signature_from_document(doc)


def serialize_signature(sig: Signature) -> str:
    return yaml.safe_dump(sig.to_document(), sort_keys=False, default_flow_style=None)


def load_signature(path) -> Signature:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataIOError(f"cannot read signature {path}: {exc}") from exc
    return parse_signature(text)
