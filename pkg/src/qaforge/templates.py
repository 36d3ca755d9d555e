"""Question templates: loading, signature matching, slot filling and re-parsing.

A template surface is plain text with slots.  ``{arg:ROLE}`` realizes an
argument through the lexicon (role phrase or bare noun); ``{arg:ROLE:a}``,
``{arg:ROLE:the}`` and ``{arg:ROLE:plural}`` force article/plural forms;
``{temporal_clause}`` expands to the rendered constraint clause (prefixed
with a space) or to nothing for unconstrained chunks.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Mapping, Optional, Sequence

from .lexicon import Lexicon
from .model import (
    ConfigError,
    CoverageError,
    EventType,
    LexiconError,
    QuestionType,
    Role,
    SemanticChunk,
    PROBE_MARIO_STATE,
    PROBE_STAGE_TYPE,
)
from .seeding import SeedLike, make_rng

SLOT_RE = re.compile(
    r"\{arg:(agent|patient|means|location)(?::(a|the|plural))?\}|\{temporal_clause\}"
)
_BRACE_RE = re.compile(r"[{}]")
_RESERVED_TOKENS_RE = re.compile(r"\b(before|after|when)\b", re.IGNORECASE)


def surface_slots(surface: str) -> list[str]:
    """The slot specs appearing in a surface, e.g. ['arg:means', 'temporal_clause']."""
    specs = []
    for m in SLOT_RE.finditer(surface):
        if m.group(0) == "{temporal_clause}":
            specs.append("temporal_clause")
        elif m.group(2):
            specs.append(f"arg:{m.group(1)}:{m.group(2)}")
        else:
            specs.append(f"arg:{m.group(1)}")
    return specs


def render_surface(
    surface: str,
    arg_tokens: Mapping[Role, str],
    lexicon: Lexicon,
    temporal_clause: str = "",
) -> str:
    """Substitute every slot in a surface string."""

    def repl(m: re.Match) -> str:
        if m.group(0) == "{temporal_clause}":
            return temporal_clause
        role = Role(m.group(1))
        token = arg_tokens.get(role)
        if token is None:
            raise LexiconError(f"no argument bound for slot role {role.value!r}")
        return lexicon.realize_arg(token, role, m.group(2))

    return SLOT_RE.sub(repl, surface)


@dataclass(frozen=True)
class Template:
    """One surface realization for a chunk signature.

    ``requires`` pins non-hole arguments to exact entities so that surfaces
    with hard-coded wording (e.g. a verb implying the instrument) only fire
    when they stay truthful.
    """

    id: str
    qtype: QuestionType
    predicate: Optional[EventType] = None
    probe: Optional[str] = None
    hole: Optional[Role] = None
    needs_constraint: bool = False
    requires: Mapping[Role, str] = field(default_factory=dict)
    surface: str = ""

    def signature(self) -> tuple:
        head = self.probe if self.qtype is QuestionType.STATE else (
            self.predicate.value if self.predicate else None
        )
        return (
            self.qtype.value,
            head,
            self.hole.value if self.hole else None,
            self.needs_constraint,
        )

    def expressed_roles(self) -> frozenset[Role]:
        roles = {Role(spec.split(":")[1]) for spec in surface_slots(self.surface) if spec.startswith("arg:")}
        roles.update(self.requires)
        return frozenset(roles)

    def matches(self, chunk: SemanticChunk) -> bool:
        if self.qtype is not chunk.qtype:
            return False
        if chunk.qtype is QuestionType.STATE:
            if self.probe != chunk.probe:
                return False
        else:
            if self.predicate is not chunk.predicate:
                return False
        if self.hole is not chunk.hole:
            return False
        if self.needs_constraint != (chunk.constraint is not None):
            return False
        if any(chunk.args.get(role) != value for role, value in self.requires.items()):
            return False
        # The question must say exactly what the chunk means: every bound
        # argument is either realized in a slot or pinned by `requires`,
        # and no slot is left without a binding.
        return self.expressed_roles() == frozenset(chunk.args)


def _chunk_signature(chunk: SemanticChunk) -> tuple:
    head = chunk.probe if chunk.qtype is QuestionType.STATE else (
        chunk.predicate.value if chunk.predicate else None
    )
    return (
        chunk.qtype.value,
        head,
        chunk.hole.value if chunk.hole else None,
        chunk.constraint is not None,
    )


class TemplatePool:
    """An ordered collection of templates indexed by signature."""

    def __init__(self, templates: Sequence[Template]):
        self.templates = tuple(templates)
        self._index: dict[tuple, list[Template]] = {}
        for t in self.templates:
            self._index.setdefault(t.signature(), []).append(t)

    def __len__(self) -> int:
        return len(self.templates)

    def matching(self, chunk: SemanticChunk) -> tuple[Template, ...]:
        return tuple(
            t for t in self._index.get(_chunk_signature(chunk), []) if t.matches(chunk)
        )

    def signatures(self) -> tuple[tuple, ...]:
        return tuple(self._index)


def select_template(pool: TemplatePool, chunk: SemanticChunk, seed: SeedLike) -> Template:
    """Seeded uniform choice among the templates matching the chunk."""
    matching = pool.matching(chunk)
    if not matching:
        raise CoverageError(f"no template matches signature {_chunk_signature(chunk)}")
    rng = make_rng(seed)
    return matching[int(rng.integers(0, len(matching)))]


def parse_with_template(
    template: Template, question: str, lexicon: Lexicon
) -> Optional[dict[str, str]]:
    """Recover slot fillers from a realized question, or None if it cannot match.

    Inverts ``render_surface`` for round-trip checking.  Argument slots
    match an alternation of every surface form the lexicon can realize for
    that role and style (longest first, so phrases that extend others are
    preferred); the temporal clause captures lazily against the literal
    tail.
    """
    parts: list[str] = ["^"]
    names: dict[str, str] = {}
    pos = 0
    for i, m in enumerate(SLOT_RE.finditer(template.surface)):
        parts.append(re.escape(template.surface[pos : m.start()]))
        group = f"slot{i}"
        spec = surface_slots(template.surface[m.start() : m.end()])[0]
        names[group] = spec
        if spec == "temporal_clause":
            parts.append(f"(?P<{group}>.*?)")
        else:
            bits = spec.split(":")
            role = Role(bits[1])
            style = bits[2] if len(bits) == 3 else None
            forms = sorted(
                {lexicon.realize_arg(tok, role, style) for tok in lexicon.entities},
                key=len,
                reverse=True,
            )
            alternation = "|".join(re.escape(f) for f in forms)
            parts.append(f"(?P<{group}>(?:{alternation}))")
        pos = m.end()
    parts.append(re.escape(template.surface[pos:]))
    parts.append("$")
    match = re.match("".join(parts), question)
    if match is None:
        return None
    return {names[g]: v for g, v in match.groupdict().items()}


# --------------------------------------------------------------------------- #
# Loading
# --------------------------------------------------------------------------- #


def _template_from_obj(obj: dict) -> Template:
    if "id" not in obj or "surface" not in obj or "qtype" not in obj:
        raise ConfigError(f"template missing id/qtype/surface: {obj!r}")
    tid = obj["id"]
    try:
        qtype = QuestionType(obj["qtype"])
        predicate = EventType(obj["predicate"]) if "predicate" in obj else None
        hole = Role(obj["hole"]) if "hole" in obj else None
        requires = {Role(k): v for k, v in obj.get("requires", {}).items()}
    except ValueError as exc:
        raise ConfigError(f"template {tid!r}: {exc}") from None
    probe = obj.get("probe")
    needs_constraint = bool(obj.get("constraint", False))
    surface = obj["surface"]

    if qtype is QuestionType.STATE:
        if probe not in (PROBE_MARIO_STATE, PROBE_STAGE_TYPE):
            raise ConfigError(f"template {tid!r}: unknown probe {probe!r}")
    elif predicate is None:
        raise ConfigError(f"template {tid!r}: missing predicate")
    if qtype is QuestionType.EVENT_CENTRIC and hole is None:
        raise ConfigError(f"template {tid!r}: event-centric template needs a hole")
    if qtype is not QuestionType.EVENT_CENTRIC and hole is not None:
        raise ConfigError(f"template {tid!r}: only event-centric templates take a hole")

    # Structural surface checks: slots must parse, the clause slot must agree
    # with the constraint flag, literals must not smuggle temporal markers,
    # and the hole must never be realized in the question itself.
    residue = SLOT_RE.sub("", surface)
    if _BRACE_RE.search(residue):
        raise ConfigError(f"template {tid!r}: unparseable slot in surface {surface!r}")
    if _RESERVED_TOKENS_RE.search(residue):
        raise ConfigError(
            f"template {tid!r}: literal temporal marker in surface {surface!r}"
        )
    slots = surface_slots(surface)
    has_clause = "temporal_clause" in slots
    if needs_constraint and not has_clause:
        raise ConfigError(f"template {tid!r}: constraint template without clause slot")
    if not needs_constraint and has_clause:
        raise ConfigError(f"template {tid!r}: clause slot on unconstrained template")
    if hole is not None:
        for spec in slots:
            if spec.startswith("arg:") and Role(spec.split(":")[1]) is hole:
                raise ConfigError(f"template {tid!r}: surface realizes the hole")
    if hole is not None and hole in requires:
        raise ConfigError(f"template {tid!r}: requires pins the hole role")
    if qtype is QuestionType.STATE and any(s.startswith("arg:") for s in slots):
        raise ConfigError(f"template {tid!r}: state templates take no argument slots")

    return Template(
        id=tid,
        qtype=qtype,
        predicate=predicate,
        probe=probe,
        hole=hole,
        needs_constraint=needs_constraint,
        requires=requires,
        surface=surface,
    )


def templates_from_obj(obj: object) -> TemplatePool:
    if not isinstance(obj, list):
        raise ConfigError("template pool must be a JSON array")
    templates = []
    seen: set[str] = set()
    for entry in obj:
        t = _template_from_obj(entry)
        if t.id in seen:
            raise ConfigError(f"duplicate template id {t.id!r}")
        seen.add(t.id)
        templates.append(t)
    return TemplatePool(templates)


def load_templates(path: Optional[str] = None) -> TemplatePool:
    """Load a template pool, defaulting to the packaged one."""
    if path is None:
        text = resources.files("qaforge.data").joinpath("templates.json").read_text("utf-8")
    else:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"template pool line {exc.lineno}: {exc.msg}") from None
    return templates_from_obj(obj)
