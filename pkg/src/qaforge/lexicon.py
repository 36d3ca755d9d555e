"""Entity lexicon: role schemas, answer classes and surface forms.

The lexicon is configuration, not code: the shipped ``data/lexicon.json``
reconstructs a Mario-flavoured vocabulary whose derived answer-class set
has exactly 57 members, but any file with the same shape works.  It
declares, per event type, which roles are mandatory/optional and which
role anchors reference clauses; per entity, the answer-class surface form,
the in-sentence noun and optional role-specific phrases; plus stage/state
surface forms and the counting cap.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Mapping, Optional, Union

from .model import (
    ConfigError,
    EventType,
    GameplaySession,
    LexiconError,
    MarioState,
    Role,
    SessionValidationError,
)

_VOWELS = "aeiou"


def indefinite(noun: str) -> str:
    """Prepend 'a'/'an' using the vowel-initial heuristic."""
    article = "an" if noun[:1].lower() in _VOWELS else "a"
    return f"{article} {noun}"


@dataclass(frozen=True)
class EntityEntry:
    token: str
    category: str
    answer: str
    noun: str
    plural: str
    phrases: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class EventSchema:
    etype: EventType
    mandatory: tuple[Role, ...]
    optional: tuple[Role, ...]
    reference: Optional[Role]

    @property
    def roles(self) -> tuple[Role, ...]:
        return self.mandatory + self.optional


class Lexicon:
    """Validated vocabulary shared by the simulator, generator and oracle."""

    def __init__(
        self,
        stages: Mapping[str, str],
        states: Mapping[MarioState, str],
        max_count: int,
        events: Mapping[EventType, EventSchema],
        clauses: Mapping[EventType, Mapping[str, str]],
        entities: Mapping[str, EntityEntry],
    ):
        self.stages = dict(stages)
        self.states = dict(states)
        self.max_count = max_count
        self.events = dict(events)
        self.clauses = dict(clauses)
        self.entities = dict(entities)
        self._validate()

    def _validate(self) -> None:
        if self.max_count < 1:
            raise ConfigError("max_count must be >= 1")
        if set(self.states) != set(MarioState):
            raise ConfigError("lexicon must name every mario state")
        if not self.stages:
            raise ConfigError("lexicon must declare at least one stage type")
        for etype in EventType:
            if etype not in self.events:
                raise ConfigError(f"lexicon missing role schema for event {etype.value!r}")
            if etype not in self.clauses or "default" not in self.clauses[etype]:
                raise ConfigError(f"lexicon missing default clause for event {etype.value!r}")
            schema = self.events[etype]
            if set(schema.mandatory) & set(schema.optional):
                raise ConfigError(f"{etype.value}: role listed as both mandatory and optional")
            if schema.reference is not None and schema.reference not in schema.mandatory:
                raise ConfigError(
                    f"{etype.value}: reference role {schema.reference.value!r} must be mandatory"
                )

    # ---- lookups --------------------------------------------------------- #

    def entity(self, token: str) -> EntityEntry:
        try:
            return self.entities[token]
        except KeyError:
            raise LexiconError(f"unknown entity {token!r}") from None

    def schema(self, etype: EventType) -> EventSchema:
        return self.events[etype]

    def clause_template(self, etype: EventType, relation_token: str) -> str:
        forms = self.clauses[etype]
        return forms.get(relation_token, forms["default"])

    # ---- answer classes --------------------------------------------------- #

    def answer_class(self, token: str) -> str:
        return self.entity(token).answer

    def count_class(self, n: int) -> str:
        if not 0 <= n <= self.max_count:
            raise LexiconError(f"count {n} outside supported range 0..{self.max_count}")
        return str(n)

    def state_class(self, state: MarioState) -> str:
        return self.states[state]

    def stage_class(self, token: str) -> str:
        try:
            return self.stages[token]
        except KeyError:
            raise LexiconError(f"unknown stage type {token!r}") from None

    def answer_classes(self) -> tuple[str, ...]:
        """The full answer vocabulary derived from this lexicon, sorted."""
        classes = {e.answer for e in self.entities.values()}
        classes.update(self.states.values())
        classes.update(self.stages.values())
        classes.update(str(n) for n in range(self.max_count + 1))
        return tuple(sorted(classes))

    # ---- surface realization ---------------------------------------------- #

    def realize_arg(self, token: str, role: Role, style: Optional[str]) -> str:
        """Surface form for an argument slot.

        Without a style modifier the role-specific phrase wins when the
        entity declares one (``means:stomping -> 'by stomping'``), falling
        back to the bare noun.  Styles: ``a`` (indefinite article),
        ``the`` (definite article), ``plural``.
        """
        entry = self.entity(token)
        if style is None:
            return entry.phrases.get(role.value, entry.noun)
        if style == "a":
            return indefinite(entry.noun)
        if style == "the":
            return f"the {entry.noun}"
        if style == "plural":
            return entry.plural
        raise LexiconError(f"unknown slot style {style!r}")

    # ---- session validation ------------------------------------------------ #

    def validate_session(self, session: GameplaySession) -> None:
        """Check lexicon-dependent invariants (entity membership, mandatory roles)."""
        if session.stage_type not in self.stages:
            raise SessionValidationError(
                f"session {session.id}: unknown stage type {session.stage_type!r}"
            )
        for ev in session.events:
            schema = self.schema(ev.etype)
            for role in schema.mandatory:
                if role not in ev.args:
                    raise SessionValidationError(
                        f"session {session.id}: event {ev.id} ({ev.etype.value}) "
                        f"missing mandatory role {role.value!r}"
                    )
            for role, token in ev.args.items():
                if role not in schema.roles:
                    raise SessionValidationError(
                        f"session {session.id}: event {ev.id} ({ev.etype.value}) "
                        f"carries undeclared role {role.value!r}"
                    )
                if token not in self.entities:
                    raise SessionValidationError(
                        f"session {session.id}: event {ev.id} references "
                        f"unknown entity {token!r}"
                    )


def _parse_entity(token: str, obj: dict) -> EntityEntry:
    for key in ("category", "answer", "noun"):
        if key not in obj:
            raise ConfigError(f"entity {token!r} missing field {key!r}")
    noun = obj["noun"]
    return EntityEntry(
        token=token,
        category=obj["category"],
        answer=obj["answer"],
        noun=noun,
        plural=obj.get("plural", noun + "s"),
        phrases=dict(obj.get("phrases", {})),
    )


def lexicon_from_obj(obj: dict) -> Lexicon:
    try:
        stages = dict(obj["stages"])
        states = {MarioState(k): v for k, v in obj["states"].items()}
        max_count = obj["max_count"]
        raw_events = obj["events"]
        raw_clauses = obj["clauses"]
        raw_entities = obj["entities"]
    except KeyError as exc:
        raise ConfigError(f"lexicon missing section {exc.args[0]!r}") from None
    except ValueError as exc:
        raise ConfigError(f"lexicon states: {exc}") from None
    events = {}
    for name, schema in raw_events.items():
        try:
            etype = EventType(name)
        except ValueError:
            raise ConfigError(f"lexicon events: unknown event type {name!r}") from None
        ref = schema.get("reference")
        events[etype] = EventSchema(
            etype=etype,
            mandatory=tuple(Role(r) for r in schema.get("mandatory", [])),
            optional=tuple(Role(r) for r in schema.get("optional", [])),
            reference=Role(ref) if ref else None,
        )
    clauses = {}
    for name, forms in raw_clauses.items():
        try:
            etype = EventType(name)
        except ValueError:
            raise ConfigError(f"lexicon clauses: unknown event type {name!r}") from None
        clauses[etype] = dict(forms)
    entities = {tok: _parse_entity(tok, entry) for tok, entry in raw_entities.items()}
    return Lexicon(
        stages=stages,
        states=states,
        max_count=max_count,
        events=events,
        clauses=clauses,
        entities=entities,
    )


def load_lexicon(path: Optional[Union[str, "object"]] = None) -> Lexicon:
    """Load a lexicon file, defaulting to the packaged one."""
    if path is None:
        text = resources.files("qaforge.data").joinpath("lexicon.json").read_text("utf-8")
    else:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"lexicon line {exc.lineno}: {exc.msg}") from None
    return lexicon_from_obj(obj)
