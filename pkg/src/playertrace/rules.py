"""Domain-knowledge rules that detect successful skill applications in a window.

Each rule targets one catalog skill and is a small declarative matcher over
the event vocabulary. Counts are taken over ``window.events``; matchers that
need level history (what was placed before a submission, whether a level
was ever solved) read ``window.level_events`` but only count triggers that
lie inside the window.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .features import Window
from .telemetry import N_SKILLS, SKILL_NAMES, Event, EventKind, skill_id

K = EventKind
DRAGGABLE = frozenset({"semaphore", "signal"})
MIN_HOVER_DWELL_MS = 500
SIGNIFICANT_MOVE_PX = 100.0
RESULTS = (K.TEST_RESULT, K.SUBMIT_RESULT)


@dataclass(frozen=True)
class KindCount:
    """Count events of the given kinds, optionally filtered by a payload predicate."""

    kinds: tuple[EventKind, ...]
    where: Callable[[Event], bool] | None = None
    describe: str = ""

    def count(self, window: Window) -> int:
        return sum(1 for e in window.events
                   if e.kind in self.kinds and (self.where is None or self.where(e)))


@dataclass(frozen=True)
class OrderedPair:
    """Ordered two-event pattern inside one window.

    With ``anchor="second"`` each ``second`` event preceded by some ``first``
    event counts once; with ``anchor="first"`` each ``first`` event followed
    by some ``second`` event counts once.
    """

    first: EventKind
    second: EventKind
    anchor: str = "second"
    describe: str = ""

    def count(self, window: Window) -> int:
        evs = window.events
        if self.anchor == "second":
            n, seen = 0, False
            for e in evs:
                if e.kind is self.first:
                    seen = True
                elif e.kind is self.second and seen:
                    n += 1
            return n
        n, seen = 0, False
        for e in reversed(evs):
            if e.kind is self.second:
                seen = True
            elif e.kind is self.first and seen:
                n += 1
        return n


@dataclass(frozen=True)
class CrossLinks:
    """Pairs of semaphore-signal links wired across two different tracks in
    both directions (A's signal to B's semaphore and B's signal to A's)."""

    describe: str = ""

    def count(self, window: Window) -> int:
        links = [(e.get("semaphore_track"), e.get("signal_track"))
                 for e in window.events if e.kind is K.LINK_SEMAPHORE_SIGNAL]
        n = 0
        for i, (sem_a, sig_a) in enumerate(links):
            if sem_a is None or sig_a is None or sem_a == sig_a:
                continue
            for sem_b, sig_b in links[i + 1:]:
                if sem_b == sig_a and sig_b == sem_a:
                    n += 1
        return n


def _history(window: Window, t_ms: int) -> Iterable[Event]:
    return (e for e in window.level_events if e.t_ms <= t_ms)


@dataclass(frozen=True)
class SolvedWithPlacements:
    """Successful submission preceded earlier in the level by at least one
    semaphore and one signal placement."""

    describe: str = ""

    def count(self, window: Window) -> int:
        n = 0
        for e in window.events:
            if e.kind is K.SUBMIT_RESULT and e.get("success") is True:
                kinds = {h.kind for h in _history(window, e.t_ms)}
                if K.PLACE_SEMAPHORE in kinds and K.PLACE_SIGNAL in kinds:
                    n += 1
        return n


def stacked_unlinked_semaphores(events: Iterable[Event]) -> bool:
    """True when a semaphore is placed on the same track as the previously
    placed semaphore while that previous one is still unlinked."""
    prev: tuple[object, object] | None = None
    linked: set[object] = set()
    for e in events:
        if e.kind is K.LINK_SEMAPHORE_SIGNAL:
            linked.add(e.get("semaphore"))
        elif e.kind is K.PLACE_SEMAPHORE:
            comp, track = e.get("component"), e.get("track")
            if prev is not None and prev[1] == track and prev[0] not in linked:
                return True
            prev = (comp, track)
    return False


def significant_semaphore_move(events: Iterable[Event]) -> bool:
    return any(e.kind is K.MOVE_COMPONENT and e.get("component_type") == "semaphore"
               and float(e.get("distance", 0.0)) >= SIGNIFICANT_MOVE_PX for e in events)


@dataclass(frozen=True)
class CleanSolvedLevel:
    """Fires once at a level end when the level was solved and the player
    neither stacked unlinked semaphores on a track nor dragged a placed
    semaphore a long way."""

    describe: str = ""

    def count(self, window: Window) -> int:
        n = 0
        for e in window.events:
            if e.kind is not K.LEVEL_END:
                continue
            hist = list(_history(window, e.t_ms))
            solved = any(h.kind is K.SUBMIT_RESULT and h.get("success") is True for h in hist)
            if solved and not stacked_unlinked_semaphores(hist) \
                    and not significant_semaphore_move(hist):
                n += 1
        return n


Matcher = KindCount | OrderedPair | CrossLinks | SolvedWithPlacements | CleanSolvedLevel


@dataclass(frozen=True)
class Rule:
    skill: int
    prose: str
    matcher: Matcher
    proxy: str = field(default="")

    @property
    def skill_name(self) -> str:
        return SKILL_NAMES[self.skill]


def _all_delivered(e: Event) -> bool:
    required = int(e.get("required", 0))
    return required > 0 and int(e.get("delivered", 0)) >= required


def _lossless(e: Event) -> bool:
    return int(e.get("delivered", 0)) >= 1 and int(e.get("lost", 0)) == 0


def builtin_ruleset() -> list[Rule]:
    s = skill_id
    return [
        Rule(s("Hover over components to see what they do"),
             "Player hovers over component",
             KindCount((K.HOVER_COMPONENT,),
                       lambda e: float(e.get("dwell_ms", MIN_HOVER_DWELL_MS)) >= MIN_HOVER_DWELL_MS,
                       "hover_component with dwell_ms >= 500"),
             "A pass-over shorter than half a second is not counted as looking."),
        Rule(s("Use help bar"),
             "Player click on help bar and reads one or more of the guides",
             OrderedPair(K.HELP_OPEN, K.HELP_GUIDE_READ, "first",
                         "help_open followed in the window by help_guide_read"),
             "Each opening with at least one subsequent guide read counts once."),
        Rule(s("Drag objects"),
             "Player clicks and drags either semaphore or signal",
             KindCount((K.DRAG_START,), lambda e: e.get("component_type") in DRAGGABLE,
                       "drag_start of a semaphore or signal"),
             ""),
        Rule(s("Place objects on the track"),
             "Player either places a semaphore or signal on track",
             KindCount((K.PLACE_SEMAPHORE, K.PLACE_SIGNAL),
                       lambda e: e.get("on_track", True) is True,
                       "place_semaphore/place_signal with on_track true"),
             "on_track defaults to true when the payload omits it."),
        Rule(s("Hover over side arrows to see different colored tracks"),
             "Player hovers over arrows on side or clicks the side arrows",
             KindCount((K.HOVER_SIDE_ARROW, K.CLICK_SIDE_ARROW),
                       describe="hover_side_arrow or click_side_arrow"),
             ""),
        Rule(s("Remove unnecessary elements"),
             "Player drags semaphore or signal to trash",
             KindCount((K.REMOVE_TO_TRASH,), lambda e: e.get("component_type") in DRAGGABLE,
                       "remove_to_trash of a semaphore or signal"),
             ""),
        Rule(s("Deliver packages"),
             "All required packages are delivered",
             KindCount(RESULTS, _all_delivered,
                       "test_result/submit_result with delivered >= required > 0"),
             "Uses the delivery tally reported with each simulation or model-check result."),
        Rule(s("Be able to link signals to direction switches"),
             "Player links a signal to a direction switch",
             KindCount((K.LINK_SIGNAL_SWITCH,), describe="link_signal_switch"),
             ""),
        Rule(s("Be able to link semaphores to signals"),
             "Player links a semaphore to a signal",
             KindCount((K.LINK_SEMAPHORE_SIGNAL,), describe="link_semaphore_signal"),
             ""),
        Rule(s("Understand that arrows move at unpredictable rates"),
             "Player doesn't place multiple semaphores along one track without connecting "
             "to anything or doesn't move semaphore significantly.",
             CleanSolvedLevel("level_end of a solved level with no stacked unlinked "
                              "semaphores and no semaphore move >= 100 px"),
             "Absence of behaviour is only judged after a completed, successful attempt; "
             "'multiple semaphores without connecting' is read as placing a semaphore on "
             "the same track as the previous, still unlinked, one."),
        Rule(s("Block critical sections"),
             "Player places semaphore and signals in the proper positions to block critical section",
             SolvedWithPlacements("submit_result success with earlier place_semaphore "
                                  "and place_signal in the level"),
             "Board geometry is not in the telemetry; a passing model check after placing "
             "both semaphores and signals stands in for 'proper positions'."),
        Rule(s("Synchronized multiple arrows"),
             "Player places semaphores and signals alternately on the tracks of the different "
             "arrows (a signal in arrow A's path is linked to the semaphore in arrow B's path, "
             "and vice-versa).",
             CrossLinks("pair of link_semaphore_signal events wiring tracks A<->B both ways"),
             "Track ids carried by the link payload stand in for arrow paths."),
        Rule(s("Testing before submitting"),
             "Player tests before submitting",
             OrderedPair(K.TEST_PRESSED, K.SUBMIT_PRESSED, "second",
                         "submit_pressed preceded in the window by test_pressed"),
             "Both presses must fall in the same window."),
        Rule(s("Understand specific delivery points"),
             "Packages are delivered correctly without losing any",
             KindCount(RESULTS, _lossless,
                       "test_result/submit_result with delivered >= 1 and lost == 0"),
             ""),
        Rule(s("Understand exchange points"),
             "Packages are transferred at delivery points",
             KindCount((K.PACKAGE_EXCHANGED,), describe="package_exchanged"),
             ""),
    ]


BUILTIN_RULES: tuple[Rule, ...] = tuple(builtin_ruleset())
RULELESS_SKILLS: frozenset[int] = frozenset(set(range(N_SKILLS)) - {r.skill for r in BUILTIN_RULES})


@dataclass(frozen=True)
class RuleFiringReport:
    student_id: str
    level_id: str
    window_index: int
    counts: tuple[int, ...]

    def __getitem__(self, skill: int) -> int:
        return self.counts[skill]


def fire_counts(window: Window, rules: Sequence[Rule] = BUILTIN_RULES) -> np.ndarray:
    out = np.zeros(N_SKILLS, dtype=np.int64)
    for rule in rules:
        out[rule.skill] += rule.matcher.count(window)
    return out


def apply_rules(window: Window, level_skills: Iterable[int] | None = None,
                rules: Sequence[Rule] = BUILTIN_RULES) -> RuleFiringReport:
    """Count rule firings in one window.

    ``level_skills`` is accepted for interface symmetry with the ML path but
    does not gate anything: rules fire whatever skills the level exercises.
    """
    counts = fire_counts(window, rules)
    return RuleFiringReport(window.student_id, window.level_id, window.index,
                            tuple(int(c) for c in counts))


def rule_totals(reports: Iterable[RuleFiringReport]) -> dict[int, int]:
    totals = {s: 0 for s in range(N_SKILLS)}
    for rep in reports:
        for s, c in enumerate(rep.counts):
            totals[s] += c
    return totals


def catalog_markdown(rules: Sequence[Rule] = BUILTIN_RULES) -> str:
    by_skill = {r.skill: r for r in rules}
    lines = ["# Skill and rule catalog", "",
             "| id | skill | rule | matcher | proxy notes |",
             "|---|---|---|---|---|"]
    for sid, name in enumerate(SKILL_NAMES):
        r = by_skill.get(sid)
        if r is None:
            lines.append(f"| {sid} | {name} | (none) | (none) | covered by the strategy classifier only |")
        else:
            lines.append(f"| {sid} | {name} | {r.prose} | {r.matcher.describe} | {r.proxy} |")
    return "\n".join(lines) + "\n"
