"""Training-set recipes mixing corpora by hours, and their realization as manifests."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DuplicateCorpus, InsufficientData
from .manifest import Manifest, concat

REALIZE_TOLERANCE_S = 120.0
CV_PROPORTIONS = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 1.0)


@dataclass(frozen=True)
class Component:
    """One corpus of a recipe: take ``hours`` of it, or all of it when ``full``.

    For full components ``hours`` is informational (the corpus size when known).
    """

    corpus: str
    hours: float | None
    full: bool = False

    def __post_init__(self):
        if not self.full and (self.hours is None or not self.hours > 0):
            raise ValueError(f"{self.corpus}: hour target must be positive, got {self.hours}")

    def to_json(self) -> dict:
        return {"corpus": self.corpus, "hours": self.hours, "full": self.full}

    @classmethod
    def from_json(cls, obj) -> "Component":
        return cls(obj["corpus"], obj.get("hours"), bool(obj.get("full", False)))


@dataclass(frozen=True)
class MixRecipe:
    name: str
    components: tuple = field(default_factory=tuple)
    nominal_cv_proportion: float | None = None

    def __post_init__(self):
        components = tuple(self.components)
        tags = [c.corpus for c in components]
        if len(set(tags)) != len(tags):
            raise DuplicateCorpus(f"{self.name}: corpus listed twice in {tags}")
        object.__setattr__(self, "components", components)

    def get(self, corpus: str) -> Component | None:
        for component in self.components:
            if component.corpus == corpus:
                return component
        return None

    def hours_of(self, corpus: str) -> float:
        component = self.get(corpus)
        if component is None:
            return 0.0
        return component.hours

    @property
    def total_hours(self) -> float | None:
        hours = [c.hours for c in self.components]
        return None if any(h is None for h in hours) else sum(hours)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "components": [c.to_json() for c in self.components],
            "nominal_cv_proportion": self.nominal_cv_proportion,
            "total_hours": self.total_hours,
        }

    @classmethod
    def from_json(cls, obj) -> "MixRecipe":
        return cls(
            obj["name"],
            tuple(Component.from_json(c) for c in obj["components"]),
            obj.get("nominal_cv_proportion"),
        )


def _label(proportion: float) -> str:
    return f"{round(proportion * 100):d}"


def build_cv_series(
    cv_train_hours: float,
    aaf_train_hours: float,
    full_cv_hours: float | None = None,
    cv: str = "CV",
    aaf: str = "AAF",
    full_cv: str = "CV_full",
) -> list:
    """The two-domain series: CV-0 ... CV-100 plus FullCV (13 recipes).

    Up to 80 % the whole AAF train split is kept and CV is grown to reach the
    nominal share (capped at the CV train size). At 90 % and 95 % all of CV is
    kept and AAF is halved and quartered. ``full_cv`` names a corpus holding
    all CV splits; its size is ``full_cv_hours`` when given.
    """
    if not (cv_train_hours > 0 and aaf_train_hours > 0):
        raise ValueError("corpus sizes must be positive")
    recipes = []
    for x in CV_PROPORTIONS:
        name = f"{cv}-{_label(x)}"
        if x == 0.0:
            parts = [Component(aaf, aaf_train_hours, full=True)]
        elif x <= 0.8:
            wanted = aaf_train_hours * x / (1.0 - x)
            cv_part = (Component(cv, cv_train_hours, full=True) if wanted >= cv_train_hours
                       else Component(cv, wanted))
            parts = [cv_part, Component(aaf, aaf_train_hours, full=True)]
        elif x < 1.0:
            divisor = 2.0 if x == 0.9 else 4.0
            parts = [Component(cv, cv_train_hours, full=True), Component(aaf, aaf_train_hours / divisor)]
        else:
            parts = [Component(cv, cv_train_hours, full=True)]
        recipes.append(MixRecipe(name, tuple(parts), x))
    recipes.append(MixRecipe(
        "FullCV",
        (Component(full_cv, full_cv_hours, full=True), Component(aaf, aaf_train_hours, full=True)),
        None,
    ))
    return recipes


def build_fixed_hours_series(
    total_hours: float = 31.0,
    step: float = 0.1,
    cv: str = "CV",
    augmented: str = "AAFaug",
    cv_available_hours: float | None = None,
) -> list:
    """Fixed-size series trading augmented accented speech for CV in ``step`` increments.

    When ``cv_available_hours`` is given and a CV share reaches it, the CV
    component becomes "all of CV" instead of an unreachable target.
    """
    if not total_hours > 0 or not 0 < step <= 1:
        raise ValueError("need total_hours > 0 and 0 < step <= 1")
    n_steps = int(round(1.0 / step))
    if not math.isclose(n_steps * step, 1.0, rel_tol=1e-9):
        raise ValueError(f"step {step} does not divide 1")
    recipes = []
    for i in range(n_steps + 1):
        x = i / n_steps
        cv_hours = x * total_hours
        aug_hours = (1.0 - x) * total_hours
        parts = []
        if cv_hours > 0:
            if cv_available_hours is not None and cv_hours >= cv_available_hours:
                parts.append(Component(cv, cv_available_hours, full=True))
            else:
                parts.append(Component(cv, cv_hours))
        if aug_hours > 1e-12:
            parts.append(Component(augmented, aug_hours))
        recipes.append(MixRecipe(f"{cv}-{_label(x)}+{augmented}-{total_hours:g}h", tuple(parts), x))
    return recipes


def union_recipe(base: MixRecipe, corpus: str, hours: float | None = None, full: bool | None = None) -> MixRecipe:
    """Append another corpus to ``base``; whole corpus unless ``hours`` is given.

    The result has no nominal CV proportion: the base label no longer describes it.
    """
    if base.get(corpus) is not None:
        raise DuplicateCorpus(f"{corpus} already in {base.name}")
    if full is None:
        full = hours is None
    return replace(
        base,
        name=f"{base.name}+{corpus}",
        components=base.components + (Component(corpus, hours, full=full),),
        nominal_cv_proportion=None,
    )


def _select_hours(manifest: Manifest, target_s: float, rng: np.random.Generator,
                  tolerance_s: float = REALIZE_TOLERANCE_S) -> list:
    """Pick records totalling ``target_s`` within ``tolerance_s``.

    Whole speakers are taken first, in seeded random order, whenever they fit
    under the target; the remaining gap is closed with single utterances from
    speakers not yet used. Returns records in manifest order.
    """
    if manifest.duration_s + tolerance_s < target_s:
        raise InsufficientData(
            f"need {target_s / 3600:.3f} h but only {manifest.duration_s / 3600:.3f} h available"
        )
    groups = manifest.by_speaker()
    speakers = list(groups)
    order = rng.permutation(len(speakers))
    chosen = set()
    total = 0.0
    leftovers = []
    for index in order:
        speaker = speakers[index]
        size = math.fsum(r.duration_s for r in groups[speaker])
        if total + size <= target_s + 1e-6:
            chosen.update(r.id for r in groups[speaker])
            total += size
        else:
            leftovers.append(speaker)
        if target_s - total <= tolerance_s:
            break
    if target_s - total > tolerance_s:
        for speaker in leftovers:
            for record in groups[speaker]:
                if total + record.duration_s <= target_s + tolerance_s:
                    chosen.add(record.id)
                    total += record.duration_s
                if target_s - total <= tolerance_s:
                    break
            if target_s - total <= tolerance_s:
                break
    if abs(target_s - total) > tolerance_s:
        raise InsufficientData(
            f"could not get within {tolerance_s:g} s of {target_s / 3600:.3f} h (reached {total / 3600:.3f} h)"
        )
    return [r for r in manifest.records if r.id in chosen]


def realize_recipe(recipe: MixRecipe, corpora: dict, seed: int = 42) -> Manifest:
    """Materialize ``recipe`` from ``corpora`` (corpus tag -> Manifest).

    Full components copy the corpus; hour targets are met within two minutes.
    The result depends only on (recipe, corpora, seed).
    """
    parts = []
    for index, component in enumerate(recipe.components):
        if component.corpus not in corpora:
            raise InsufficientData(f"{recipe.name}: no corpus supplied for {component.corpus!r}")
        source = corpora[component.corpus]
        if component.full:
            parts.append(source)
            continue
        rng = np.random.default_rng([int(seed), index])
        parts.append(source.subset(_select_hours(source, component.hours * 3600.0, rng)))
    return concat(parts)


def build_validation_set(cv_dev: Manifest, aaf_dev: Manifest, seed: int = 42, hours_each: float = 2.5) -> Manifest:
    """Balanced dev set: ``hours_each`` hours from each corpus (5 h total by default)."""
    parts = []
    for index, source in enumerate((cv_dev, aaf_dev)):
        target = hours_each * 3600.0
        if source.duration_s + 1e-6 < target:
            raise InsufficientData(
                f"dev corpus has {source.duration_s / 3600:.3f} h, need {hours_each} h"
            )
        rng = np.random.default_rng([int(seed), index])
        parts.append(source.subset(_select_hours(source, target, rng)))
    return concat(parts)


def save_recipes(recipes, path) -> None:
    Path(path).write_text(json.dumps([r.to_json() for r in recipes], indent=2) + "\n", encoding="utf-8")


def load_recipes(path) -> list:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, dict):
        data = [data]
    return [MixRecipe.from_json(obj) for obj in data]


def recipe_table(recipes, corpora=("CV", "AAF")) -> list:
    """Rows of per-corpus and total hours, one per recipe, for display."""
    rows = []
    for recipe in recipes:
        hours = {}
        for tag in corpora:
            hours[tag] = recipe.hours_of(tag)
        extra = [c for c in recipe.components if c.corpus not in corpora]
        for component in extra:
            hours[component.corpus] = component.hours
        rows.append((recipe.name, hours, recipe.total_hours))
    return rows
