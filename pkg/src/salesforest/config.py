"""Run configuration: one JSON file, overridable by CLI flags (flags win).

Sections (all optional, with the documented defaults):

    paths     sales/items/shops/categories/test/truth/out_dir
    outliers  OutlierPolicy fields
    recipe    FeatureRecipe fields
    clip      [lo, hi] target clip interval (default [0, 20])
    valid_month   holdout month for tune/eval workflows
    forest    ForestParams fields
    ensemble  {"k": 5, "seed": ...}
    grid      GridSpec candidate lists (+ valid_month, falls back to top level)
    stack     {"folds": 3, "bases": [ForestParams fields, ...]}
    synth     SynthConfig fields
    seed      root seed (overridden by --seed)

Seeds: every consumer may pin its own seed in its section.  Unpinned seeds
derive from the root seed (synth 0, forest 1, ensemble 2, grid 3, stack
bases 4+i).  When --seed is passed on the command line it replaces the root
AND the pinned seeds, so one flag controls all randomness.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import ConfigError
from .features import FeatureRecipe, OutlierPolicy
from .forest import ForestParams
from .rng import derive
from .synth import SynthConfig
from .tune import GridSpec

DEFAULT_CLIP = (0.0, 20.0)


def load_config_file(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return raw


@dataclass
class RunConfig:
    raw: dict
    seed_flag: int | None = None  # set when --seed was passed explicitly

    def _section(self, name: str) -> dict:
        section = self.raw.get(name, {})
        if not isinstance(section, dict):
            raise ConfigError(f"config section {name!r} must be an object")
        return dict(section)

    @property
    def root_seed(self) -> int:
        if self.seed_flag is not None:
            return self.seed_flag
        return int(self.raw.get("seed", 0))

    def _derived(self, section: dict, key: str, slot: int) -> int:
        if self.seed_flag is None and key in section:
            return int(section[key])
        return derive(self.root_seed, slot)

    def path(self, name: str, override=None, default=None):
        if override is not None:
            return override
        value = self._section("paths").get(name, default)
        if value is None:
            raise ConfigError(
                f"no {name!r} path given (flag or config paths.{name})")
        return value

    def clip(self) -> tuple:
        clip = self.raw.get("clip", list(DEFAULT_CLIP))
        if clip is None:
            return DEFAULT_CLIP
        if len(clip) != 2:
            raise ConfigError("clip must be [lo, hi]")
        return float(clip[0]), float(clip[1])

    def valid_month(self, override=None):
        if override is not None:
            return int(override)
        value = self.raw.get("valid_month")
        return None if value is None else int(value)

    def outlier_policy(self) -> OutlierPolicy:
        try:
            return OutlierPolicy(**self._section("outliers"))
        except TypeError as exc:
            raise ConfigError(f"bad outliers section: {exc}") from None

    def recipe(self) -> FeatureRecipe:
        try:
            return FeatureRecipe.from_dict(self._section("recipe"))
        except TypeError as exc:
            raise ConfigError(f"bad recipe section: {exc}") from None

    def synth_config(self) -> SynthConfig:
        section = self._section("synth")
        section["noise_seed"] = self._derived(section, "noise_seed", 0)
        try:
            return SynthConfig(**section)
        except TypeError as exc:
            raise ConfigError(f"bad synth section: {exc}") from None

    def forest_params(self) -> ForestParams:
        section = self._section("forest")
        section["master_seed"] = self._derived(section, "master_seed", 1)
        try:
            return ForestParams.from_dict(section)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad forest section: {exc}") from None

    def ensemble_spec(self) -> tuple:
        """(k, ensemble seed); members reuse the forest params."""
        section = self._section("ensemble")
        k = int(section.get("k", 5))
        seed = self._derived(section, "seed", 2)
        return k, seed

    def grid_spec(self, valid_month_flag=None) -> GridSpec:
        section = self._section("grid")
        seed = self._derived(section, "master_seed", 3)
        valid_month = valid_month_flag
        if valid_month is None:
            valid_month = section.get("valid_month", self.valid_month())
        if valid_month is None:
            raise ConfigError("grid search needs valid_month "
                              "(flag, grid section, or top level)")
        known = {f for f in GridSpec.__dataclass_fields__}
        section = {k: v for k, v in section.items()
                   if k in known - {"valid_month", "master_seed"}}
        try:
            return GridSpec(valid_month=int(valid_month), master_seed=seed,
                            **section)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad grid section: {exc}") from None

    def stack_spec(self) -> tuple:
        """(folds, [ForestParams, ...]) for the stacking command."""
        section = self._section("stack")
        folds = int(section.get("folds", 3))
        bases_raw = section.get("bases")
        if not bases_raw:
            base = self.forest_params().to_dict()
            bases_raw = [dict(base), {**base, "max_depth": max(1, base["max_depth"] - 4)},
                         {**base, "max_features": 0.6}]
        bases = []
        for i, fields in enumerate(bases_raw):
            fields = dict(fields)
            fields["master_seed"] = self._derived(fields, "master_seed", 4 + i)
            try:
                bases.append(ForestParams.from_dict(fields))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad stack base {i}: {exc}") from None
        return folds, bases
