"""Experiment configuration files.

The format is flat ``key = value`` text with dotted section prefixes::

    data.path = data/yeast_me3.csv
    data.positive_label = ME3
    split.train_fraction = 0.5
    gp.population_size = 200
    ensemble.bag_count = 40

Lines starting with ``#`` or ``;`` are comments.  Every key is optional;
unknown keys are rejected with the offending name in the message.  The
run seed (``seed``) feeds the split through ``derive_seed(seed, "split")``
and the ensemble through ``derive_seed(seed, "ensemble")``.
"""

from __future__ import annotations

import configparser
import dataclasses
import logging
from dataclasses import dataclass, field

from .dataset import SplitSpec
from .ensemble import QUICK_ENSEMBLE, QUICK_GP, EnsembleConfig
from .evaluation import DEFAULT_FRACTIONS
from .gp import GpConfig
from .resampling import Oversampler, ResamplingPlan, Undersampler
from .seeding import derive_seed

log = logging.getLogger(__name__)

DEFAULT_SEED = 42


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    data_path: str | None = None
    label_column: str = "class"
    positive_label: str = "positive"
    split: SplitSpec = field(default_factory=SplitSpec)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    fractions: tuple[float, ...] = DEFAULT_FRACTIONS
    repeats: int = 5
    baseline_rounds: int = 10
    out: str = "out"
    seed: int = DEFAULT_SEED
    preset: str = "full"

    def to_dict(self) -> dict:
        return {"data.path": self.data_path, "data.label_column": self.label_column,
                "data.positive_label": self.positive_label,
                "split": dataclasses.asdict(self.split), "ensemble": self.ensemble.to_dict(),
                "sweep.fractions": list(self.fractions), "repeats": self.repeats,
                "baseline.rounds": self.baseline_rounds, "out": self.out, "seed": self.seed,
                "preset": self.preset}


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _int(text: str) -> int:
    return int(text.strip())


def _float(text: str) -> float:
    return float(text.strip())


def _opt_int(text: str) -> int | None:
    t = text.strip().lower()
    return None if t in ("", "all", "none", "auto") else int(t)


def _floats(text: str) -> tuple[float, ...]:
    parts = [p for p in text.replace(",", " ").split() if p]
    return tuple(float(p) for p in parts)


def _str(text: str) -> str:
    return text.strip()


def _range(text: str) -> tuple[float, float]:
    lo, hi = _floats(text)
    return (lo, hi)


# key -> (target group, field name, parser)
KEYS = {
    "seed": ("top", "seed", _int),
    "out": ("top", "out", _str),
    "repeats": ("top", "repeats", _int),
    "preset": ("top", "preset", _str),
    "data.path": ("top", "data_path", _str),
    "data.label_column": ("top", "label_column", _str),
    "data.positive_label": ("top", "positive_label", _str),
    "split.train_fraction": ("split", "train_fraction", _float),
    "split.stratified": ("split", "stratified", _bool),
    "sweep.fractions": ("top", "fractions", _floats),
    "baseline.rounds": ("top", "baseline_rounds", _int),
    "resample.oversampler": ("plan", "oversampler", lambda t: Oversampler(t.strip().lower())),
    "resample.undersampler": ("plan", "undersampler", lambda t: Undersampler(t.strip().lower())),
    "resample.target_ratio": ("plan", "target_ratio", _float),
    "resample.smote_k": ("plan", "smote_k", _int),
    "resample.ncl_k": ("plan", "ncl_k", _int),
    "resample.normalize": ("plan", "normalize", _bool),
    "resample.majority_keep": ("plan", "majority_keep", _opt_int),
    "ensemble.bag_count": ("ensemble", "bag_count", _int),
    "ensemble.per_bag_minority": ("ensemble", "per_bag_minority", _opt_int),
    "ensemble.per_bag_majority": ("ensemble", "per_bag_majority", _opt_int),
    "ensemble.boost_rounds": ("ensemble", "boost_rounds", _int),
    "ensemble.combine": ("ensemble", "combine", _str),
    "ensemble.decision_threshold": ("ensemble", "decision_threshold", _float),
    "gp.population_size": ("gp", "population_size", _int),
    "gp.generations": ("gp", "generations", _int),
    "gp.subpopulations": ("gp", "subpopulations", _int),
    "gp.islands": ("gp", "islands", _bool),
    "gp.migration_interval": ("gp", "migration_interval", _int),
    "gp.tournament_k": ("gp", "tournament_k", _int),
    "gp.crossover_func_pt_fraction": ("gp", "crossover_func_pt_fraction", _float),
    "gp.crossover_any_pt_fraction": ("gp", "crossover_any_pt_fraction", _float),
    "gp.fitness_prop_repro_fraction": ("gp", "fitness_prop_repro_fraction", _float),
    "gp.max_depth_new": ("gp", "max_depth_new", _int),
    "gp.max_depth_crossover": ("gp", "max_depth_crossover", _int),
    "gp.max_mutant_depth": ("gp", "max_mutant_depth", _int),
    "gp.grow_method": ("gp", "grow_method", lambda t: t.strip().lower()),
    "gp.function_probability": ("gp", "function_probability", _float),
    "gp.const_range": ("gp", "const_range", _range),
    "gp.parsimony_factor": ("gp", "parsimony_factor", _float),
}


def parse_pairs(text: str, source: str = "<config>") -> dict[str, str]:
    """Raw ``key -> value`` strings from config text."""
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                       comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string("[root]\n" + text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return dict(parser["root"])


def read_config_file(path: str) -> dict[str, str]:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_pairs(fh.read(), path)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None


def build_config(pairs: dict[str, str], preset: str | None = None) -> ExperimentConfig:
    """Turn raw pairs (file values already merged with overrides) into a config."""
    groups: dict[str, dict] = {"top": {}, "split": {}, "plan": {}, "ensemble": {}, "gp": {}}
    for key, raw in pairs.items():
        if key not in KEYS:
            raise ConfigError(f"{key}: unknown configuration key")
        group, name, parse = KEYS[key]
        try:
            groups[group][name] = parse(raw)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None

    top = groups["top"]
    if "seed" not in top:
        log.info("no seed configured, using default %d", DEFAULT_SEED)
    seed = top.get("seed", DEFAULT_SEED)
    top["seed"] = seed
    preset = preset or top.get("preset", "full")
    if preset not in ("full", "quick"):
        raise ConfigError(f"preset: expected 'full' or 'quick', got {preset!r}")
    top["preset"] = preset

    def make(cls, kwargs, prefix):
        try:
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{prefix}: {exc}") from None

    split = make(SplitSpec, {"seed": derive_seed(seed, "split"), **groups["split"]}, "split")
    plan = make(ResamplingPlan, groups["plan"], "resample")
    # preset values are defaults; explicit keys still win
    gp_defaults = dict(QUICK_GP) if preset == "quick" else {}
    ens_defaults = dict(QUICK_ENSEMBLE) if preset == "quick" else {}
    gp_cfg = make(GpConfig, {**gp_defaults, **groups["gp"]}, "gp")
    ens_kwargs = {"seed": derive_seed(seed, "ensemble"), "plan": plan, "gp": gp_cfg, **ens_defaults, **groups["ensemble"]}
    ensemble = make(EnsembleConfig, ens_kwargs, "ensemble")

    cfg = make(ExperimentConfig, {"split": split, "ensemble": ensemble, **top}, "config")
    if not cfg.fractions:
        raise ConfigError("sweep.fractions: empty fraction list")
    for f in cfg.fractions:
        if not 0.0 < f < 1.0:
            raise ConfigError(f"sweep.fractions: {f} is not in (0, 1)")
    if cfg.repeats < 1:
        raise ConfigError("repeats: must be >= 1")
    if cfg.baseline_rounds < 1:
        raise ConfigError("baseline.rounds: must be >= 1")
    return cfg


def load_config(path: str | None = None, overrides: dict[str, str] | None = None,
                preset: str | None = None) -> ExperimentConfig:
    pairs = read_config_file(path) if path else {}
    pairs.update(overrides or {})
    return build_config(pairs, preset)
