"""Experiment configuration files.

INI-style sections; ``[aliases]`` accepts ``name := formula`` lines. Every
colour label in ``[regions]`` is bound automatically to the disjunction of
its cells, unless ``[aliases]`` rebinds it.
"""
from __future__ import annotations

import configparser
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, List, Tuple

from .gridworld import NoiseModel, WorkspaceLayout, label_aliases
from .qlearning import OBJECTIVE_KINDS, LearningSchedule, Objective
from .stl import Formula, FormulaError, parse, split_top_level, to_string, window_length


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    layout: WorkspaceLayout
    noise: NoiseModel
    phi_text: str
    T: int
    aliases_text: Dict[str, str] = field(default_factory=dict)
    objectives: Tuple[str, ...] = OBJECTIVE_KINDS
    schedule: LearningSchedule = field(default_factory=LearningSchedule)
    r_min: float = -1.0
    r_max: float = 1.0
    rollouts: int = 500
    eval_seed: int = 0
    bin_width: float = 0.05
    max_states: int = 10**6
    name: str = "experiment"

    def __post_init__(self):
        self.phi = self._parse_phi()
        if self.T + 1 < window_length(self.phi):
            raise ConfigError(
                f"T={self.T} too short: the top-level formula needs {window_length(self.phi)} samples"
            )
        if self.r_min >= self.r_max:
            raise ConfigError("r_min must be below r_max")
        for kind in self.objectives:
            if kind not in OBJECTIVE_KINDS:
                raise ConfigError(f"unknown objective {kind!r}")

    def _parse_phi(self) -> Formula:
        try:
            return parse(self.phi_text, 2, aliases=self.aliases(), top_level=True)
        except FormulaError as exc:
            raise ConfigError(f"formula: {exc}") from exc

    def aliases(self) -> Dict[str, Formula]:
        return _bind_aliases(self.layout, self.aliases_text)

    @property
    def psi(self) -> Formula:
        return split_top_level(self.phi)[2]

    @property
    def outer(self) -> str:
        return split_top_level(self.phi)[0]

    @property
    def tau(self) -> int:
        return window_length(self.psi)

    def objective(self, kind: str) -> Objective:
        return Objective(kind, self.phi)

    def environment_dict(self) -> dict:
        """Everything that fixes the tau-MDP and the rewards; hashed into
        artifact manifests."""
        lay = self.layout
        return {
            "layout": {
                "x_min": lay.x_min, "x_max": lay.x_max, "y_min": lay.y_min, "y_max": lay.y_max,
                "pitch": lay.pitch, "initial": list(lay.initial),
                "regions": [[i, j, lab] for (i, j), lab in lay.regions.items()],
            },
            "noise": {"dtheta": self.noise.dtheta, "step": self.noise.step, "kind": self.noise.kind},
            "formula": {"phi": to_string(self.phi), "T": self.T},
        }

    def learning_dict(self) -> dict:
        d = asdict(self.schedule)
        d.update(r_min=self.r_min, r_max=self.r_max)
        return d

    def config_hash(self) -> str:
        payload = {"environment": self.environment_dict(), "learning": self.learning_dict()}
        payload["learning"].pop("seed")
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _floats(text: str, n: int, what: str) -> Tuple[float, ...]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != n:
        raise ConfigError(f"{what}: expected {n} comma-separated numbers, got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"{what}: not numeric: {text!r}") from None


def _cell(text: str) -> Tuple[int, int]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2 or not all(p.lstrip("-").isdigit() for p in parts):
        raise ConfigError(f"region key must be 'i, j', got {text!r}")
    return int(parts[0]), int(parts[1])


def bundled_configs() -> List[str]:
    return sorted(p.name for p in resources.files("stlrl").joinpath("configs").iterdir()
                  if p.name.endswith(".cfg"))


def resolve_config_path(path: str | Path) -> Path:
    p = Path(path)
    if p.exists():
        return p
    name = p.name if p.suffix == ".cfg" else p.name + ".cfg"
    candidate = resources.files("stlrl").joinpath("configs", name)
    if candidate.is_file():
        return Path(str(candidate))
    raise ConfigError(f"config file not found: {path} (bundled: {', '.join(bundled_configs())})")


def load_config(path: str | Path, seed: int | None = None) -> ExperimentConfig:
    p = resolve_config_path(path)
    return parse_config(p.read_text(), name=p.stem, seed=seed)


def parse_config(text: str, name: str = "experiment", seed: int | None = None) -> ExperimentConfig:
    cp = configparser.ConfigParser(
        delimiters=(":=", "="), interpolation=None, inline_comment_prefixes=("#",)
    )
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc

    def get(section, key, default=None, conv=str):
        if cp.has_option(section, key):
            raw = cp.get(section, key).strip()
            try:
                return conv(raw)
            except ValueError:
                raise ConfigError(f"[{section}] {key}: invalid value {raw!r}") from None
        if default is None:
            raise ConfigError(f"[{section}] {key} is required")
        return default

    try:
        regions = {}
        if cp.has_section("regions"):
            regions = {_cell(k): v.strip() for k, v in cp.items("regions")}
        pitch = get("layout", "pitch", 1.0, float)
        x_min = get("layout", "x_min", 0.0, float)
        y_min = get("layout", "y_min", 0.0, float)
        if cp.has_option("layout", "initial_cell"):
            i, j = _cell(cp.get("layout", "initial_cell"))
            initial = (x_min + (i + 0.5) * pitch, y_min + (j + 0.5) * pitch)
        else:
            initial = _floats(get("layout", "initial", "0.5, 0.5"), 2, "initial")
        layout = WorkspaceLayout(
            x_min=x_min, x_max=get("layout", "x_max", 6.0, float),
            y_min=y_min, y_max=get("layout", "y_max", 6.0, float),
            pitch=pitch, regions=regions, initial=initial,
        )
        if cp.has_option("noise", "dtheta_deg"):
            dtheta = math.radians(get("noise", "dtheta_deg", conv=float))
        else:
            dtheta = get("noise", "dtheta", math.pi / 9, float)
        noise = NoiseModel(dtheta=dtheta, step=get("noise", "step", 1.0, float),
                           kind=get("noise", "distribution", "uniform"))

        phi_text = get("formula", "phi")
        aliases_text = {k: v.strip() for k, v in cp.items("aliases")} if cp.has_section("aliases") else {}

        objective = get("learning", "objective", "both")
        objectives = OBJECTIVE_KINDS if objective == "both" else tuple(
            o.strip() for o in objective.split(","))
        schedule = LearningSchedule(
            alpha=get("learning", "alpha", 0.95, float),
            gamma=get("learning", "gamma", 1.0, float),
            epsilon_base=get("learning", "epsilon_base", 0.995, float),
            episodes=get("learning", "episodes", 300, int),
            seed=seed if seed is not None else get("learning", "seed", 0, int),
            alpha_mode=get("learning", "alpha_mode", "constant"),
            blend=get("learning", "blend", "standard"),
            sweep=get("learning", "sweep", "full"),
        )
    except (ValueError, FormulaError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc

    try:
        probe = parse(phi_text, 2, aliases=_bind_aliases(layout, aliases_text), top_level=True)
    except FormulaError as exc:
        raise ConfigError(f"formula: {exc}") from exc
    # default episode length: exactly the samples the top-level formula needs
    T = get("formula", "T", window_length(probe) - 1, int)
    return ExperimentConfig(
        layout=layout, noise=noise, phi_text=phi_text, T=T, aliases_text=aliases_text,
        objectives=objectives, schedule=schedule,
        r_min=get("learning", "r_min", -1.0, float), r_max=get("learning", "r_max", 1.0, float),
        rollouts=get("evaluation", "rollouts", 500, int),
        eval_seed=get("evaluation", "seed", 1, int),
        bin_width=get("evaluation", "bin_width", 0.05, float),
        max_states=get("formula", "max_states", 10**6, int),
        name=name,
    )


def _bind_aliases(layout: WorkspaceLayout, aliases_text: Dict[str, str]) -> Dict[str, Formula]:
    bound = dict(label_aliases(layout)) if layout.regions else {}
    for k, v in aliases_text.items():
        try:
            bound[k] = parse(v, 2, aliases=bound)
        except FormulaError as exc:
            raise ConfigError(f"alias {k}: {exc}") from exc
    return bound
