"""Pipeline configuration (strict JSON schema) and run manifests."""

import hashlib
import json
import os
import platform
from datetime import datetime, timezone
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from .. import __version__
from ..mpc import ControllerConfig

SCHEMA_VERSION = 1


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PathsConfig(_Strict):
    corpus: str = "corpus.csv"
    gan_dir: str = "gan"
    policy_dir: str = "policy"
    run_dir: str = "runs/run"


class SynthConfig(_Strict):
    n: int = Field(520, ge=0)
    dt_s: float = Field(0.04, gt=0)
    noise_scale: float = Field(0.03, ge=0)


class QuantizerConfig(_Strict):
    x_min: float = -4.5
    x_max: float = 4.5
    v_min: float = -10.0
    v_max: float = 10.0
    x_bins: int = Field(16, ge=1)
    v_bins: int = Field(16, ge=1)
    length: int = Field(40, ge=2)
    max_duration_s: float = Field(2.0, gt=0)


class GanBlock(_Strict):
    variant: Literal["ga", "vanilla", "gru_disc", "gru_disc_attention"] = "ga"
    disc: Optional[Literal["gru", "conv"]] = None
    attention: Optional[bool] = None
    core: Optional[Literal["gru", "lstm"]] = None
    embed: int = Field(32, ge=1)
    hidden: int = Field(32, ge=1)
    batch: int = Field(64, ge=1)
    pretrain_epochs: int = Field(60, ge=0)
    pretrain_lr: float = Field(1e-2, gt=0)
    # geometric decay of the MLE learning rate down to this value; null keeps it constant
    pretrain_lr_final: Optional[float] = Field(1e-4, gt=0)
    disc_pretrain_steps: int = Field(5, ge=0)
    adv_rounds: int = Field(2, ge=0)
    adv_batch: int = Field(32, ge=1)
    rollouts: int = Field(8, ge=1)
    disc_steps: int = Field(3, ge=1)
    gen_lr: float = Field(1e-4, gt=0)
    disc_lr: float = Field(1e-3, gt=0)
    eval_samples: int = Field(200, ge=0)
    eval_every: int = Field(5, ge=1)
    checkpoint_every: int = Field(5, ge=1)
    oracle_epochs: int = Field(10, ge=0)


class PolicyBlock(_Strict):
    hidden: int = Field(32, ge=1)
    updates: int = Field(20, ge=0)
    lr: float = Field(3e-4, ge=0)
    steps_per_update: int = Field(1280, ge=1)
    minibatch_steps: int = Field(128, ge=1)
    epochs: int = Field(20, ge=1)
    ent_coef: float = 0.01
    gamma: float = Field(0.99, ge=0, le=1)
    eps_clip: float = Field(0.2, gt=0)
    segment_len: int = Field(16, ge=1)
    window: int = Field(10, ge=2)
    weights: list[float] = [1.0, 0.25, 0.25, 5.0, 50.0]
    baseline: float = -0.1
    checkpoint_every: int = Field(5, ge=1)


class ScenarioBlock(_Strict):
    lanes: int = Field(3, ge=2)
    lane_width_m: float = Field(3.5, gt=0)
    dt_s: float = Field(0.05, gt=0)
    trigger_ttc_s: float = Field(2.5, gt=0)
    max_duration_s: float = Field(10.0, gt=0)


class BaselineBlock(_Strict):
    random_budget: int = Field(100, ge=1)
    scripted_budget: int = Field(100, ge=1)
    grid_lattice: int = Field(15, ge=1)


class EvalBlock(_Strict):
    episodes: int = Field(100, ge=1)
    grid_dx: float = Field(5.0, gt=0)
    grid_dy: float = Field(0.5, gt=0)
    bins: int = Field(30, ge=2)
    generated_samples: int = Field(2000, ge=1)
    baselines: BaselineBlock = BaselineBlock()


class PipelineConfig(_Strict):
    schema_version: Literal[1] = SCHEMA_VERSION
    seed: int = Field(0, ge=0)
    paths: PathsConfig = PathsConfig()
    synth: SynthConfig = SynthConfig()
    quantizer: QuantizerConfig = QuantizerConfig()
    gan: GanBlock = GanBlock()
    policy: PolicyBlock = PolicyBlock()
    controller: ControllerConfig = ControllerConfig()
    scenario: ScenarioBlock = ScenarioBlock()
    eval: EvalBlock = EvalBlock()

    def canonical_json(self):
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def config_hash(self):
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


def json_schema():
    return PipelineConfig.model_json_schema()


def set_dotted(data, key, value):
    """Set ``a.b.c = value`` inside nested dicts, creating levels as needed."""
    parts = key.split(".")
    node = data
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ValueError(f"cannot set {key}: {p} is not an object")
    node[parts[-1]] = value


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _now():
    return datetime.now(timezone.utc).isoformat()


class Manifest:
    """Collects the files a command emits; written last as ``manifest.json``."""

    def __init__(self, directory, command, config):
        self.directory = directory
        self.doc = {"command": command, "config_hash": config.config_hash(), "seed": config.seed,
                    "code_version": __version__, "python": platform.python_version(), "started": _now(),
                    "finished": None, "artifacts": []}

    def finish(self, extra=None):
        arts = []
        for root, _, files in os.walk(self.directory):
            for f in files:
                if f == "manifest.json":
                    continue
                p = os.path.join(root, f)
                arts.append({"path": os.path.relpath(p, self.directory).replace(os.sep, "/"),
                             "sha256": sha256_file(p), "bytes": os.path.getsize(p)})
        arts.sort(key=lambda a: a["path"])
        self.doc["artifacts"] = arts
        self.doc["finished"] = _now()
        if extra:
            self.doc.update(extra)
        with open(os.path.join(self.directory, "manifest.json"), "w", encoding="utf-8") as fh:
            json.dump(self.doc, fh, indent=1, sort_keys=True)
        return self.doc


def load_manifest(directory):
    with open(os.path.join(directory, "manifest.json"), encoding="utf-8") as fh:
        return json.load(fh)
