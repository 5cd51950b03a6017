"""Run configuration: an INI file with sections, overridden by CLI flags."""

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

DEFAULTS = """
[run]
seed = 0
output_dir = out
workers = 1

[cell]
resolution = 1/512
puncture_radius = 0.15
blend_radius = 0.45
samples_per_edge = 10000
base_step = 0.01

[tolerances]
edge = 1e-6
vertex = 1e-6
vertex_motion = 1e-9
edge_motion = 1e-6
divergence = 5e-3
refinement_ratio = 3
jacobian = 1e-3
symplectic = 1e-3
membership_slack = 1e-6

[samples]
flow = 1000
embed = 100000
jacobian = 1000
positivity = 1000
monte_carlo = 10000000
"""


def _number(text):
    text = text.strip()
    if "/" in text:
        return float(Fraction(text))
    value = float(text)
    return int(value) if value.is_integer() and "e" not in text.lower() and "." not in text else value


@dataclass
class RunConfig:
    seed: int = 0
    output_dir: str = "out"
    workers: int = 1
    cell: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    samples: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path=None):
        parser = configparser.ConfigParser()
        parser.read_string(DEFAULTS)
        if path is not None:
            with open(path) as fh:
                parser.read_file(fh)
        cfg = cls(
            seed=int(parser["run"]["seed"]),
            output_dir=parser["run"]["output_dir"],
            workers=int(parser["run"]["workers"]),
            cell={k: _number(v) for k, v in parser["cell"].items()},
            tolerances={k: float(_number(v)) for k, v in parser["tolerances"].items()},
            samples={k: int(_number(v)) for k, v in parser["samples"].items()},
        )
        cfg.validate()
        return cfg

    def validate(self):
        bad = [k for k, v in self.tolerances.items() if not v > 0]
        if bad:
            raise ValueError(f"tolerances must be positive: {', '.join(bad)}")
        bad = [k for k, v in self.samples.items() if v < 1]
        if bad:
            raise ValueError(f"sample counts must be at least 1: {', '.join(bad)}")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    def to_dict(self):
        return asdict(self)

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def output_path(self, name):
        out = Path(self.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        return out / name
