"""Experiment configuration: TOML files, kernel specs, and round-tripping.

The emitter writes keys in a canonical order with 17-significant-digit
floats, so parse -> emit -> parse is the identity and emitted files are
byte-reproducible.
"""

from __future__ import annotations

import sys
import warnings
from dataclasses import dataclass, field, asdict

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from mfy.kernels import Kernel, SpatialGrid, hurst_threshold
from mfy.solver import SolveConfig


def parse_kernel_spec(spec: str, dim: int) -> Kernel:
    """Parse a CLI kernel spec like "power_law:sigma=-1,eps=0.05,scale=2".

    The first bare token (no '=') is the family's main parameter: sigma for
    power_law, p for lennard_jones, the coefficient for linear.
    """
    if ":" in spec:
        family, rest = spec.split(":", 1)
        tokens = [t for t in rest.split(",") if t]
    else:
        family, tokens = spec, []
    kv = {}
    for tok in tokens:
        if "=" in tok:
            k, v = tok.split("=", 1)
            kv[k.strip()] = v.strip()
        else:
            main = {"power_law": "sigma", "lennard_jones": "p", "linear": "a"}.get(family)
            if main is None:
                raise ValueError(f"family {family!r} takes no bare parameter")
            kv[main] = tok.strip()
    eps = float(kv.pop("eps", kv.pop("epsilon", 0.0) or 0.0))
    mode = kv.pop("mode", None)
    scale = float(kv.pop("scale", 1.0))
    if family == "power_law":
        k = Kernel.power_law(float(kv.pop("sigma")), dim, eps, mode=mode or "gradient",
                             scale=scale)
    elif family == "biot_savart":
        k = Kernel.biot_savart(eps, scale=scale)
    elif family == "mollified_dirac":
        k = Kernel.mollified_dirac(eps, dim, scale=scale)
    elif family == "lennard_jones":
        k = Kernel.lennard_jones(float(kv.pop("p")), dim, eps, mode=mode or "radial",
                                 scale=scale)
    elif family == "linear":
        k = Kernel.linear(float(kv.pop("a", -1.0)), dim)
    elif family == "zero":
        k = Kernel.zero(dim)
    else:
        raise ValueError(f"unknown kernel family {family!r}")
    if kv:
        raise ValueError(f"unused kernel parameters: {sorted(kv)}")
    return k


def kernel_to_table(k: Kernel) -> dict:
    out = {"family": k.family, "sigma": k.sigma, "epsilon": k.epsilon,
           "mode": k.mode, "scale": k.scale}
    if k.family == "lennard_jones":
        out["p"] = k.lj_p
    if k.family == "linear":
        out["a"] = float(k.matrix[0, 0])
    return out


def kernel_from_table(tab: dict, dim: int) -> Kernel:
    fam = tab["family"]
    if fam == "power_law":
        return Kernel.power_law(tab["sigma"], dim, tab["epsilon"],
                                mode=tab.get("mode", "gradient"),
                                scale=tab.get("scale", 1.0))
    if fam == "biot_savart":
        return Kernel.biot_savart(tab["epsilon"], scale=tab.get("scale", 1.0))
    if fam == "mollified_dirac":
        return Kernel.mollified_dirac(tab["epsilon"], dim, scale=tab.get("scale", 1.0))
    if fam == "lennard_jones":
        return Kernel.lennard_jones(tab["p"], dim, tab["epsilon"],
                                    mode=tab.get("mode", "radial"),
                                    scale=tab.get("scale", 1.0))
    if fam == "linear":
        return Kernel.linear(tab.get("a", -1.0), dim)
    if fam == "zero":
        return Kernel.zero(dim)
    raise ValueError(f"unknown kernel family {fam!r}")


@dataclass
class ExperimentConfig:
    """One experiment: kernel, noise and grids plus study-specific knobs."""

    dim: int = 1
    horizon: float = 1.0
    n_steps: int = 256
    hurst: float = 0.1
    seeds: list = field(default_factory=lambda: list(range(10)))
    base_seed: int = 0
    kernel: dict = field(default_factory=lambda: {
        "family": "power_law", "sigma": -1.0, "epsilon": 0.05,
        "mode": "gradient", "scale": 1.0})
    half_width: float = 4.0
    n_cells: int = 512
    n_list: list = field(default_factory=lambda: [64, 256, 1024])
    m_reference: int = 4096
    x_std: float = 1.0
    noise_kind: str = "bm"
    noise_scale: float = 1.0
    deltas: list = field(default_factory=lambda: [0.2, 0.1, 0.05, 0.025, 0.0])
    shift_x: bool = True
    shift_b: bool = False
    resolutions: list = field(default_factory=list)
    n_particles: int = 4
    cluster_spacing: float = 0.0
    m_stability: int = 128
    solve: SolveConfig = field(default_factory=SolveConfig)

    def __post_init__(self):
        if isinstance(self.solve, dict):
            self.solve = SolveConfig(**self.solve)
        sigma = self.kernel.get("sigma", 0.0)
        if sigma <= 0 and self.hurst >= hurst_threshold(sigma):
            warnings.warn(
                f"hurst {self.hurst} is at or above the admissible threshold "
                f"{hurst_threshold(sigma):.4g} for sigma={sigma}", stacklevel=2)

    def make_kernel(self) -> Kernel:
        return kernel_from_table(self.kernel, self.dim)

    def make_sgrid(self) -> SpatialGrid:
        return SpatialGrid(self.half_width, self.n_cells, self.dim)

    def to_table(self) -> dict:
        d = asdict(self)
        d["solve"] = {k: v for k, v in asdict(self.solve).items()}
        return d

    @classmethod
    def from_table(cls, tab: dict) -> "ExperimentConfig":
        return cls(**tab)


def load_config(path) -> ExperimentConfig:
    with open(path, "rb") as f:
        tab = tomllib.load(f)
    return ExperimentConfig.from_table(tab)


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot emit {type(v)} to TOML")


def dumps_config(cfg: ExperimentConfig) -> str:
    """Emit a config as TOML with canonical key order."""
    tab = cfg.to_table()
    lines = []
    nested = {}
    for k in sorted(tab):
        v = tab[k]
        if isinstance(v, dict):
            nested[k] = v
        else:
            lines.append(f"{k} = {_toml_value(v)}")
    for k in sorted(nested):
        lines.append("")
        lines.append(f"[{k}]")
        for kk in sorted(nested[k]):
            lines.append(f"{kk} = {_toml_value(nested[k][kk])}")
    return "\n".join(lines) + "\n"


def save_config(cfg: ExperimentConfig, path):
    with open(path, "w") as f:
        f.write(dumps_config(cfg))
