"""Experiment configuration: a flat key/value text format with dotted sections.

Example:

    config_id = table1-desk
    dims.n = 20000
    dims.n_z = 500
    dims.p = 2000
    ld.blocks = 350,310,300,290,270,250,230
    ld.x = ar:0.2,0.3,0.4,0.5,0.6,0.7,0.8
    ld.z = ar:0.8,0.7,0.6,0.5,0.4,0.3,0.2
    effects.sparsity_beta = 0.1
    effects.sparsity_alpha = 0.1
    effects.overlap = 0.1
    effects.target_corr = 0.5
    traits.h2_beta = 0.6
    traits.h2_alpha = 0.6
    estimators.panels =
    replicates = 200
    base_seed = 20240501

Unknown keys are hard errors: silent typos in sweep configs are worse than
strictness.  `ld.x`/`ld.z` accept `ar:<rho,...>` (one coefficient per block or
a single one for all) or `file:<path>` pointing at a covariance export;
`ld.blocks` accepts comma-separated sizes or `file:<path>` with a block-spec
file.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .blocks import BlockPartition, read_block_file
from .errors import ConfigError
from .ld import CovarianceMatrix, build_ar_covariance, build_block_covariance, read_covariance
from .simulate import EffectModel

PANEL_KINDS = ("ref-x", "ref-z", "ref-mixed")
MOMENT_MODES = ("population-exact", "sample-debiased")

_DEFAULTS = {
    "config_id": "experiment",
    "dims.n": None,
    "dims.n_z": None,
    "dims.n_w": None,
    "dims.p": None,
    "ld.blocks": None,
    "ld.x": None,
    "ld.z": None,
    "maf.low": "0.05",
    "maf.high": "0.45",
    "effects.sparsity_beta": "1.0",
    "effects.sparsity_alpha": "1.0",
    "effects.overlap": "independent",
    "effects.target_corr": "0.0",
    "effects.distribution": "gaussian",
    "effects.df": "",
    "traits.h2_beta": None,
    "traits.h2_alpha": None,
    "estimators.marginal": "true",
    "estimators.panels": "",
    "estimators.center": "true",
    "estimators.moments": "population-exact",
    "replicates": None,
    "base_seed": None,
    "output_dir": "",
    "workers": "1",
}

_REQUIRED = ("dims.n", "dims.n_z", "dims.p", "ld.blocks", "ld.x", "ld.z",
             "traits.h2_beta", "traits.h2_alpha", "replicates", "base_seed")


@dataclass(frozen=True)
class ExperimentConfig:
    config_id: str
    n: int
    n_z: int
    p: int
    block_sizes: tuple[int, ...] | None
    blocks_file: str | None
    ld_x: str
    ld_z: str
    h2_beta: float
    h2_alpha: float
    replicates: int
    base_seed: int
    n_w: int | None = None
    maf_low: float = 0.05
    maf_high: float = 0.45
    sparsity_beta: float = 1.0
    sparsity_alpha: float = 1.0
    overlap: float | None = None
    target_corr: float = 0.0
    distribution: str = "gaussian"
    df: float | None = None
    marginal: bool = True
    panels: tuple[tuple[str, float], ...] = ()
    center: bool = True
    moments_mode: str = "population-exact"
    output_dir: str = ""
    workers: int = 1

    def __post_init__(self):
        if self.replicates < 1:
            raise ConfigError(f"replicates must be >= 1, got {self.replicates}")
        if self.moments_mode not in MOMENT_MODES:
            raise ConfigError(f"unknown moments mode {self.moments_mode!r}")
        for kind, lam in self.panels:
            if kind not in PANEL_KINDS:
                raise ConfigError(f"unknown reference-panel kind {kind!r}")
            if lam <= 0:
                raise ConfigError(f"panel {kind}: lambda must be > 0, got {lam}")
        if self.panels and self.n_w is None:
            raise ConfigError("reference panels configured but dims.n_w missing")
        if not self.marginal and not self.panels:
            raise ConfigError("no estimators configured")

    # -- derived build helpers -------------------------------------------------

    def partition(self) -> BlockPartition:
        if self.blocks_file is not None:
            part = read_block_file(self.blocks_file)
        else:
            part = BlockPartition.from_sizes(self.block_sizes)
        if part.p != self.p:
            raise ConfigError(f"blocks cover 1..{part.p} but dims.p = {self.p}")
        return part

    def _build_cov(self, spec: str) -> CovarianceMatrix:
        part = self.partition()
        if spec.startswith("ar:"):
            rhos = [float(v) for v in spec[3:].split(",") if v != ""]
            if len(rhos) == 1:
                rhos = rhos * len(part)
            if len(rhos) != len(part):
                raise ConfigError(
                    f"{len(rhos)} AR coefficients for {len(part)} blocks in {spec!r}"
                )
            per_block = [build_ar_covariance(r, s) for r, s in zip(rhos, part.sizes)]
            return build_block_covariance(part, per_block)
        if spec.startswith("file:"):
            cov = read_covariance(spec[5:])
            if cov.partition.ranges != part.ranges:
                raise ConfigError(f"covariance file {spec[5:]} does not match ld.blocks")
            return cov
        raise ConfigError(f"unparseable LD spec {spec!r} (expected ar:... or file:...)")

    def x_cov(self) -> CovarianceMatrix:
        return self._build_cov(self.ld_x)

    def z_cov(self) -> CovarianceMatrix:
        return self._build_cov(self.ld_z)

    def effect_model(self) -> EffectModel:
        return EffectModel(
            p=self.p, sparsity_beta=self.sparsity_beta,
            sparsity_alpha=self.sparsity_alpha, target_corr=self.target_corr,
            overlap=self.overlap, distribution=self.distribution, df=self.df,
        )

    def with_output_dir(self, out_dir: str) -> "ExperimentConfig":
        return replace(self, output_dir=out_dir)

    def with_workers(self, workers: int) -> "ExperimentConfig":
        return replace(self, workers=workers)

    def with_seed(self, base_seed: int) -> "ExperimentConfig":
        return replace(self, base_seed=base_seed)

    # -- serialization ---------------------------------------------------------

    def to_text(self) -> str:
        lines = [
            f"config_id = {self.config_id}",
            f"dims.n = {self.n}",
            f"dims.n_z = {self.n_z}",
        ]
        if self.n_w is not None:
            lines.append(f"dims.n_w = {self.n_w}")
        lines.append(f"dims.p = {self.p}")
        if self.blocks_file is not None:
            lines.append(f"ld.blocks = file:{self.blocks_file}")
        else:
            lines.append("ld.blocks = " + ",".join(str(s) for s in self.block_sizes))
        lines += [
            f"ld.x = {self.ld_x}",
            f"ld.z = {self.ld_z}",
            f"maf.low = {self.maf_low}",
            f"maf.high = {self.maf_high}",
            f"effects.sparsity_beta = {self.sparsity_beta}",
            f"effects.sparsity_alpha = {self.sparsity_alpha}",
            "effects.overlap = " + ("independent" if self.overlap is None else str(self.overlap)),
            f"effects.target_corr = {self.target_corr}",
            f"effects.distribution = {self.distribution}",
            "effects.df = " + ("" if self.df is None else str(self.df)),
            f"traits.h2_beta = {self.h2_beta}",
            f"traits.h2_alpha = {self.h2_alpha}",
            f"estimators.marginal = {'true' if self.marginal else 'false'}",
            "estimators.panels = " + ",".join(f"{k}:{lam}" for k, lam in self.panels),
            f"estimators.center = {'true' if self.center else 'false'}",
            f"estimators.moments = {self.moments_mode}",
            f"replicates = {self.replicates}",
            f"base_seed = {self.base_seed}",
            f"output_dir = {self.output_dir}",
            f"workers = {self.workers}",
        ]
        return "\n".join(lines) + "\n"


def _parse_bool(value: str, key: str) -> bool:
    if value.lower() in ("true", "1", "yes"):
        return True
    if value.lower() in ("false", "0", "no"):
        return False
    raise ConfigError(f"{key}: expected boolean, got {value!r}")


def parse_config(text: str) -> ExperimentConfig:
    values = dict(_DEFAULTS)
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        values[key] = value
    missing = [k for k in _REQUIRED if values[k] is None]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")

    def as_int(key):
        try:
            return int(values[key])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key}: expected integer, got {values[key]!r}") from exc

    def as_float(key):
        try:
            return float(values[key])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key}: expected number, got {values[key]!r}") from exc

    blocks_spec = values["ld.blocks"]
    blocks_file = None
    block_sizes = None
    if blocks_spec.startswith("file:"):
        blocks_file = blocks_spec[5:]
    else:
        try:
            block_sizes = tuple(int(v) for v in blocks_spec.split(",") if v != "")
        except ValueError as exc:
            raise ConfigError(f"ld.blocks: unparseable sizes {blocks_spec!r}") from exc
        if not block_sizes:
            raise ConfigError("ld.blocks: no block sizes given")

    overlap_raw = values["effects.overlap"]
    overlap = None if overlap_raw == "independent" else float(overlap_raw)

    panels = []
    if values["estimators.panels"].strip():
        for item in values["estimators.panels"].split(","):
            if ":" not in item:
                raise ConfigError(f"estimators.panels: expected kind:lambda, got {item!r}")
            kind, lam = item.split(":", 1)
            panels.append((kind.strip(), float(lam)))

    n_w = as_int("dims.n_w") if values["dims.n_w"] not in (None, "") else None
    df = float(values["effects.df"]) if values["effects.df"] != "" else None

    return ExperimentConfig(
        config_id=values["config_id"],
        n=as_int("dims.n"), n_z=as_int("dims.n_z"), n_w=n_w, p=as_int("dims.p"),
        block_sizes=block_sizes, blocks_file=blocks_file,
        ld_x=values["ld.x"], ld_z=values["ld.z"],
        maf_low=as_float("maf.low"), maf_high=as_float("maf.high"),
        sparsity_beta=as_float("effects.sparsity_beta"),
        sparsity_alpha=as_float("effects.sparsity_alpha"),
        overlap=overlap, target_corr=as_float("effects.target_corr"),
        distribution=values["effects.distribution"], df=df,
        h2_beta=as_float("traits.h2_beta"), h2_alpha=as_float("traits.h2_alpha"),
        marginal=_parse_bool(values["estimators.marginal"], "estimators.marginal"),
        panels=tuple(panels),
        center=_parse_bool(values["estimators.center"], "estimators.center"),
        moments_mode=values["estimators.moments"],
        replicates=as_int("replicates"), base_seed=as_int("base_seed"),
        output_dir=values["output_dir"], workers=as_int("workers"),
    )


def load_config(path) -> ExperimentConfig:
    with open(path, "rt", encoding="utf-8") as fh:
        return parse_config(fh.read())
