"""One JSON document configures a whole run, with one section per stage.

Unknown sections or keys are configuration errors, so a typo never silently
falls back to a default.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace

from .baselines import PsoConfig
from .errors import ConfigError, DataError
from .network import MtlConfig
from .world import SyntheticWorldConfig

METHODS = ("SIP", "EOF-MFP", "FNN", "MTL")
BANDS = ((0.0, 200.0), (200.0, 800.0), (800.0, 1300.0), (1300.0, 3500.0))
U64_MAX = 2**64 - 1


@dataclass(frozen=True)
class SspConfig:
    max_depth: float = 3500.0
    layer_count: int = 50
    psi: int = 5
    lambda_tk: float = 0.02
    kmeans_seed: int = 0

    def __post_init__(self):
        if self.layer_count < 2:
            raise ConfigError("layer_count must be >= 2")
        if self.max_depth <= 0:
            raise ConfigError("max_depth must be positive")
        if self.psi < 1:
            raise ConfigError("psi must be >= 1")
        if not 0.0 <= self.lambda_tk <= 1.0:
            raise ConfigError("lambda_tk must lie in [0, 1]")


@dataclass(frozen=True)
class EofConfig:
    retain_order: int = 3
    mapping: str = "aligned"
    crossfade: float = 20.0
    full_resolution: bool = False
    eof_depth: float = 3200.0
    final_depth: float = 3500.0
    slope_window: float = 50.0

    def __post_init__(self):
        if not 1 <= self.retain_order <= 6:
            raise ConfigError("retain_order must lie in 1..6")
        if self.mapping not in ("aligned", "direct"):
            raise ConfigError("mapping must be 'aligned' or 'direct'")
        if self.crossfade < 0 or self.slope_window <= 0:
            raise ConfigError("crossfade must be >= 0 and slope_window > 0")


@dataclass(frozen=True)
class BenchmarkConfig:
    repetitions: int = 100
    methods: tuple = METHODS
    bands: tuple = BANDS
    master_seed: int = 0
    timing_calls: int = 100
    mfp_timing_calls: int = 5
    workers: int = 1

    def __post_init__(self):
        methods = tuple(self.methods)
        bad = [m for m in methods if m not in METHODS]
        if bad or not methods or len(set(methods)) != len(methods):
            raise ConfigError(f"methods must be distinct names from {METHODS}")
        object.__setattr__(self, "methods", methods)
        bands = tuple(tuple(float(x) for x in b) for b in self.bands)
        if not bands or any(len(b) != 2 or b[0] >= b[1] for b in bands):
            raise ConfigError("bands must be (lower, upper) pairs with lower < upper")
        if any(a[1] != b[0] for a, b in zip(bands, bands[1:])) or bands[0][0] != 0.0:
            raise ConfigError("bands must be contiguous and start at 0")
        object.__setattr__(self, "bands", bands)
        if self.repetitions < 1 or self.timing_calls < 1 or self.mfp_timing_calls < 1:
            raise ConfigError("repetition and timing counts must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not 0 <= self.master_seed <= U64_MAX:
            raise ConfigError("master_seed must be an unsigned 64-bit integer")


SECTIONS = {
    "world": SyntheticWorldConfig,
    "ssp": SspConfig,
    "eof": EofConfig,
    "mtl": MtlConfig,
    "pso": PsoConfig,
    "benchmark": BenchmarkConfig,
}


@dataclass(frozen=True)
class ExperimentConfig:
    world: SyntheticWorldConfig = field(default_factory=SyntheticWorldConfig)
    ssp: SspConfig = field(default_factory=SspConfig)
    eof: EofConfig = field(default_factory=EofConfig)
    mtl: MtlConfig = field(default_factory=MtlConfig)
    pso: PsoConfig = field(default_factory=PsoConfig)
    benchmark: BenchmarkConfig = field(default_factory=BenchmarkConfig)

    def __post_init__(self):
        if self.ssp.layer_count != self.mtl.output_size:
            raise ConfigError("ssp.layer_count must equal mtl.output_size")
        if self.world.ping_count * 4 != self.mtl.input_size:
            raise ConfigError("mtl.input_size must equal 4 receivers x world.ping_count")
        if self.world.cluster_count < self.mtl.cluster_count:
            raise ConfigError("mtl.cluster_count exceeds the number of world clusters")
        if self.ssp.max_depth > self.world.max_depth:
            raise ConfigError("ssp.max_depth deeper than the generated profiles")

    def to_dict(self) -> dict:
        out = {}
        for name in SECTIONS:
            d = asdict(getattr(self, name))
            out[name] = {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}
        out["benchmark"]["bands"] = [list(b) for b in self.benchmark.bands]
        return out

    @classmethod
    def from_dict(cls, doc) -> ExperimentConfig:
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(doc) - set(SECTIONS)
        if unknown:
            raise ConfigError(f"unknown config section(s): {sorted(unknown)}")
        parts = {}
        for name, kind in SECTIONS.items():
            section = doc.get(name, {})
            if not isinstance(section, dict):
                raise ConfigError(f"section {name!r} must be an object")
            allowed = {f.name for f in fields(kind)}
            extra = set(section) - allowed
            if extra:
                raise ConfigError(f"unknown key(s) in {name!r}: {sorted(extra)}")
            values = {k: tuple(v) if isinstance(v, list) else v for k, v in section.items()}
            try:
                parts[name] = kind(**values)
            except (TypeError, ValueError) as exc:
                if isinstance(exc, ConfigError):
                    raise
                raise ConfigError(f"section {name!r}: {exc}") from None
        return cls(**parts)

    def with_seed(self, seed: int) -> ExperimentConfig:
        """Route one master seed to the world, the trainers and the swarm."""
        if not 0 <= int(seed) <= U64_MAX:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        seed = int(seed)
        return replace(
            self,
            world=self.world.replace(seed=seed),
            mtl=self.mtl.replace(seed=seed),
            pso=self.pso.replace(seed=seed),
            benchmark=replace(self.benchmark, master_seed=seed),
        )


def load_config(path=None, seed: int | None = None) -> ExperimentConfig:
    """Defaults, overridden by the JSON file at ``path``, then by ``seed``."""
    from .io import read_json

    if path is None:
        cfg = ExperimentConfig()
    else:
        try:
            doc = read_json(path)
        except DataError as exc:
            raise ConfigError(str(exc)) from None
        cfg = ExperimentConfig.from_dict(doc)
    return cfg if seed is None else cfg.with_seed(seed)
