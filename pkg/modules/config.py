import os
import logging
from dataclasses import dataclass, field, fields, asdict
from typing import Mapping, Optional

from dotenv import dotenv_values

logger = logging.getLogger('config')

# Environment variables use this prefix, e.g. FLOODSIM_NODES=2000
ENV_PREFIX = 'FLOODSIM_'

# splitmix64 increment, also used to tag derived seed streams
SEED_MIX_CONSTANT = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1

# Stream tags for mix_seed
TOPOLOGY_STREAM = 1
GENERATOR_STREAM = 2
PLACEMENT_STREAM = 3
WORKLOAD_STREAM = 4
VERIFY_STREAM = 5

# TTL slot used for the workload seed when every TTL of a row replays one query stream
PAIRED_TTL_SLOT = 0xFFFF


class ConfigurationError(ValueError):
    """Raised for infeasible or malformed simulation parameters"""


class InvariantViolation(RuntimeError):
    """Raised when a run-time identity check on placement or metrics fails"""


def default_workers():
    """One cell process per CPU"""
    return os.cpu_count() or 1


def _splitmix64(value):
    z = (value + SEED_MIX_CONSTANT) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def mix_seed(master_seed, *parts):
    """Fold integer parts into a 64-bit seed derived from the master seed"""
    state = _splitmix64(master_seed & _MASK64)
    for part in parts:
        state = _splitmix64(state ^ (part & _MASK64))
    return state


def cell_seed(master_seed, replication, ttl):
    """Seed of the workload stream of one (RP, TTL) sweep cell"""
    return mix_seed(master_seed, WORKLOAD_STREAM, replication, ttl)


def parse_int_set(value):
    """Parse '2,8,32' or an inclusive range '1-8' into a sorted tuple of distinct ints"""
    if isinstance(value, (list, tuple, set, frozenset)):
        return tuple(sorted({int(v) for v in value}))
    items = set()
    for token in str(value).split(','):
        token = token.strip()
        if not token:
            continue
        if '-' in token[1:]:
            low, _, high = token[1:].partition('-')
            low, high = int(token[0] + low), int(high)
            if high < low:
                raise ConfigurationError(f"Empty integer range: {token!r}")
            items.update(range(low, high + 1))
        else:
            items.add(int(token))
    if not items:
        raise ConfigurationError(f"Empty integer set: {value!r}")
    return tuple(sorted(items))


def parse_bool(value):
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ('1', 'true', 'yes', 'on'):
        return True
    if text in ('0', 'false', 'no', 'off'):
        return False
    raise ConfigurationError(f"Invalid boolean value: {value!r}")


def _parse_optional_int_set(value):
    if value is None or str(value).strip().lower() in ('', 'none', 'default'):
        return None
    return parse_int_set(value)


def _parse_optional_str(value):
    if value is None or str(value).strip() == '':
        return None
    return str(value)


@dataclass(frozen=True)
class ExperimentConfig:
    nodes: int = 1000
    objects: int = 500
    deg_min: int = 2
    deg_max: int = 8
    replication_set: tuple = (2, 8, 32, 128, 512)
    ttl_set: tuple = (1, 2, 3, 4, 5, 6, 7, 8)
    generators: int = 10
    queries: int = 10000
    poisson_rate: float = 1.0
    seed: int = 1
    selected_local_nodes: Optional[tuple] = None
    local_node_count: int = 3
    origin_local_hit: bool = False
    paired_ttl: bool = True
    workers: int = field(default_factory=default_workers)
    output_dir: str = 'results'
    run_id: Optional[str] = None
    trace: bool = False
    include_sem: bool = False
    figures: bool = False

    @property
    def effective_run_id(self):
        return self.run_id or f"seed{self.seed}"

    def validate(self):
        """Check every field against the simulation preconditions"""
        if self.nodes < 2:
            raise ConfigurationError(f"nodes must be at least 2, got {self.nodes}")
        if self.deg_min < 1:
            raise ConfigurationError(f"deg_min must be at least 1, got {self.deg_min}")
        if self.deg_max < self.deg_min:
            raise ConfigurationError(
                f"deg_max ({self.deg_max}) must not be below deg_min ({self.deg_min})")
        if self.deg_max >= self.nodes:
            raise ConfigurationError(
                f"deg_max ({self.deg_max}) must be below the node count ({self.nodes})")
        if self.objects < 1:
            raise ConfigurationError(f"objects must be positive, got {self.objects}")
        if not self.replication_set:
            raise ConfigurationError("replication_set is empty")
        for replication in self.replication_set:
            if replication < 1 or replication > self.nodes:
                raise ConfigurationError(
                    f"replication {replication} outside [1, {self.nodes}]")
        if not self.ttl_set:
            raise ConfigurationError("ttl_set is empty")
        if min(self.ttl_set) < 0:
            raise ConfigurationError(f"TTL values must be non-negative: {self.ttl_set}")
        if self.generators < 1 or self.generators > self.nodes:
            raise ConfigurationError(
                f"generators must be in [1, {self.nodes}], got {self.generators}")
        if self.queries < 1:
            raise ConfigurationError(f"queries must be at least 1, got {self.queries}")
        if self.poisson_rate <= 0:
            raise ConfigurationError(f"poisson_rate must be positive, got {self.poisson_rate}")
        if self.local_node_count < 0:
            raise ConfigurationError("local_node_count must be non-negative")
        if self.workers < 1:
            raise ConfigurationError(f"workers must be at least 1, got {self.workers}")
        if self.selected_local_nodes is not None:
            for node in self.selected_local_nodes:
                if node < 0 or node >= self.nodes:
                    raise ConfigurationError(f"selected local node {node} is not a node ID")
        return self

    def as_dict(self):
        return asdict(self)


_FIELD_PARSERS = {
    'nodes': int,
    'objects': int,
    'deg_min': int,
    'deg_max': int,
    'replication_set': parse_int_set,
    'ttl_set': parse_int_set,
    'generators': int,
    'queries': int,
    'poisson_rate': float,
    'seed': int,
    'selected_local_nodes': _parse_optional_int_set,
    'local_node_count': int,
    'origin_local_hit': parse_bool,
    'paired_ttl': parse_bool,
    'workers': int,
    'output_dir': str,
    'run_id': _parse_optional_str,
    'trace': parse_bool,
    'include_sem': parse_bool,
    'figures': parse_bool,
}

CONFIG_FIELDS = tuple(f.name for f in fields(ExperimentConfig))


def _normalize_key(key):
    return key.strip().lower().replace('-', '_')


def _coerce(source, raw):
    coerced = {}
    for key, value in raw.items():
        name = _normalize_key(key)
        if name not in _FIELD_PARSERS:
            raise ConfigurationError(f"Unknown configuration key {key!r} in {source}")
        try:
            coerced[name] = _FIELD_PARSERS[name](value)
        except ConfigurationError:
            raise
        except (TypeError, ValueError) as e:
            raise ConfigurationError(f"Invalid value for {name} in {source}: {value!r} ({e})")
    return coerced


def read_config_file(path):
    """Read a flat key=value file; keys are config field names"""
    if not os.path.exists(path):
        raise ConfigurationError(f"Config file not found: {path}")
    values = dotenv_values(path)
    return _coerce(path, {k: v for k, v in values.items() if v is not None})


def read_environment(environ=None):
    environ = os.environ if environ is None else environ
    raw = {}
    for name in CONFIG_FIELDS:
        env_name = ENV_PREFIX + name.upper()
        if env_name in environ:
            raw[name] = environ[env_name]
    return _coerce('environment', raw)


def load_config(path=None, overrides: Optional[Mapping] = None, environ=None):
    """
    Build an ExperimentConfig.

    Precedence (lowest first): defaults, config file, FLOODSIM_* environment
    variables, explicit overrides (command-line flags). Override values of None
    are ignored.
    """
    values = {}
    if path:
        values.update(read_config_file(path))
        logger.info(f"Loaded configuration file {path}")
    values.update(read_environment(environ))
    if overrides:
        values.update(_coerce('command line', {k: v for k, v in overrides.items() if v is not None}))
    return ExperimentConfig(**values).validate()
