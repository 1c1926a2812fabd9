"""
Run configuration: defaults, parsing, overrides and fingerprint
"""

import configparser
import hashlib
import io
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, Optional, Tuple, Union

from models.domain_model import DomainSpec
from models.params_model import ModelParams
from models.trajectory_model import TimeGrid, SCHEMES
from utils.errors import ConfigurationError, ConfigSyntaxError, SummabilityError

logger = logging.getLogger(__name__)

VERSION = "0.1.0"
THREADS_ENV = "LLB_THREADS"

INITIAL_KINDS = ('zero', 'constant', 'mode', 'random', 'file')
STRUCTURE_NORMS = ('L2', 'L3/2')

# Default settings, in canonical order
DEFAULTS: Dict[str, Dict[str, str]] = {
    'domain': {
        'dimension': '1',
        'lengths': '1.0',
        'n_modes': '32',
        'quad_points': 'auto'
    },
    'model': {
        'kappa1': '1.0',
        'kappa2': '1.0',
        'gamma': '1.0',
        'mu': '1.0',
        'strat_gamma': 'true',
        'temperature': 'none',
        'curie_temperature': 'none',
        'chi_parallel': 'none'
    },
    'noise': {
        'k': '8',
        'amplitude': '0.1',
        'decay': '2.0',
        'fields_file': 'none'
    },
    'time': {
        't_end': '1.0',
        'n_steps': '1000'
    },
    'initial': {
        'kind': 'random',
        'value': '1.0, 0.0, 0.0',
        'mode': '1',
        'component': '0',
        'amplitude': '1.0',
        'h1_radius': '1.0',
        'decay': '2.0',
        'seed': '0',
        'file': 'none'
    },
    'run': {
        'scheme': 'heun',
        'master_seed': '0',
        'n_paths': '1',
        'stride': '1',
        'output_dir': './llb_output',
        'record_ledger': 'true'
    },
    'moments': {
        'exponents': '1, 2',
        'r': '1.2',
        'lags': 'auto',
        'norm': 'L3/2',
        'sweep_modes': 'none',
        'sweep_steps': 'none',
        'sweep_k': 'none',
        'windows': '4'
    },
    'convergence': {
        'n_list': '16, 32, 64, 128'
    },
    'uniqueness': {
        'deltas': '1e-4, 1e-5, 1e-6',
        'direction_seed': '1'
    },
    'invariant': {
        'horizons': '50, 100, 200',
        'radii': '0.5, 1, 2, 4, 8',
        'burn_in': '0.1'
    },
    'feller': {
        'modes': '2, 4, 8, 16'
    },
    'strong_order': {
        'levels': '1, 2, 4, 8',
        'reference_factor': '64'
    }
}


def _is_none(text: str) -> bool:
    return text.strip().lower() in ('none', 'auto', '')


def _to_bool(text: str) -> bool:
    value = text.strip().lower()
    if value in configparser.ConfigParser.BOOLEAN_STATES:
        return configparser.ConfigParser.BOOLEAN_STATES[value]
    raise ValueError(f"not a boolean: {text}")


def _to_floats(text: str) -> Tuple[float, ...]:
    return tuple(float(v) for v in text.split(',') if v.strip())


def _to_ints(text: str) -> Tuple[int, ...]:
    return tuple(int(v) for v in text.split(',') if v.strip())


def _optional(convert: Callable[[str], Any]) -> Callable[[str], Any]:
    def parse(text: str) -> Any:
        return None if _is_none(text) else convert(text)
    return parse


# Value type of every key
SCHEMA: Dict[str, Dict[str, Callable[[str], Any]]] = {
    'domain': {
        'dimension': int, 'lengths': _to_floats, 'n_modes': _to_ints,
        'quad_points': _optional(_to_ints)
    },
    'model': {
        'kappa1': float, 'kappa2': float, 'gamma': float, 'mu': float,
        'strat_gamma': _to_bool, 'temperature': _optional(float),
        'curie_temperature': _optional(float), 'chi_parallel': _optional(float)
    },
    'noise': {
        'k': int, 'amplitude': float, 'decay': float, 'fields_file': _optional(str)
    },
    'time': {'t_end': float, 'n_steps': int},
    'initial': {
        'kind': str, 'value': _to_floats, 'mode': _to_ints, 'component': int,
        'amplitude': float, 'h1_radius': float, 'decay': float, 'seed': int,
        'file': _optional(str)
    },
    'run': {
        'scheme': str, 'master_seed': int, 'n_paths': int, 'stride': int,
        'output_dir': str, 'record_ledger': _to_bool
    },
    'moments': {
        'exponents': _to_floats, 'r': float, 'lags': _optional(_to_floats), 'norm': str,
        'sweep_modes': _optional(_to_ints), 'sweep_steps': _optional(_to_ints),
        'sweep_k': _optional(_to_ints), 'windows': int
    },
    'convergence': {'n_list': _to_ints},
    'uniqueness': {'deltas': _to_floats, 'direction_seed': int},
    'invariant': {'horizons': _to_floats, 'radii': _to_floats, 'burn_in': float},
    'feller': {'modes': _to_ints},
    'strong_order': {'levels': _to_ints, 'reference_factor': int}
}

# keys whose 'none' is spelled 'auto' in canonical text
_AUTO_KEYS = {('domain', 'quad_points'), ('moments', 'lags')}


def _format(section: str, key: str, value: Any) -> str:
    """Canonical text of a typed value"""
    if value is None:
        return 'auto' if (section, key) in _AUTO_KEYS else 'none'
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ', '.join(_format(section, key, v) for v in value)
    return str(value)


def thread_count(default: int = 1) -> int:
    """Worker count from the LLB_THREADS environment variable"""
    raw = os.environ.get(THREADS_ENV)
    if raw is None or not raw.strip():
        return default
    try:
        count = int(raw)
    except ValueError:
        raise ConfigurationError(f"{THREADS_ENV}={raw!r} is not an integer")
    if count < 1:
        raise ConfigurationError(f"{THREADS_ENV} must be at least 1, got {count}")
    return count


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration with every default materialized"""

    values: Dict[str, Dict[str, Any]] = field(default_factory=dict)

    def get(self, section: str, key: str) -> Any:
        return self.values[section][key]

    def section(self, name: str) -> Dict[str, Any]:
        return dict(self.values[name])

    @property
    def domain(self) -> DomainSpec:
        d = self.get('domain', 'dimension')
        lengths = self.get('domain', 'lengths')
        modes = self.get('domain', 'n_modes')
        quad = self.get('domain', 'quad_points')
        return DomainSpec.create(
            dimension=d,
            lengths=lengths[0] if len(lengths) == 1 else lengths,
            n_modes=modes[0] if len(modes) == 1 else modes,
            quad_points=None if quad is None else (quad[0] if len(quad) == 1 else quad)
        )

    @property
    def params(self) -> ModelParams:
        """Effective coefficients, derived when raw physical inputs are given"""
        from services.llb_model import derive_params

        m = self.values['model']
        raw = (m['temperature'], m['curie_temperature'], m['chi_parallel'])
        if any(v is not None for v in raw):
            if any(v is None for v in raw):
                raise ConfigurationError(
                    "temperature, curie_temperature and chi_parallel go together", key="model"
                )
            return derive_params(*raw, kappa1=m['kappa1'], gamma=m['gamma'],
                                 strat_gamma=m['strat_gamma'])
        return ModelParams(
            kappa1=m['kappa1'], kappa2=m['kappa2'], gamma=m['gamma'], mu=m['mu'],
            strat_gamma=m['strat_gamma']
        )

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(self.get('time', 't_end'), self.get('time', 'n_steps'))

    @property
    def scheme(self) -> str:
        return self.get('run', 'scheme')

    @property
    def master_seed(self) -> int:
        return self.get('run', 'master_seed')

    @property
    def n_paths(self) -> int:
        return self.get('run', 'n_paths')

    @property
    def stride(self) -> int:
        return self.get('run', 'stride')

    @property
    def output_dir(self) -> Path:
        return Path(self.get('run', 'output_dir'))

    def validate(self) -> None:
        """Check every sub-configuration, raising the matching error category"""
        from services.llb_model import MIN_NOISE_DECAY

        domain = self.domain
        ok, message = self.params.validate()
        if not ok:
            raise ConfigurationError(message, key="model")

        noise = self.values['noise']
        if noise['fields_file'] is None:
            if noise['decay'] <= MIN_NOISE_DECAY:
                raise SummabilityError(
                    f"decay s={noise['decay']} must exceed {MIN_NOISE_DECAY} so that "
                    "sum_k ||h_k||^2_{W^{1,inf}} stays finite",
                    key="noise.decay"
                )
            if noise["k"] < 0:
                raise ConfigurationError("K must be non-negative", key="noise.k")
            if noise['amplitude'] < 0:
                raise ConfigurationError("amplitude must be non-negative", key="noise.amplitude")

        if self.get('run', 'stride') > self.grid.n_steps:
            logger.warning("stride exceeds n_steps: only the endpoints are kept")

        initial = self.values['initial']
        if initial['kind'] not in INITIAL_KINDS:
            raise ConfigurationError(
                f"kind must be one of {INITIAL_KINDS}, got '{initial['kind']}'", key="initial.kind"
            )
        if len(initial['value']) != 3:
            raise ConfigurationError("value needs three components", key="initial.value")
        if initial['kind'] == 'mode' and len(initial['mode']) != domain.dimension:
            raise ConfigurationError("mode needs one index per axis", key="initial.mode")
        if not 0 <= initial['component'] < 3:
            raise ConfigurationError("component must be 0, 1 or 2", key="initial.component")
        if initial['kind'] == 'file' and initial['file'] is None:
            raise ConfigurationError("kind=file requires a file", key="initial.file")

        run = self.values['run']
        if run['scheme'] not in SCHEMES:
            raise ConfigurationError(f"scheme must be one of {SCHEMES}", key="run.scheme")
        if run['master_seed'] < 0:
            raise ConfigurationError("master_seed must be non-negative", key="run.master_seed")
        if run['n_paths'] < 1:
            raise ConfigurationError("n_paths must be at least 1", key="run.n_paths")
        if run['stride'] < 1:
            raise ConfigurationError("stride must be at least 1", key="run.stride")

        moments = self.values['moments']
        if not 1.0 <= moments['r'] < 4.0 / 3.0:
            raise ConfigurationError("r must lie in [1, 4/3)", key="moments.r")
        if moments['norm'] not in STRUCTURE_NORMS:
            raise ConfigurationError(f"norm must be one of {STRUCTURE_NORMS}", key="moments.norm")
        if moments['windows'] < 0:
            raise ConfigurationError("windows must be non-negative", key="moments.windows")

        inv = self.values['invariant']
        if not 0.0 <= inv['burn_in'] < 1.0:
            raise ConfigurationError("burn_in must lie in [0, 1)", key="invariant.burn_in")
        if any(T <= 0 for T in inv['horizons']) or any(R <= 0 for R in inv['radii']):
            raise ConfigurationError("horizons and radii must be positive", key="invariant")
        if any(n < 2 for n in self.get('convergence', 'n_list')):
            raise ConfigurationError("truncations must be at least 2", key="convergence.n_list")
        if self.get('strong_order', 'reference_factor') < 2:
            raise ConfigurationError("reference_factor must be at least 2",
                                     key="strong_order.reference_factor")

    def to_parser(self) -> configparser.ConfigParser:
        parser = configparser.ConfigParser(interpolation=None)
        for section, keys in SCHEMA.items():
            parser[section] = {key: _format(section, key, self.values[section][key]) for key in keys}
        return parser

    def to_text(self) -> str:
        """Canonical text; parse_config(to_text()) gives back an equal config"""
        buffer = io.StringIO()
        self.to_parser().write(buffer)
        return buffer.getvalue()

    @property
    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_text().encode('utf-8')).hexdigest()[:16]


def _read_parser(text: str) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as e:
        raise ConfigSyntaxError("key outside any section", line=e.lineno) from e
    except configparser.ParsingError as e:
        line = e.errors[0][0] if e.errors else None
        raise ConfigSyntaxError("malformed line", line=line) from e
    except (configparser.DuplicateSectionError, configparser.DuplicateOptionError) as e:
        raise ConfigSyntaxError(e.message, line=e.lineno) from e
    except configparser.Error as e:
        raise ConfigSyntaxError(str(e)) from e
    return parser


def _apply_override(raw: Dict[str, Dict[str, str]], override: str) -> None:
    target, sep, value = override.partition('=')
    section, dot, key = target.strip().partition('.')
    if not sep or not dot:
        raise ConfigurationError(f"override '{override}' is not section.key=value")
    section, key = section.strip().lower(), key.strip().lower()
    if section not in SCHEMA or key not in SCHEMA[section]:
        raise ConfigurationError("unknown key", key=f"{section}.{key}")
    raw[section][key] = value.strip()


def parse_config(text: str, overrides: Iterable[str] = ()) -> RunConfig:
    """Parse INI text, fill defaults, apply overrides and validate"""
    parser = _read_parser(text)
    if parser.defaults():
        raise ConfigurationError("a DEFAULT section is not supported", key="DEFAULT")

    raw = {section: dict(keys) for section, keys in DEFAULTS.items()}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigurationError("unknown section", key=section)
        for key, value in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigurationError("unknown key", key=f"{section}.{key}")
            raw[section][key] = value
    for override in overrides:
        _apply_override(raw, override)

    values: Dict[str, Dict[str, Any]] = {}
    for section, keys in SCHEMA.items():
        values[section] = {}
        for key, convert in keys.items():
            try:
                values[section][key] = convert(raw[section][key])
            except ValueError as e:
                raise ConfigurationError(str(e), key=f"{section}.{key}") from e

    config = RunConfig(values)
    config.validate()
    logger.debug("Configuration %s parsed", config.fingerprint)
    return config


def load_config(path: Optional[Union[str, Path]] = None, overrides: Iterable[str] = ()) -> RunConfig:
    """Parse a configuration file (or the defaults when path is None)"""
    text = ""
    if path is not None:
        try:
            text = Path(path).read_text(encoding='utf-8')
        except OSError as e:
            raise ConfigurationError(f"cannot read configuration: {e}", key="config") from e
    return parse_config(text, overrides)


def apply_overrides(config: RunConfig, overrides: Iterable[str]) -> RunConfig:
    """New config with section.key=value overrides applied"""
    return parse_config(config.to_text(), overrides)
