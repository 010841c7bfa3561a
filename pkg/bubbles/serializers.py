import hashlib
import json
import logging
from collections.abc import Mapping
from pathlib import Path

from django.conf import settings
from rest_framework import serializers

from .diagnostics import check_corridor_parameters
from .exceptions import ConfigError, GridError, InvalidCorridorError
from .profiles import default_sigma
from .spectral import Grid1D

logger = logging.getLogger(__name__)

TOLERANCE_KEYS = ('ground_state', 'profile', 'compatibility', 'decomposition')
HASH_EXCLUDED = ('output_dir',)


def default_tolerances():
    defaults = settings.HALFWAVE
    return {
        'ground_state': defaults['GROUND_STATE_TOL'],
        'profile': defaults['PROFILE_TOL'],
        'compatibility': defaults['COMPATIBILITY_TOL'],
        'decomposition': defaults['DECOMPOSITION_TOL'],
    }


class GridSerializer(serializers.Serializer):
    n_points = serializers.IntegerField(required=False)
    length = serializers.FloatField(required=False)

    def validate(self, attrs):
        attrs.setdefault('n_points', settings.HALFWAVE['DEFAULT_N_POINTS'])
        attrs.setdefault('length', settings.HALFWAVE['DEFAULT_LENGTH'])
        try:
            Grid1D(attrs['n_points'], attrs['length'])
        except GridError as exc:
            raise serializers.ValidationError(str(exc))
        return attrs


class RunConfigSerializer(serializers.Serializer):
    K = serializers.IntegerField(min_value=1)
    omega = serializers.FloatField()
    omegas = serializers.ListField(child=serializers.FloatField(), required=False, allow_null=True,
                                   default=None)
    centers = serializers.ListField(child=serializers.FloatField(), allow_empty=False)
    thetas = serializers.ListField(child=serializers.FloatField(), allow_empty=False)
    t_start = serializers.FloatField()
    t_stop = serializers.FloatField()
    grid = GridSerializer(required=False)
    direction = serializers.ChoiceField(choices=['forward', 'backward'], default='forward')
    nonlinearity = serializers.ChoiceField(choices=['focusing', 'defocusing', 'linear'], default='focusing')
    dealias = serializers.BooleanField(default=False)
    dt_factor = serializers.FloatField(default=0.1)
    dt_max = serializers.FloatField(default=1e-2, min_value=0.0)
    dt_min = serializers.FloatField(default=1e-9, min_value=0.0)
    max_steps = serializers.IntegerField(default=10 ** 6, min_value=1)
    observer_stride = serializers.IntegerField(default=10, min_value=1)
    checkpoint_stride = serializers.IntegerField(default=10, min_value=0)
    A_virial = serializers.FloatField(default=50.0, min_value=1.0)
    A_sweep = serializers.ListField(child=serializers.FloatField(min_value=1.0), default=list)
    delta = serializers.FloatField(default=0.1)
    varsigma = serializers.FloatField(default=0.2)
    sigma = serializers.FloatField(required=False, allow_null=True, default=None)
    ball_radius = serializers.FloatField(default=1.0)
    tolerances = serializers.DictField(child=serializers.FloatField(), default=dict)
    output_dir = serializers.CharField(default=lambda: settings.HALFWAVE['OUTPUT_DIR'])
    seed = serializers.IntegerField(default=0, min_value=0)

    def to_internal_value(self, data):
        if not isinstance(data, Mapping):
            raise serializers.ValidationError({'non_field_errors': ['Expected a JSON object.']})
        unknown = sorted(set(data) - set(self.fields))
        if unknown:
            raise serializers.ValidationError({key: ['Unknown field.'] for key in unknown})
        return super().to_internal_value(data)

    def validate_omega(self, value):
        if value <= 0:
            raise serializers.ValidationError('omega must be positive.')
        return value

    def validate_dt_factor(self, value):
        if not 0 < value <= 1:
            raise serializers.ValidationError('dt_factor must lie in (0, 1].')
        return value

    def validate_tolerances(self, value):
        unknown = sorted(set(value) - set(TOLERANCE_KEYS))
        if unknown:
            raise serializers.ValidationError(f'Unknown tolerance(s): {", ".join(unknown)}.')
        if any(tol <= 0 for tol in value.values()):
            raise serializers.ValidationError('Tolerances must be positive.')
        return {**default_tolerances(), **value}

    def validate(self, attrs):
        if 'grid' not in attrs:
            attrs['grid'] = GridSerializer().validate({})
        grid = Grid1D(attrs['grid']['n_points'], attrs['grid']['length'])
        K = attrs['K']
        centers = attrs['centers']
        errors = {}

        for name in ('centers', 'thetas'):
            if len(attrs[name]) != K:
                errors[name] = f'Expected {K} values, got {len(attrs[name])}.'
        if attrs.get('omegas') is not None:
            if len(attrs['omegas']) != K:
                errors['omegas'] = f'Expected {K} values, got {len(attrs["omegas"])}.'
            elif any(w <= 0 for w in attrs['omegas']):
                errors['omegas'] = 'Frequencies must be positive.'

        if not attrs['t_start'] < attrs['t_stop'] < 0:
            errors['t_stop'] = 'Times must satisfy t_start < t_stop < 0.'
        if attrs['dt_min'] > attrs['dt_max']:
            errors['dt_min'] = 'dt_min must not exceed dt_max.'

        if 'centers' not in errors:
            if any(b <= a for a, b in zip(centers, centers[1:])):
                errors['centers'] = 'Centers must be strictly increasing.'
            elif any(abs(c) >= 0.5 * grid.length for c in centers):
                errors['centers'] = 'Centers must lie inside the periodic box.'
            else:
                sigma = attrs['sigma'] if attrs['sigma'] is not None else default_sigma(grid, centers)
                if 8.0 * sigma < 4.0 * grid.spacing:
                    errors['centers'] = (f'Localization scale sigma={sigma:.3g} is too small for '
                                         f'grid spacing {grid.spacing:.3g}.')
                elif K > 1 and attrs['ball_radius'] >= 0.5 * min(b - a for a, b in zip(centers, centers[1:])):
                    errors['ball_radius'] = 'Balls around neighbouring centers overlap.'
        if attrs['ball_radius'] <= 0:
            errors['ball_radius'] = 'ball_radius must be positive.'

        try:
            check_corridor_parameters(attrs['delta'], attrs['varsigma'])
        except InvalidCorridorError as exc:
            errors['delta'] = str(exc)

        if errors:
            raise serializers.ValidationError(errors)
        return attrs


def _flatten_errors(errors, prefix=''):
    messages = []
    for key, value in errors.items():
        name = f'{prefix}{key}'
        if isinstance(value, Mapping):
            messages.extend(_flatten_errors(value, f'{name}.'))
        else:
            items = value if isinstance(value, list) else [value]
            messages.extend(f'{name}: {item}' for item in items)
    return messages


def validate_config(data, source='config'):
    """Validated run configuration with defaults filled, as a plain dict."""
    serializer = RunConfigSerializer(data=data)
    if not serializer.is_valid():
        messages = '; '.join(_flatten_errors(serializer.errors))
        raise ConfigError(f'{source}: {messages}', errors=serializer.errors)
    return canonical_config(serializer.validated_data)


def parse_config(path):
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f'config file not found: {path}')
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f'{path}: invalid JSON ({exc})')
    config = validate_config(data, source=str(path))
    logger.info(f"Parsed config {path} (K={config['K']}, window [{config['t_start']}, {config['t_stop']}])")
    return config


def canonical_config(config):
    return json.loads(json.dumps(config, sort_keys=True))


def config_echo(config) -> str:
    return json.dumps(canonical_config(config), sort_keys=True, indent=2) + '\n'


def config_hash(config) -> str:
    """12 hex digits of the sha256 of the canonical config, output_dir excluded."""
    hashed = {key: value for key, value in canonical_config(config).items() if key not in HASH_EXCLUDED}
    payload = json.dumps(hashed, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(payload.encode()).hexdigest()[:12]
