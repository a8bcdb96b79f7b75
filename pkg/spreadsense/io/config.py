"""
Plain-text experiment configs and JSON run manifests.

Config files hold one `key = value` per line; `#` starts a comment and list
values are comma separated, e.g.

    kind = error-curves
    coverages = 0.2, 0.5
    snrs = 32
"""
import json
import os
import platform
import time

from spreadsense import __version__
from spreadsense.errors import InvalidArgument_Error

THREADS_ENV = 'S2_THREADS'


def read_config(path):
    """:return: dict of key -> raw string value, in file order"""
    entries = {}
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.split('#', 1)[0].strip()
            if not line:
                continue
            if '=' not in line:
                raise InvalidArgument_Error("{0}:{1}: expected key = value, got {2!r}".format(path, lineno, line))
            key, value = (s.strip() for s in line.split('=', 1))
            if not key:
                raise InvalidArgument_Error("{0}:{1}: empty key".format(path, lineno))
            if key in entries:
                raise InvalidArgument_Error("{0}:{1}: duplicate key {2}".format(path, lineno, key))
            entries[key] = value
    return entries


def parse_list(value, cast=float):
    items = [s.strip() for s in value.split(',') if s.strip()]
    try:
        return [cast(s) for s in items]
    except ValueError:
        raise InvalidArgument_Error("cannot parse {0!r} as a list of {1}".format(value, cast.__name__))


def parse_value(value, cast):
    try:
        return cast(value)
    except ValueError:
        raise InvalidArgument_Error("cannot parse {0!r} as {1}".format(value, cast.__name__))


def parse_bool(value):
    v = value.strip().lower()
    if v in ('1', 'true', 'yes', 'on'):
        return True
    if v in ('0', 'false', 'no', 'off'):
        return False
    raise InvalidArgument_Error("cannot parse {0!r} as a boolean".format(value))


def worker_count(requested=0):
    """requested > 0 wins, then S2_THREADS; 0 or unset means one worker per CPU"""
    if requested and requested > 0:
        return int(requested)
    env = os.environ.get(THREADS_ENV, '').strip()
    if env:
        try:
            n = int(env)
        except ValueError:
            raise InvalidArgument_Error("{0} must be an integer, got {1!r}".format(THREADS_ENV, env))
        if n < 0:
            raise InvalidArgument_Error("{0} must be >= 0, got {1}".format(THREADS_ENV, n))
        if n > 0:
            return n
    return os.cpu_count() or 1


def write_manifest(path, config, seeds, timings):
    """
    :param config: dict snapshot of the experiment config (JSON serializable)
    :param seeds: dict with master_seed and per-trial seeds
    :param timings: dict of wall-clock seconds
    """
    manifest = {
        'software': 'spreadsense',
        'version': __version__,
        'python': platform.python_version(),
        'created': time.strftime('%Y-%m-%dT%H:%M:%S'),
        'config': config,
        'seeds': seeds,
        'timings': timings,
    }
    with open(path, 'w') as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    return manifest


def read_manifest(path):
    with open(path) as f:
        return json.load(f)
