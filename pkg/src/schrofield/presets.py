"""Preset potentials and initial states for scenario configs.

Every preset is a pure function of its parameters, so runs built from the
same config are bit-reproducible.
"""

import numpy as np

from .errors import ConfigError
from .lattice import Potential, inner_product

POTENTIAL_PRESETS = ("free", "harmonic", "square_well", "gaussian_barrier", "inline")
STATE_PRESETS = ("eigenstate", "gaussian", "modes", "inline")


def potential_from_spec(grid, spec, mass=1.0):
    """Build a Potential from a preset name/parameter mapping."""
    if isinstance(spec, str):
        spec = {"name": spec}
    name = spec.get("name")
    params = {k: v for k, v in spec.items() if k != "name"}
    x = grid.points()

    if name == "free":
        _no_extra(name, params, ())
        values = np.zeros(grid.n)
    elif name == "harmonic":
        _no_extra(name, params, ("omega",))
        omega = float(params.get("omega", 1.0))
        values = 0.5 * mass * omega * omega * x * x
    elif name == "square_well":
        _no_extra(name, params, ("depth", "width"))
        depth = float(params.get("depth", 1.0))
        width = float(params.get("width", 1.0))
        center = x[0] + 0.5 * (x[-1] - x[0])
        values = np.where(np.abs(x - center) <= 0.5 * width, -depth, 0.0)
    elif name == "gaussian_barrier":
        _no_extra(name, params, ("height", "width", "center"))
        height = float(params.get("height", 1.0))
        width = float(params.get("width", 1.0))
        center = float(params.get("center", 0.0))
        values = height * np.exp(-0.5 * ((x - center) / width) ** 2)
    elif name == "inline":
        _no_extra(name, params, ("values",))
        values = np.asarray(params["values"], dtype=float)
    else:
        raise ConfigError(f"unknown potential preset {name!r}")
    return Potential(values=values)


def initial_pair_from_spec(spec, spectrum):
    """Initial pair of real grid functions from a preset.

    The pair is (re, im) for wave scenarios and doubles as (phi, p) for field
    and constrained scenarios.
    """
    if isinstance(spec, str):
        if spec.startswith("eigenstate:"):
            spec = {"type": "eigenstate", "index": int(spec.split(":", 1)[1])}
        else:
            spec = {"type": spec}
    kind = spec.get("type")
    params = {k: v for k, v in spec.items() if k != "type"}
    grid = spectrum.grid
    n = grid.n

    if kind == "eigenstate":
        _no_extra(kind, params, ("index",))
        idx = int(params.get("index", 0))
        if not 0 <= idx < n:
            raise ConfigError(f"eigenstate index {idx} out of range 0..{n - 1}")
        # index counts up from the ground state; eigenvalues ascend in kappa,
        # so energies -kappa descend with column index
        return np.array(spectrum.vectors[:, n - 1 - idx]), np.zeros(n)
    if kind == "gaussian":
        _no_extra(kind, params, ("center", "width", "momentum"))
        center = float(params.get("center", 0.0))
        width = float(params.get("width", 1.0))
        momentum = float(params.get("momentum", 0.0))
        x = grid.points()
        envelope = np.exp(-((x - center) ** 2) / (4.0 * width * width))
        phase = momentum * x / spectrum.hbar
        re = envelope * np.cos(phase)
        im = envelope * np.sin(phase)
        norm = np.sqrt(
            inner_product(re, re, grid) + inner_product(im, im, grid)
        )
        if norm == 0.0:
            raise ConfigError("gaussian initial state vanished on the grid")
        return re / norm, im / norm
    if kind == "modes":
        _no_extra(kind, params, ("coefficients",))
        re_c = np.zeros(n)
        im_c = np.zeros(n)
        for entry in params.get("coefficients", []):
            if len(entry) != 3:
                raise ConfigError(
                    f"mode coefficient entries are [index, re, im]; got {entry!r}"
                )
            idx, re_val, im_val = int(entry[0]), float(entry[1]), float(entry[2])
            if not 0 <= idx < n:
                raise ConfigError(f"mode index {idx} out of range 0..{n - 1}")
            # same ground-up numbering as the eigenstate preset
            re_c[n - 1 - idx] = re_val
            im_c[n - 1 - idx] = im_val
        return spectrum.synthesize(re_c), spectrum.synthesize(im_c)
    if kind == "inline":
        _no_extra(kind, params, ("re", "im"))
        re = np.asarray(params.get("re", np.zeros(n)), dtype=float)
        im = np.asarray(params.get("im", np.zeros(n)), dtype=float)
        if re.shape != (n,) or im.shape != (n,):
            raise ConfigError(
                f"inline state needs {n} values per component, got "
                f"{re.shape[0] if re.ndim == 1 else re.shape} re and "
                f"{im.shape[0] if im.ndim == 1 else im.shape} im"
            )
        return re, im
    raise ConfigError(f"unknown initial-state preset {kind!r}")


def _no_extra(name, params, allowed):
    extra = set(params) - set(allowed)
    if extra:
        raise ConfigError(f"unknown keys {sorted(extra)} for preset {name!r}")
