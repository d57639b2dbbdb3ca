"""Line-oriented run configuration and the preset library.

A config is a list of ``section.key = value`` lines; ``#`` starts a comment.
Each ``form.mass`` line opens a new form, and the ``form.term`` and
``form.metric`` lines after it belong to that form.  Likewise each
``weight.component`` line opens a new smooth component of a
``max_of_trig`` weight.  Example::

    grid.ndim = 1
    grid.N = 64
    form.mass = 1.0
    form.mass = 1.0
    form.term = 0 1 0.002        # kx ky amplitude of a cosine in the potential
    weight.kind = trig
    weight.term = 1 0 0.3
    schedule.beta_max = 1048576
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .continuation import BetaSchedule
from .energy import PREFACTORS
from .errors import ConfigError, NotPositive
from .grid import Grid
from .problem import ProblemData, Weight, form_from_potential, matrix_form, validate

_SCALARS = {
    "grid.ndim": int, "grid.N": int,
    "schedule.beta0": float, "schedule.growth": float, "schedule.beta_max": float,
    "schedule.ladder_tol": float,
    "solver.tol": float, "solver.max_newton": int, "solver.energy_prefactor": str,
    "outputs.dir": str, "outputs.dump_fields": "bool", "outputs.dump_every_rung": "bool",
    "weight.kind": str, "weight.constant": float,
    "beta.value": float,
    "check.tol": float, "check.laplacian_reference": str,
    "derivative.direction": str, "derivative.steps": "floats",
    "uniqueness.n_starts": int, "uniqueness.beta": float,
    "sweep.N": "ints", "sweep.beta": "floats",
    "envelope.tol": float,
}

DEFAULTS = {
    "grid.ndim": 1, "grid.N": 64,
    "solver.tol": 1e-10, "solver.max_newton": 60, "solver.energy_prefactor": "standard",
    "outputs.dir": "", "outputs.dump_fields": False, "outputs.dump_every_rung": False,
    "weight.kind": "trig", "weight.constant": 0.0,
    "beta.value": 100.0,
    "check.tol": 1e-3, "check.laplacian_reference": "saturated",
    "derivative.direction": "terms", "derivative.steps": [0.04, 0.02, 0.01],
    "uniqueness.n_starts": 5,
    "envelope.tol": 1e-8,
}


@dataclass
class FormSpec:
    mass: float
    terms: list = field(default_factory=list)
    metric: list | None = None


@dataclass
class RunConfig:
    values: dict
    forms: list
    weight_components: list
    derivative_terms: list
    concavity_terms: list
    text: str = ""

    def get(self, key):
        return self.values.get(key, DEFAULTS.get(key))

    @property
    def grid(self) -> Grid:
        return Grid(self.get("grid.ndim"), self.get("grid.N"))

    @property
    def schedule(self) -> BetaSchedule:
        kw = {k.split(".", 1)[1]: v for k, v in self.values.items() if k.startswith("schedule.")}
        try:
            return BetaSchedule(**kw)
        except ValueError as exc:
            raise ConfigError(str(exc), key="schedule") from None

    def with_values(self, **updates) -> "RunConfig":
        """Copy with ``section_key=value`` overrides (``grid_N=32``)."""
        vals = dict(self.values)
        for k, v in updates.items():
            vals[k.replace("_", ".", 1)] = v
        cfg = RunConfig(vals, self.forms, self.weight_components, self.derivative_terms,
                        self.concavity_terms)
        cfg.text = cfg.resolved_text()
        return cfg

    def build(self) -> ProblemData:
        """Assemble and validate the problem data; failures raise ConfigError."""
        try:
            grid = self.grid
        except ValueError as exc:
            raise ConfigError(str(exc), key="grid") from None
        if not self.forms:
            raise ConfigError("at least one form.mass block is required", key="form.mass")
        forms = []
        for j, spec in enumerate(self.forms, start=1):
            if not spec.mass > 0:
                raise ConfigError(f"form {j}: mass {spec.mass:g} must be positive",
                                  key="form.mass")
            try:
                if grid.ndim == 1:
                    if spec.metric is not None:
                        raise ConfigError(f"form {j}: form.metric needs grid.ndim = 2")
                    psi = grid.cosine_series(spec.terms)
                    forms.append(form_from_potential(spec.mass, psi))
                else:
                    if spec.terms:
                        raise ConfigError(f"form {j}: ndim = 2 forms are constant; use form.metric")
                    g = np.eye(2) if spec.metric is None else _metric(spec.metric)
                    forms.append(matrix_form(grid, spec.mass * g))
            except (NotPositive, ValueError) as exc:
                raise ConfigError(f"form {j}: {exc}", key="form") from None
        weight = self.weight(grid)
        data = ProblemData(forms, weight)
        problems = validate(data)
        if problems:
            raise ConfigError("; ".join(problems))
        if self.get("solver.energy_prefactor") not in PREFACTORS:
            raise ConfigError(f"energy_prefactor must be one of {PREFACTORS}",
                              key="solver.energy_prefactor")
        return data

    def weight(self, grid: Grid) -> Weight:
        kind = self.get("weight.kind")
        const = self.get("weight.constant")
        comps = self.weight_components or [[]]
        try:
            fields = [grid.cosine_series(terms, const) for terms in comps]
        except ValueError as exc:
            raise ConfigError(str(exc), key="weight.term") from None
        if kind == "trig":
            if len(comps) != 1:
                raise ConfigError("weight.kind = trig takes a single component",
                                  key="weight.component")
            return Weight(fields[0], smooth=True)
        if kind == "max_of_trig":
            vals = np.max([f.values for f in fields], axis=0)
            return Weight(grid.field(vals), smooth=len(fields) == 1)
        raise ConfigError(f"unknown weight.kind {kind!r}", key="weight.kind")

    def field_from_terms(self, terms, grid: Grid | None = None):
        grid = grid or self.grid
        return grid.cosine_series(terms)

    def resolved_text(self) -> str:
        """Canonical text with every default filled in (used for hashing)."""
        scalars = {key: self.get(key) for key in set(DEFAULTS) | set(self.values)}
        sched = self.schedule
        for name in ("beta0", "growth", "beta_max", "ladder_tol"):
            scalars[f"schedule.{name}"] = float(getattr(sched, name))
        lines = [f"{key} = {_fmt(scalars[key])}" for key in sorted(scalars)]
        for spec in self.forms:
            lines.append(f"form.mass = {_fmt(spec.mass)}")
            if spec.metric is not None:
                lines.append(f"form.metric = {_fmt(spec.metric)}")
            lines.extend(f"form.term = {_term(t)}" for t in spec.terms)
        for comp in self.weight_components:
            if len(self.weight_components) > 1:
                lines.append("weight.component")
            lines.extend(f"weight.term = {_term(t)}" for t in comp)
        lines.extend(f"derivative.term = {_term(t)}" for t in self.derivative_terms)
        lines.extend(f"concavity.term = {_term(t)}" for t in self.concavity_terms)
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.resolved_text().encode()).hexdigest()


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (list, tuple)):
        return " ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _term(t):
    k, amp = t
    return " ".join(str(x) for x in k) + f" {amp!r}"


def _metric(vals):
    if len(vals) != 4:
        raise ValueError("form.metric takes g11 g22 re(g12) im(g12)")
    g11, g22, re12, im12 = vals
    return np.array([[g11, re12 + 1j * im12], [re12 - 1j * im12, g22]])


def _convert(kind, raw):
    if kind == "bool":
        low = raw.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if kind == "floats":
        return [float(x) for x in raw.replace(",", " ").split()]
    if kind == "ints":
        return [int(x) for x in raw.replace(",", " ").split()]
    return kind(raw)


def _parse_term(raw):
    parts = raw.replace(",", " ").split()
    if len(parts) < 2:
        raise ValueError("term needs wavenumbers and an amplitude")
    return tuple(int(p) for p in parts[:-1]), float(parts[-1])


def parse_config(text: str) -> RunConfig:
    """Parse config text; errors name the offending line."""
    values, forms, comps, dterms, cterms = {}, [], [], [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line == "weight.component":
            key, val = line, ""
        elif "=" not in line:
            raise ConfigError("expected 'section.key = value'", line=lineno)
        else:
            key, val = (s.strip() for s in line.split("=", 1))
        try:
            if key == "form.mass":
                forms.append(FormSpec(float(val)))
            elif key in ("form.term", "form.metric"):
                if not forms:
                    raise ValueError(f"{key} before any form.mass")
                if key == "form.term":
                    forms[-1].terms.append(_parse_term(val))
                else:
                    forms[-1].metric = [float(x) for x in val.replace(",", " ").split()]
            elif key == "weight.component":
                comps.append([])
            elif key == "weight.term":
                if not comps:
                    comps.append([])
                comps[-1].append(_parse_term(val))
            elif key == "derivative.term":
                dterms.append(_parse_term(val))
            elif key == "concavity.term":
                cterms.append(_parse_term(val))
            elif key in _SCALARS:
                if key in values:
                    raise ValueError("duplicate key")
                values[key] = _convert(_SCALARS[key], val)
            else:
                raise ValueError("unknown key")
        except ValueError as exc:
            raise ConfigError(str(exc), line=lineno, key=key) from None
    cfg = RunConfig(values, forms, comps, dterms, cterms)
    cfg.text = cfg.resolved_text()
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None


PRESETS = {
    "trivial-m1": """\
grid.N = 64
form.mass = 1.0
""",
    "trivial-m2": """\
grid.N = 64
form.mass = 1.0
form.mass = 1.0
""",
    "trivial-m3": """\
grid.N = 64
form.mass = 1.0
form.mass = 1.0
form.mass = 1.0
""",
    "envelope": """\
# m = 1, flat form, phi = 0.5 cos(2 pi x)
grid.N = 128
form.mass = 1.0
weight.term = 1 0 0.5
sweep.N = 32 64 128
""",
    "mixed-m2": """\
# two forms, the second with a small y-bump; phi = 0.3 cos(2 pi x)
grid.N = 64
form.mass = 1.0
form.mass = 1.0
form.term = 0 1 0.002
weight.term = 1 0 0.3
derivative.term = 1 0 1.0
concavity.term = 0 1 0.3
""",
    "max-of-smooth": """\
# continuous, non-smooth weight max(0.3 cos(2 pi x), 0.3 cos(2 pi y))
grid.N = 64
form.mass = 1.0
form.mass = 1.0
form.term = 0 1 0.002
weight.kind = max_of_trig
weight.component
weight.term = 1 0 0.3
weight.component
weight.term = 0 1 0.3
""",
    "nd-small": """\
# complex dimension 2 (experimental): two constant metrics, small weight
grid.ndim = 2
grid.N = 8
form.mass = 1.0
form.mass = 1.0
form.metric = 1.0 2.0 0.3 0.1
weight.term = 1 0 0 0 0.001
schedule.beta_max = 1.0
""",
}


def preset(name: str) -> RunConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return parse_config(PRESETS[name])
